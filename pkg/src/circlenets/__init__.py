"""Circle-based principal directions and discrete conjugate and circular nets."""
