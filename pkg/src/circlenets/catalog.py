"""Built-in test surfaces, selectable by strings such as ``torus:R=2,r=1``."""
from __future__ import annotations

import functools

import sympy as sp

from .errors import SurfaceSpecError
from .surface import Surface, sympy_surface

u, v = sp.symbols("u v", real=True)
PI = float(sp.pi)


def torus(R=2.0, r=1.0):
    x, y, z = sp.symbols("x y z")
    g = R + r * sp.cos(u)
    implicit = (R**2 + x**2 + y**2 + z**2 - r**2) ** 2 - 4 * R**2 * (x**2 + y**2)
    return sympy_surface([g * sp.cos(v), g * sp.sin(v), r * sp.sin(u)], u, v,
                         ((-PI, PI), (-PI, PI)), (True, True), "curvature-line",
                         implicit=implicit, name="torus", scale=r)


def sphere(R=1.0):
    x, y, z = sp.symbols("x y z")
    return sympy_surface([R * sp.cos(u) * sp.cos(v), R * sp.cos(u) * sp.sin(v), R * sp.sin(u)],
                         u, v, ((-PI / 2, PI / 2), (-PI, PI)), (False, True), "curvature-line",
                         implicit=x**2 + y**2 + z**2 - R**2, name="sphere", scale=R)


def cylinder(r=1.0):
    # u runs along the rulings, v around the axis; the normal f_u x f_v points
    # towards the axis so that the nonzero curvature is +1/r
    x, y, z = sp.symbols("x y z")
    return sympy_surface([r * sp.cos(v), r * sp.sin(v), u], u, v,
                         ((-10.0, 10.0), (-PI, PI)), (False, True), "curvature-line",
                         implicit=x**2 + y**2 - r**2, name="cylinder", scale=r)


def revolve(a=2.0, b=1.0, c=1.0, d=0.0):
    """Profile g(u) = a + b cos u + d cos 2u, h(u) = c sin u, rotated about z."""
    g = a + b * sp.cos(u) + d * sp.cos(2 * u)
    h = c * sp.sin(u)
    return sympy_surface([g * sp.cos(v), g * sp.sin(v), h], u, v,
                         ((-PI, PI), (-PI, PI)), (True, True), "curvature-line",
                         name="revolve", scale=1.0)


def revolve_conjugate(c=0.5, k=3.0):
    """Surface of revolution z = c rho^k in a conjugate net that is not orthogonal.

    rho = exp((u + v) / (2m)), theta = (u - v) / 2 with m = sqrt(k - 1).
    """
    if k <= 1:
        raise SurfaceSpecError("revolve-conjugate needs k > 1")
    m = sp.sqrt(sp.Float(k) - 1)
    rho = sp.exp((u + v) / (2 * m))
    th = (u - v) / 2
    return sympy_surface([rho * sp.cos(th), rho * sp.sin(th), c * rho**k], u, v,
                         ((-3.0, 3.0), (-3.0, 3.0)), (False, False), "conjugate",
                         name="revolve-conjugate", scale=1.0)


def cubic_graph(K1=1.0, K2=2.0, a30=0.0, a21=0.0, a12=0.0, a03=0.0):
    z = (K1 * u**2 + K2 * v**2) / 2 + a30 * u**3 + a21 * u**2 * v + a12 * u * v**2 + a03 * v**3
    return sympy_surface([u, v, z], u, v, ((-2.0, 2.0), (-2.0, 2.0)), (False, False),
                         "generic", name="cubic-graph", scale=1.0)


def translational(p=0.5, q=1.0, s=0.1, t=-0.2):
    return sympy_surface([u, v, p * u**2 + s * u**3 + q * v**2 + t * v**3], u, v,
                         ((-2.0, 2.0), (-2.0, 2.0)), (False, False), "conjugate",
                         name="translational", scale=1.0)


def cylinder_graph(c=1.0):
    return sympy_surface([u, v, c * u**2], u, v, ((-2.0, 2.0), (-2.0, 2.0)), (False, False),
                         "conjugate", name="cylinder-graph", scale=1.0)


def ellipsoid(a=3.0, b=2.0, c=1.0):
    x, y, z = sp.symbols("x y z")
    return sympy_surface([a * sp.cos(u) * sp.cos(v), b * sp.cos(u) * sp.sin(v), c * sp.sin(u)],
                         u, v, ((-PI / 2, PI / 2), (-PI, PI)), (False, True), "generic",
                         implicit=(x / a) ** 2 + (y / b) ** 2 + (z / c) ** 2 - 1,
                         name="ellipsoid", scale=c)


def ellipsoid_cl(a=5.0, b=3.0, c=1.0):
    """Triaxial ellipsoid in confocal (curvature-line) coordinates, positive octant.

    With A=a^2, B=b^2, C=c^2 the parameters satisfy C < u < B < v < A.
    """
    if not a > b > c > 0:
        raise SurfaceSpecError("ellipsoid-cl needs a > b > c > 0")
    A, B, C = a * a, b * b, c * c
    x = sp.sqrt(A * (A - u) * (A - v) / ((A - B) * (A - C)))
    y = sp.sqrt(B * (B - u) * (v - B) / ((A - B) * (B - C)))
    z = sp.sqrt(C * (u - C) * (v - C) / ((A - C) * (B - C)))
    X, Y, Z = sp.symbols("x y z")
    return sympy_surface([x, y, z], u, v, ((C, B), (B, A)), (False, False), "curvature-line",
                         implicit=X**2 / A + Y**2 / B + Z**2 / C - 1,
                         name="ellipsoid-cl", scale=1.0)


def plane():
    return sympy_surface([u, v, sp.Integer(0)], u, v, ((-10.0, 10.0), (-10.0, 10.0)),
                         (False, False), "curvature-line", name="plane", scale=1.0)


CATALOG = {
    "torus": torus,
    "sphere": sphere,
    "cylinder": cylinder,
    "revolve": revolve,
    "revolve-conjugate": revolve_conjugate,
    "cubic-graph": cubic_graph,
    "translational": translational,
    "cylinder-graph": cylinder_graph,
    "ellipsoid": ellipsoid,
    "ellipsoid-cl": ellipsoid_cl,
    "plane": plane,
}


def parse_spec(spec: str):
    """Split ``name:k=v,k=v`` into (name, {k: float})."""
    spec = spec.strip()
    name, _, rest = spec.partition(":")
    name = name.strip()
    if name not in CATALOG:
        raise SurfaceSpecError("unknown surface %r (known: %s)" % (name, ", ".join(sorted(CATALOG))))
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise SurfaceSpecError("malformed parameter %r in %r" % (item, spec))
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise SurfaceSpecError("parameter %r is not a number" % item) from None
    return name, params


@functools.lru_cache(maxsize=64)
def _build(name, items) -> Surface:
    try:
        s = CATALOG[name](**dict(items))
    except TypeError as exc:
        raise SurfaceSpecError("bad parameters for %s: %s" % (name, exc)) from None
    s.spec = name + (":" + ",".join("%s=%g" % kv for kv in items) if items else "")
    return s


def make_surface(spec: str) -> Surface:
    name, params = parse_spec(spec)
    return _build(name, tuple(sorted(params.items())))
