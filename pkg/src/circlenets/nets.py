"""Discrete nets inscribed in a parametrized surface and their deviation analytics."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .constructions import (
    circular_fourth_point,
    circularity_defect,
    double_planar_point,
    planarity_defect,
)
from .errors import (
    CollinearPoints,
    DomainExit,
    FootPointFailure,
    NoConvergence,
    NotConjugate,
    PlaneDegenerate,
    SurfaceSpecError,
    UmbilicEncountered,
    UmbilicRegion,
)
from .geom3 import Plane3, triple_product
from .intersect import SurfaceHit
from .surface import Surface, closest_point, is_umbilic, principal_uv_direction, trace_curvature_line

FIXED_INITIAL = "fixed-initial"
FIXED_EVEN = "fixed-even-column"
CONSTRUCTED = "constructed"
PROJECTED = "projected"


@dataclass
class NetLattice:
    """Vertices f_ij, i along u and j along v, with i, j = 0..N."""
    xyz: np.ndarray
    uv: np.ndarray
    kind: np.ndarray
    eps: float
    uv0: np.ndarray
    builder: str = "smooth"

    @property
    def dims(self):
        return self.xyz.shape[:2]

    @property
    def ref_uv(self) -> np.ndarray:
        nu, nv = self.dims
        i, j = np.meshgrid(np.arange(nu), np.arange(nv), indexing="ij")
        return np.stack([self.uv0[0] + i * self.eps, self.uv0[1] + j * self.eps], -1)

    def hit(self, i, j) -> SurfaceHit:
        return SurfaceHit(self.xyz[i, j], self.uv[i, j])

    def cropped(self, nu, nv) -> "NetLattice":
        return NetLattice(self.xyz[:nu, :nv].copy(), self.uv[:nu, :nv].copy(),
                          self.kind[:nu, :nv].copy(), self.eps, self.uv0, self.builder)

    def quads(self):
        """Elementary quads as index 4-tuples in cyclic order."""
        nu, nv = self.dims
        for i in range(nu - 1):
            for j in range(nv - 1):
                yield (i, j), (i + 1, j), (i + 1, j + 1), (i, j + 1)

    def to_record(self) -> dict:
        nu, nv = self.dims
        verts = [{"i": i, "j": j, "uv": [float(x) for x in self.uv[i, j]],
                  "xyz": [float(x) for x in self.xyz[i, j]], "kind": str(self.kind[i, j])}
                 for i in range(nu) for j in range(nv)]
        return {"builder": self.builder, "dims": [int(nu), int(nv)], "eps": float(self.eps),
                "uv0": [float(x) for x in self.uv0], "vertices": verts}

    def to_json(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_record(), fh, indent=1)

    def to_obj(self, path):
        nu, nv = self.dims
        with open(path, "w") as fh:
            fh.write("# %s net, %d x %d vertices, eps=%.17g\n" % (self.builder, nu, nv, self.eps))
            for i in range(nu):
                for j in range(nv):
                    fh.write("v %.17g %.17g %.17g\n" % tuple(self.xyz[i, j]))
            for q in self.quads():
                fh.write("f %d %d %d %d\n" % tuple(i * nv + j + 1 for i, j in q))


def _empty(nu, nv, eps, uv0, builder):
    return NetLattice(np.full((nu, nv, 3), np.nan), np.full((nu, nv, 2), np.nan),
                      np.full((nu, nv), FIXED_INITIAL, dtype=object), float(eps),
                      np.asarray(uv0, dtype=float), builder)


def _check_domain(s: Surface, uv0, eps, nu, nv):
    for corner in ((0, 0), (nu - 1, 0), (0, nv - 1), (nu - 1, nv - 1)):
        uv = np.asarray(uv0, dtype=float) + eps * np.asarray(corner)
        if not s.in_domain(uv):
            raise DomainExit("grid vertex %r at uv=%r is outside the domain" % (corner, tuple(uv)))


def _trace_to(s: Surface, uv, which, k, target, ref):
    """Follow curvature line `which` from uv until coordinate k equals target."""
    uv = np.asarray(uv, dtype=float)
    for _ in range(20):
        gap = target - uv[k]
        if abs(gap) <= 1e-13 * max(1.0, abs(target)):
            return uv
        x, d, _ = principal_uv_direction(s, uv, which, ref=ref)
        if abs(x[k]) < 1e-12:
            raise NoConvergence("curvature line is tangent to the coordinate line")
        step = gap / x[k]
        uv = trace_curvature_line(s, uv, which, step, start_dir=d)
    raise NoConvergence("could not reach coordinate %.6g by tracing" % target)


def smooth_net(s: Surface, uv0, eps, Nu, Nv, traced=False) -> NetLattice:
    """Reference vertices f(u0 + i eps, v0 + j eps), i <= Nu, j <= Nv.

    With ``traced`` the grid is realized by integrating the principal
    direction fields instead: first along the u-family from uv0, then along
    the v-family from each point of the initial row.
    """
    nu, nv = Nu + 1, Nv + 1
    _check_domain(s, uv0, eps, nu, nv)
    net = _empty(nu, nv, eps, uv0, "smooth")
    ref = net.ref_uv
    if not traced:
        net.uv[:] = ref
        net.xyz[:] = s(ref.reshape(-1, 2)).reshape(nu, nv, 3)
        return net
    uv0 = np.asarray(uv0, dtype=float)
    j0 = s.jet(uv0, 1)
    x1, _, _ = principal_uv_direction(s, uv0, 1)
    ufam = 1 if abs(x1[0]) * np.linalg.norm(j0["u"]) >= abs(x1[1]) * np.linalg.norm(j0["v"]) else 2
    vfam = 3 - ufam
    row = [uv0]
    for i in range(1, nu):
        row.append(_trace_to(s, row[-1], ufam, 0, ref[i, 0, 0], s.jet(row[-1], 1)["u"]))
    for i in range(nu):
        col = [row[i]]
        for j in range(1, nv):
            col.append(_trace_to(s, col[-1], vfam, 1, ref[i, j, 1], s.jet(col[-1], 1)["v"]))
        net.uv[i] = col
    net.xyz[:] = s(net.uv.reshape(-1, 2)).reshape(nu, nv, 3)
    return net


def _require_conjugate(s: Surface):
    if s.tag not in ("conjugate", "curvature-line"):
        raise NotConjugate("surface %s is not tagged as a conjugate parametrization" % s.name)


def build_conjugate_projection(s: Surface, uv0, eps, N) -> NetLattice:
    """Planar-quad net: interior vertices are smooth vertices projected onto the
    plane of their three already-built neighbours."""
    _require_conjugate(s)
    net = smooth_net(s, uv0, eps, N, N)
    net.builder = "projection"
    nu, nv = net.dims
    for i in range(nu - 1):
        for j in range(nv - 1):
            a, b, c = net.xyz[i, j], net.xyz[i + 1, j], net.xyz[i, j + 1]
            try:
                plane = Plane3.from_points(a, b, c)
            except CollinearPoints as exc:
                raise PlaneDegenerate("quad (%d,%d): %s" % (i, j, exc)) from None
            net.xyz[i + 1, j + 1] = plane.project(net.xyz[i + 1, j + 1])
            net.uv[i + 1, j + 1] = np.nan
            net.kind[i + 1, j + 1] = PROJECTED
            vol = abs(triple_product(b - a, c - a, net.xyz[i + 1, j + 1] - a))
            if vol > 1e-12 * eps**3 + 1e-15:
                raise NoConvergence("projected quad (%d,%d) is not planar" % (i, j))
    return net


def build_conjugate_onsurface(s: Surface, uv0, eps, N) -> NetLattice:
    """Planar-quad net with every vertex on the surface.

    Row 0 and all even columns are fixed to the smooth net; each odd-column
    vertex M = (c, j) makes both quads (c-1..c, j-1..j) and (c..c+1, j-1..j)
    planar.  An odd N is built one column wider and cropped.
    """
    _require_conjugate(s)
    width = N + (N % 2)
    net = smooth_net(s, uv0, eps, width, N)
    net.builder = "onsurface"
    ref = net.uv.copy()
    nu, nv = net.dims
    net.kind[::2, 1:] = FIXED_EVEN
    for j in range(1, nv):
        for c in range(1, nu, 2):
            A, B, C = net.hit(c - 1, j - 1), net.hit(c, j - 1), net.hit(c - 1, j)
            E, F = net.hit(c + 1, j - 1), net.hit(c + 1, j)
            M = double_planar_point(s, A, B, C, E, F, SurfaceHit.at(s, ref[c, j]))
            net.xyz[c, j], net.uv[c, j], net.kind[c, j] = M.point, M.uv, CONSTRUCTED
            for p, q, r in ((A, B, C), (B, E, F)):
                vol = abs(triple_product(q.point - p.point, r.point - p.point, M.point - p.point))
                if vol > 1e-10 * eps**3:
                    raise NoConvergence("quad at (%d,%d) is not planar (volume %.2e)" % (c, j, vol))
    return net.cropped(N + 1, N + 1)


def build_circular_net(s: Surface, uv0, eps, N, umbilic_tol=1e-4) -> NetLattice:
    """Circular net on the surface: row 0 and column 0 fixed, vertex (i, j)
    is the fourth surface point of the circle through its three lower-left
    neighbours, chosen nearest the smooth vertex.  Filled by anti-diagonals.
    """
    if s.tag != "curvature-line":
        raise SurfaceSpecError("circular nets need a curvature-line parametrization")
    net = smooth_net(s, uv0, eps, N, N)
    net.builder = "circular"
    ref = net.uv.copy()
    nu, nv = net.dims
    if is_umbilic(s, ref[0, 0], umbilic_tol):
        raise UmbilicEncountered("base point is umbilic")
    for k in range(2, nu + nv - 1):
        for i in range(max(1, k - nv + 1), min(k, nu)):
            j = k - i
            if j < 1:
                continue
            A, B, C = net.hit(i - 1, j - 1), net.hit(i, j - 1), net.hit(i - 1, j)
            try:
                D = circular_fourth_point(s, A, B, C, SurfaceHit.at(s, ref[i, j]), umbilic_tol)
            except UmbilicRegion as exc:
                raise UmbilicEncountered(str(exc)) from None
            net.xyz[i, j], net.uv[i, j], net.kind[i, j] = D.point, D.uv, CONSTRUCTED
            q = circularity_defect(A, B, D, C).circularity
            if q > 1e-8:
                raise NoConvergence("quad at (%d,%d) is not circular (defect %.2e)" % (i, j, q))
    return net


# deviations ---------------------------------------------------------------------

SUBLATTICES = ("even", "odd", "intermediate")


def sublattice(i, j) -> str:
    if i % 2 == 0 and j % 2 == 0:
        return "even"
    if i % 2 == 1 and j % 2 == 1:
        return "odd"
    return "intermediate"


@dataclass
class DeviationReport:
    du: np.ndarray
    dv: np.ndarray
    dist: np.ndarray
    failed: np.ndarray
    aggregates: dict = field(default_factory=dict)

    def along_cross(self):
        """Intermediate-sublattice shifts split into along-line and cross-line parts.

        (odd, even) vertices sit on a u-line, so along = du, cross = dv;
        (even, odd) vertices sit on a v-line and the roles swap.
        """
        along, cross = [], []
        nu, nv = self.du.shape
        for i in range(nu):
            for j in range(nv):
                if self.failed[i, j] or sublattice(i, j) != "intermediate":
                    continue
                if i % 2 == 1:
                    along.append(abs(self.du[i, j]))
                    cross.append(abs(self.dv[i, j]))
                else:
                    along.append(abs(self.dv[i, j]))
                    cross.append(abs(self.du[i, j]))
        return np.array(along), np.array(cross)

    def to_csv(self, path):
        nu, nv = self.du.shape
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["i", "j", "du", "dv", "dist", "sublattice"])
            for i in range(nu):
                for j in range(nv):
                    if self.failed[i, j]:
                        w.writerow([i, j, "", "", "", sublattice(i, j)])
                    else:
                        w.writerow([i, j, "%.17g" % self.du[i, j], "%.17g" % self.dv[i, j],
                                    "%.17g" % self.dist[i, j], sublattice(i, j)])


def _wrap(d, period):
    return (d + period / 2) % period - period / 2


def _stats(x):
    x = np.abs(np.asarray(x, dtype=float))
    if x.size == 0:
        return {"max": float("nan"), "rms": float("nan"), "count": 0}
    return {"max": float(x.max()), "rms": float(np.sqrt(np.mean(x * x))), "count": int(x.size)}


def deviation_report(net: NetLattice, s: Surface) -> DeviationReport:
    """Shifts of every vertex from its smooth-net reference, in coordinates and in space."""
    ref = net.ref_uv
    nu, nv = net.dims
    du = np.full((nu, nv), np.nan)
    dv = np.full((nu, nv), np.nan)
    dist = np.full((nu, nv), np.nan)
    failed = np.zeros((nu, nv), dtype=bool)
    for i in range(nu):
        for j in range(nv):
            guess = net.uv[i, j] if np.all(np.isfinite(net.uv[i, j])) else ref[i, j]
            try:
                foot = closest_point(s, net.xyz[i, j], guess)
            except NoConvergence:
                failed[i, j] = True
                continue
            d = foot - ref[i, j]
            for k in range(2):
                if s.periodic[k]:
                    lo, hi = s.domain[k]
                    d[k] = _wrap(d[k], hi - lo)
            du[i, j], dv[i, j] = d
            dist[i, j] = np.linalg.norm(net.xyz[i, j] - s(ref[i, j]))
    rep = DeviationReport(du, dv, dist, failed)
    agg = {"all": {"shift": _stats(np.fmax(np.abs(du), np.abs(dv))[~failed]),
                   "du": _stats(du[~failed]), "dv": _stats(dv[~failed]),
                   "dist": _stats(dist[~failed])},
           "failed": int(failed.sum())}
    mask = {name: np.zeros((nu, nv), dtype=bool) for name in SUBLATTICES}
    for i in range(nu):
        for j in range(nv):
            mask[sublattice(i, j)][i, j] = True
    for name in SUBLATTICES:
        m = mask[name] & ~failed
        agg[name] = {"shift": _stats(np.fmax(np.abs(du), np.abs(dv))[m]),
                     "du": _stats(du[m]), "dv": _stats(dv[m]), "dist": _stats(dist[m])}
    along, cross = rep.along_cross()
    agg["intermediate"]["along"] = _stats(along)
    agg["intermediate"]["cross"] = _stats(cross)
    rep.aggregates = agg
    return rep


def net_quad_defects(net: NetLattice):
    """Per-quad planarity and circularity defects plus max/RMS summary."""
    rows = []
    for q in net.quads():
        a, b, c, d = (net.xyz[i, j] for i, j in q)
        p = planarity_defect(a, b, c, d)
        # cyclic order a, b, c, d; the cross-ratio is taken in that order
        circ = circularity_defect(a, b, c, d).circularity
        rows.append({"i": q[0][0], "j": q[0][1], "planarity_height": p.planarity_height,
                     "planarity_volume": p.planarity_volume, "circularity": circ})
    heights = np.array([r["planarity_height"] for r in rows])
    circs = np.array([r["circularity"] for r in rows])
    summary = {"planarity_height": _stats(heights), "circularity": _stats(circs)}
    return rows, summary
