"""Epsilon sweeps, log-log order fits and the registry of convergence experiments."""
from __future__ import annotations

import csv
import json
import os
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import spearmanr

from .catalog import make_surface
from .conics import Conic2, circle_conic_intersections, conic_axes, diagonal_bisectors, point_conic_distance
from .constructions import (
    circular_fourth_point,
    ee6_coefficient,
    euclidean_principal,
    grid_quad,
    moebius_principal,
    planar_fourth_point,
    planarity_defect,
    triple_around,
)
from .errors import (
    AllAtFloor,
    GeometryError,
    ParabolicPoint,
    TooFewSamples,
    UmbilicRegion,
    UnknownExperiment,
)
from .geom3 import Plane3, circle_through, line_angle, rotation_matrix, unit
from .intersect import SurfaceHit, circle_surface_hits, line_surface_hit, plane_section
from .nets import (
    build_circular_net,
    build_conjugate_onsurface,
    build_conjugate_projection,
    deviation_report,
    net_quad_defects,
)
from .surface import dupin_indicatrix, is_umbilic, principal_frame

FLOOR = 1e3 * np.finfo(float).eps
LADDER = (0.2, 0.1, 0.05, 0.025, 0.0125)
NET_LADDER = (0.2, 0.1, 0.05, 0.025)


@dataclass(frozen=True)
class ConvergenceSample:
    eps: float
    error: float
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if not np.isfinite(self.error):
            raise ValueError("error must be finite")


@dataclass(frozen=True)
class SlopeFit:
    slope: float
    intercept: float
    r_squared: float
    n_points: int
    n_floor: int = 0


def fit_order(samples) -> SlopeFit:
    """Least-squares line through (log eps, log error), ignoring samples at the floor."""
    samples = list(samples)
    if len(samples) < 3:
        raise TooFewSamples("need at least 3 samples, got %d" % len(samples))
    used = [s for s in samples if abs(s.error) >= FLOOR]
    if not used:
        raise AllAtFloor("all %d samples are below the round-off floor %.1e" % (len(samples), FLOOR))
    if len(used) < 3:
        raise TooFewSamples("only %d samples above the round-off floor" % len(used))
    x = np.log([s.eps for s in used])
    y = np.log([abs(s.error) for s in used])
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid**2) / ss if ss > 0 else 1.0
    return SlopeFit(float(slope), float(intercept), float(r2), len(used), len(samples) - len(used))


@dataclass(frozen=True)
class ExperimentSpec:
    id: str
    measure: str
    metric: str
    surface: str
    uv: tuple
    eps: tuple = LADDER
    grid: str | None = None
    expected: tuple | None = None
    tolerance: float | None = None
    gating: bool = True
    seed: int = 0
    note: str = ""

    def __post_init__(self):
        e = list(self.eps)
        if any(b >= a for a, b in zip(e, e[1:])):
            raise ValueError("eps list must be strictly decreasing")

    def is_well_spread(self) -> bool:
        return len(self.eps) >= 4 and self.eps[0] / self.eps[-1] >= 8 - 1e-12

    def grid_size(self, eps) -> int | None:
        if self.grid is None:
            return None
        kind, _, val = self.grid.partition(":")
        if kind == "fixed":
            return int(val)
        if kind == "inverse":
            return int(np.floor(float(val) / eps + 1e-9))
        raise ValueError("unknown grid rule %r" % self.grid)

    def to_record(self) -> dict:
        d = asdict(self)
        d["uv"] = list(self.uv)
        d["eps"] = list(self.eps)
        d["expected"] = list(self.expected) if self.expected else None
        return d


@dataclass
class ExperimentResult:
    spec: ExperimentSpec
    samples: list
    fit: SlopeFit | None
    passed: bool
    status: str
    failures: list = field(default_factory=list)

    @property
    def max_error(self) -> float:
        return max((s.error for s in self.samples), default=float("nan"))

    def to_record(self) -> dict:
        return {
            "id": self.spec.id,
            "spec": self.spec.to_record(),
            "samples": [{"eps": s.eps, "error": s.error, **s.metadata} for s in self.samples],
            "slope": self.fit.slope if self.fit else None,
            "r2": self.fit.r_squared if self.fit else None,
            "max_error": self.max_error,
            "status": self.status,
            "failures": self.failures,
            "pass": self.passed,
        }

    def summary(self) -> str:
        flag = "PASS" if self.passed else "FAIL"
        if self.spec.tolerance is not None:
            detail = "max error %.3e (tol %.1e)" % (self.max_error, self.spec.tolerance)
        elif self.fit is not None:
            detail = "slope %.3f in [%.1f, %.1f], r2 %.4f" % (
                self.fit.slope, self.spec.expected[0], self.spec.expected[1], self.fit.r_squared)
        else:
            detail = self.status
        gate = "" if self.spec.gating else " (informational)"
        return "%s %s: %s%s" % (flag, self.spec.id, detail, gate)

    def write(self, outdir):
        os.makedirs(outdir, exist_ok=True)
        base = os.path.join(outdir, self.spec.id)
        with open(base + ".json", "w", encoding="utf-8") as fh:
            json.dump(self.to_record(), fh, indent=1)
        keys = sorted({k for s in self.samples for k in s.metadata})
        with open(base + ".csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["experiment", "eps", "error"] + keys)
            for s in self.samples:
                w.writerow([self.spec.id, "%.17g" % s.eps, "%.17g" % s.error]
                           + [_fmt(s.metadata.get(k, "")) for k in keys])


def _fmt(x):
    return "%.17g" % x if isinstance(x, float) else x


# measurements -------------------------------------------------------------------
# Each measurement maps (spec, eps) to ({metric: error}, {extra: value}).  One
# measurement can feed several registered experiments, so results are cached.

_CACHE: dict = {}


def measure(spec: ExperimentSpec, eps: float):
    key = (spec.measure, spec.surface, tuple(spec.uv), eps, spec.grid_size(eps), spec.seed)
    if key not in _CACHE:
        _CACHE[key] = MEASURES[spec.measure](spec, eps)
    return _CACHE[key]


def clear_cache():
    _CACHE.clear()


def mean_curvature_radius(s, uv) -> float:
    fr = principal_frame(s, uv)
    return 2.0 / abs(fr.K1 + fr.K2)


def _m_principal(spec, eps):
    s = make_surface(spec.surface)
    A, B, C = triple_around(s, spec.uv, eps)
    e = euclidean_principal(s, A, B, C)
    m = moebius_principal(s, spec.uv, mean_curvature_radius(s, spec.uv), eps)
    return ({"euclidean": e.max_error, "moebius": m.max_error},
            {"eps_eff_euclidean": e.eps_eff, "eps_eff_moebius": m.eps_eff})


def _m_moebius_exact(spec, eps, draws=4):
    """Worst Moebius angle error over seeded base points and sphere radii."""
    s = make_surface(spec.surface)
    rng = np.random.default_rng([spec.seed, int(round(eps * 1e6))])
    worst = 0.0
    for _ in range(draws):
        while True:
            uv = np.array([rng.uniform(lo, hi) for lo, hi in s.domain])
            if s.name == "cylinder":
                uv[0] = rng.uniform(-1.0, 1.0)
            fr = principal_frame(s, uv)
            kappa = fr.K1 + rng.uniform(0.15, 0.85) * (fr.K2 - fr.K1)
            if abs(kappa) > 0.05:
                break
        est = moebius_principal(s, uv, 1.0 / abs(kappa), eps)
        worst = max(worst, est.max_error)
    return {"moebius": worst}, {"draws": draws}


def _m_planarity(spec, eps):
    s = make_surface(spec.surface)
    A, B, C, D = grid_quad(s, spec.uv, eps)
    q = planarity_defect(A, B, C, D)
    phi = ee6_coefficient(s, spec.uv)
    ratio = 12 * q.planarity_volume / eps**6 / phi
    return ({"height": q.planarity_height, "ee6_mismatch": abs(ratio - 1.0)},
            {"volume": q.planarity_volume, "ee6_ratio": ratio})


def _m_planar_fourth(spec, eps):
    s = make_surface(spec.surface)
    A, B, C, D = grid_quad(s, spec.uv, eps)
    M = planar_fourth_point(s, A, B, C, D)
    du, dv = np.asarray(M.uv) - np.asarray(D.uv)
    return {"distance": float(np.linalg.norm(M.point - D.point))}, {"du": du, "dv": dv}


def _m_circular_fourth(spec, eps):
    s = make_surface(spec.surface)
    A, B, C, D = grid_quad(s, spec.uv, eps)
    M = circular_fourth_point(s, A, B, C, D)
    return {"distance": float(np.linalg.norm(M.point - D.point))}, {}


def _m_centers(spec, eps):
    """Circle (ABC) against the Dupin indicatrix at the surface point under its centre."""
    s = make_surface(spec.surface)
    A, B, C, D = grid_quad(s, spec.uv, eps)
    omega = circle_through(A.point, B.point, C.point)
    plane = omega.plane
    P = line_surface_hit(omega.center, omega.normal, s, D.uv)
    Q = dupin_indicatrix(s, P.uv, plane)
    fr = principal_frame(s, P.uv)
    cx, cy = Q.center()
    # lift the conic centre onto the plane along the frame normal
    base = fr.from_local(cx, cy)
    t = (plane.offset - plane.normal @ base) / (plane.normal @ fr.normal)
    center3 = base + t * fr.normal
    dist = float(np.linalg.norm(center3 - omega.center))
    hits = circle_surface_hits(omega, s, D.uv)
    angles = []
    for h in hits:
        n = s.normal(h.uv)
        sec = unit(np.cross(n, plane.normal))
        angles.append(line_angle(omega.tangent_through(h.point), sec))
    return ({"center_distance": dist, "crossing_angle": min(angles)},
            {"hits": len(hits)})


def indicatrix_closeness(s, uv, eps) -> ConvergenceSample:
    """Largest distance from the section of a plane at height ~eps^2 to the Dupin indicatrix.

    The plane is parallel to the tangent plane, offset towards the centre of
    the larger curvature so that the section is a closed curve of size ~eps.
    """
    if is_umbilic(s, uv):
        raise UmbilicRegion("indicatrix closeness is undefined at an umbilic")
    fr = principal_frame(s, uv)
    if abs(fr.K1 * fr.K2) < 1e-8:
        raise ParabolicPoint("K1 K2 = 0: the indicatrix is not a central conic")
    side = 1.0 if fr.K1 + fr.K2 > 0 else -1.0
    h = side * eps**2 * (abs(fr.K1) + abs(fr.K2)) / 4
    plane = Plane3.through(fr.point + h * fr.normal, fr.normal)
    Q = dupin_indicatrix(s, uv, plane)
    # seed on the plane along the smaller-curvature axis
    x0 = np.sqrt(2 * abs(h) / max(abs(fr.K1), abs(fr.K2)))
    seed = line_surface_hit(fr.from_local(0.0, x0, h), fr.dir2, s, uv)
    curve = plane_section(s, plane, seed, step=eps / 40)
    local = fr.to_local(curve.points)
    dist = max(point_conic_distance(Q, p[:2]) for p in local)
    return ConvergenceSample(eps, float(dist), {"vertices": len(local), "height": float(h)})


def _m_indicatrix(spec, eps):
    s = make_surface(spec.surface)
    smp = indicatrix_closeness(s, spec.uv, eps)
    return {"hausdorff": smp.error}, smp.metadata


def projection_rank_correlation(s, uv, eps) -> float:
    """Spearman correlation between per-vertex deviation and i*j for the projection net."""
    N = int(np.floor(1 / eps + 1e-9))
    net = build_conjugate_projection(s, uv, eps, N)
    rep = deviation_report(net, s)
    i, j = np.meshgrid(np.arange(N + 1), np.arange(N + 1), indexing="ij")
    m = (i > 0) & (j > 0)
    return float(spearmanr(rep.dist[m], (i * j)[m])[0])


def _m_projection(spec, eps):
    s = make_surface(spec.surface)
    N = spec.grid_size(eps)
    net = build_conjugate_projection(s, spec.uv, eps, N)
    rep = deviation_report(net, s)
    _, summ = net_quad_defects(net)
    return ({"deviation": rep.aggregates["all"]["dist"]["max"]},
            {"N": N, "planarity_max": summ["planarity_height"]["max"]})


def _m_onsurface(spec, eps):
    s = make_surface(spec.surface)
    N = spec.grid_size(eps)
    net = build_conjugate_onsurface(s, spec.uv, eps, N)
    rep = deviation_report(net, s)
    resid = float(np.max(np.linalg.norm(net.xyz - s(net.uv), axis=-1)))
    agg = rep.aggregates
    return ({"du": agg["all"]["du"]["max"], "dv": agg["all"]["dv"]["max"],
             "odd_dv": agg["odd"]["dv"]["max"]},
            {"N": N, "surface_residual": resid, "failed": agg["failed"]})


def _m_circular_net(spec, eps):
    s = make_surface(spec.surface)
    N = spec.grid_size(eps)
    net = build_circular_net(s, spec.uv, eps, N)
    rep = deviation_report(net, s)
    _, summ = net_quad_defects(net)
    agg = rep.aggregates
    return ({"deviation": agg["all"]["dist"]["max"],
             "even": agg["even"]["shift"]["max"], "odd": agg["odd"]["shift"]["max"],
             "along": agg["intermediate"]["along"]["max"],
             "cross": agg["intermediate"]["cross"]["max"]},
            {"N": N, "circularity_max": summ["circularity"]["max"], "failed": agg["failed"]})


def _random_conic_circle(rng, eps):
    """A central conic K1 x^2 + K2 y^2 = 2 eps^2 (rotated, shifted) and a circle
    meeting it in four simple points."""
    while True:
        K1, K2 = rng.uniform(0.3, 3.0), rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 3.0)
        if abs(K1 - K2) < 0.2:
            continue
        th = rng.uniform(0, np.pi)
        Rm = rotation_matrix([0, 0, 1], th)[:2, :2]
        t = rng.normal(size=2) * eps
        Q = Conic2.from_coeffs(K1, 0.0, K2, 0.0, 0.0, -2 * eps**2).transformed(Rm, t)
        c = t + rng.normal(size=2) * 0.3 * eps
        r = eps * rng.uniform(0.5, 2.5)
        W = Conic2.circle(c[0], c[1], r)
        hits = circle_conic_intersections(Q, W)
        if len(hits) == 4 and all(h.multiplicity == 1 for h in hits):
            pts = [h.point for h in hits]
            sep = min(np.linalg.norm(a - b) for k, a in enumerate(pts) for b in pts[k + 1:])
            if sep > 1e-3 * eps:
                return Q, pts


def lemma1_errors(rng, eps):
    """Worst angle between bisectors of the three pairings of chords and the conic axes."""
    Q, (A, B, C, D) = _random_conic_circle(rng, eps)
    ax1, ax2 = conic_axes(Q)
    worst = 0.0
    for p, q, r, t in ((A, B, C, D), (A, C, B, D), (A, B, D, C)):
        bis = diagonal_bisectors(p, q, r, t)
        if bis.parallel:
            continue
        e = min(max(line_angle(bis.b1, ax1), line_angle(bis.b2, ax2)),
                max(line_angle(bis.b1, ax2), line_angle(bis.b2, ax1)))
        worst = max(worst, e)
    return worst


def _m_lemma1(spec, eps, draws=20):
    rng = np.random.default_rng([spec.seed, int(round(eps * 1e6))])
    return {"angle": max(lemma1_errors(rng, eps) for _ in range(draws))}, {"draws": draws}


MEASURES = {
    "principal": _m_principal,
    "moebius-exact": _m_moebius_exact,
    "planarity": _m_planarity,
    "planar-fourth": _m_planar_fourth,
    "circular-fourth": _m_circular_fourth,
    "centers": _m_centers,
    "indicatrix": _m_indicatrix,
    "projection": _m_projection,
    "onsurface": _m_onsurface,
    "circular-net": _m_circular_net,
    "lemma1": _m_lemma1,
}

CUBIC = "cubic-graph:K1=1,K2=2,a30=0.1,a21=-0.05,a12=0.2,a03=0.07"
TORUS = "torus:R=2,r=1"
REVCONJ = "revolve-conjugate:c=0.5,k=3"
ELLCL = "ellipsoid-cl:a=5,b=3,c=1"
ELL_UV = (3.0, 14.0)

_E = ExperimentSpec
REGISTRY = {e.id: e for e in [
    _E("lemma1-bisectors", "lemma1", "angle", "plane", (0.0, 0.0), tolerance=1e-7),
    _E("thm2-torus-exact", "moebius-exact", "moebius", TORUS, (0.0, 0.0), tolerance=1e-6, seed=2),
    _E("thm2-cylinder-exact", "moebius-exact", "moebius", "cylinder:r=1", (0.0, 0.0),
       tolerance=1e-6, seed=3),
    _E("thm1-euclidean-cubic", "principal", "euclidean", CUBIC, (0.0, 0.0), expected=(1.7, 2.3)),
    _E("thm1-euclidean-torus", "principal", "euclidean", TORUS, (0.7, 0.3), expected=(1.7, 2.3)),
    _E("thm3-moebius-cubic", "principal", "moebius", CUBIC, (0.0, 0.0), expected=(1.7, 2.3)),
    _E("thm3-moebius-torus", "principal", "moebius", TORUS, (0.7, 0.3), expected=(1.7, 2.3)),
    _E("thm3-planarity", "planarity", "height", REVCONJ, (0.0, 0.0), expected=(3.7, 4.3)),
    _E("thm4-planar-fourth", "planar-fourth", "distance", REVCONJ, (0.0, 0.0), expected=(2.7, 3.3)),
    _E("thm5-circular-fourth", "circular-fourth", "distance", TORUS, (0.7, 0.3), expected=(2.7, 3.3)),
    _E("thm5-circular-fourth-ellipsoid", "circular-fourth", "distance", ELLCL, ELL_UV,
       expected=(2.7, 3.3), gating=False),
    _E("lemma6-centers", "centers", "center_distance", ELLCL, ELL_UV, expected=(1.7, 2.3)),
    _E("s41-projection", "projection", "deviation", REVCONJ, (0.0, 0.0), NET_LADDER,
       grid="inverse:1", expected=(1.7, 2.3)),
    _E("thm6-onsurface-du", "onsurface", "du", REVCONJ, (0.0, 0.0), NET_LADDER,
       grid="inverse:1", expected=(1.7, 2.3)),
    _E("thm6-onsurface-dv", "onsurface", "dv", REVCONJ, (0.0, 0.0), NET_LADDER,
       grid="inverse:1", expected=(2.7, 3.3)),
    _E("thm6-odd-dv-conjecture", "onsurface", "odd_dv", REVCONJ, (0.0, 0.0), NET_LADDER,
       grid="inverse:1", expected=(3.7, 4.3), gating=False),
    _E("thm7-circular-net", "circular-net", "deviation", TORUS, (0.0, 0.0), NET_LADDER,
       grid="inverse:1", expected=(1.7, 2.3)),
    _E("thm7-circular-net-ellipsoid", "circular-net", "deviation", ELLCL, ELL_UV, NET_LADDER,
       grid="inverse:1", expected=(1.7, 2.3), gating=False),
    _E("s42-even", "circular-net", "even", ELLCL, ELL_UV, NET_LADDER, grid="fixed:8",
       expected=(3.6, 4.4)),
    _E("s42-odd", "circular-net", "odd", ELLCL, ELL_UV, NET_LADDER, grid="fixed:8",
       expected=(2.7, 3.3)),
    _E("s42-along", "circular-net", "along", ELLCL, ELL_UV, NET_LADDER, grid="fixed:8",
       expected=(2.7, 3.3)),
    _E("s42-cross", "circular-net", "cross", ELLCL, ELL_UV, NET_LADDER, grid="fixed:8",
       expected=(3.6, 4.4)),
    _E("lemma9-indicatrix", "indicatrix", "hausdorff", TORUS, (0.7, 0.3), expected=(1.7, 2.3)),
]}


def get_experiment(eid: str) -> ExperimentSpec:
    try:
        return REGISTRY[eid]
    except KeyError:
        raise UnknownExperiment("unknown experiment %r" % eid) from None


def run_experiment(spec: ExperimentSpec) -> ExperimentResult:
    """Sweep eps, fit the order (or check exactness) and decide pass/fail.

    Construction failures at individual eps are recorded and the remaining
    samples are still used.
    """
    if spec.measure not in MEASURES:
        raise UnknownExperiment("experiment %r has no measurement %r" % (spec.id, spec.measure))
    exact = spec.tolerance is not None
    if not exact and len(spec.eps) < 3:
        raise TooFewSamples("experiment %s has only %d eps values" % (spec.id, len(spec.eps)))
    samples, failures = [], []
    for eps in spec.eps:
        try:
            metrics, extra = measure(spec, eps)
        except GeometryError as exc:
            failures.append({"eps": eps, "error": exc.name, "message": str(exc)})
            continue
        meta = dict(extra, eps_nominal=float(eps))
        # constructions with scattered points are fitted against their measured spread
        abscissa = extra.get("eps_eff_" + spec.metric, eps)
        samples.append(ConvergenceSample(float(abscissa), float(metrics[spec.metric]), meta))
    if exact:
        ok = bool(samples) and not failures and max(s.error for s in samples) < spec.tolerance
        return ExperimentResult(spec, samples, None, ok, "exact" if ok else "above tolerance", failures)
    try:
        fit = fit_order(samples)
    except AllAtFloor:
        return ExperimentResult(spec, samples, None, False, "exact to tolerance (no slope)", failures)
    except TooFewSamples as exc:
        return ExperimentResult(spec, samples, None, False, "too few samples: %s" % exc, failures)
    lo, hi = spec.expected
    ok = lo <= fit.slope <= hi
    return ExperimentResult(spec, samples, fit, ok, "slope", failures)
