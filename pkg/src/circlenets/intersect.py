"""Intersections of circles, lines and planes with a parametric surface."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import (
    AllOnSurface,
    CurvatureSandwichViolated,
    FootPointFailure,
    NoConvergence,
    OpenCurveTruncated,
    Tangential,
    TangentialContact,
)
from .geom3 import Circle3, Plane3, Sphere3, as_point
from .surface import Surface, closest_point, closest_points, principal_frame


@dataclass(frozen=True)
class SurfaceHit:
    point: np.ndarray
    uv: np.ndarray
    parameter: float = 0.0
    multiplicity: int = 1

    @classmethod
    def at(cls, s: Surface, uv, parameter=0.0) -> "SurfaceHit":
        uv = np.asarray(uv, dtype=float)
        return cls(s(uv), uv, parameter)


def _signed_offset(s: Surface, p, uv_guess):
    try:
        uv = closest_point(s, p, uv_guess)
    except NoConvergence as exc:
        raise FootPointFailure(str(exc)) from None
    j = s.jet(uv, 1)
    n = np.cross(j["u"], j["v"])
    n /= np.linalg.norm(n)
    return float((p - j["f"]) @ n), uv


def _initial_uv(s: Surface, P, uv_hint):
    """Linearized foot points around uv_hint, used as Newton warm starts."""
    j = s.jet(uv_hint, 1)
    J = np.column_stack([j["u"], j["v"]])
    d = np.linalg.lstsq(J, (P - j["f"]).T, rcond=None)[0].T
    return uv_hint + d


def _continue_foot_points(s: Surface, P, UV, ok, uv_hint, r):
    """Repair foot points of a closed polyline of samples by continuation.

    Far from the hint the vectorized Newton can fail or settle on a distant
    critical point of the distance.  A sample is redone from a neighbour
    whenever it failed or that neighbour's foot point is strictly closer to
    it; every redo lowers a distance, so the sweep terminates.
    """
    n = len(P)
    F = s(UV)
    d = np.where(ok, np.linalg.norm(P - F, axis=1), np.inf)
    if not ok.any():
        i = int(np.argmin(np.linalg.norm(P - s(uv_hint), axis=1)))
        try:
            UV[i] = closest_point(s, P[i], uv_hint)
        except NoConvergence as exc:
            raise FootPointFailure("foot point failed at sample %d: %s" % (i, exc)) from None
        F[i] = s(UV[i])
        d[i] = np.linalg.norm(P[i] - F[i])
    todo = list(np.nonzero(np.isfinite(d))[0])
    for _ in range(20 * n):
        if not todo:
            break
        k = todo.pop()
        for i in ((k + 1) % n, (k - 1) % n):
            if np.linalg.norm(P[i] - F[k]) >= d[i] - 1e-12 * r:
                continue
            try:
                uv = closest_point(s, P[i], UV[k])
            except NoConvergence as exc:
                raise FootPointFailure("foot point failed at sample %d: %s" % (i, exc)) from None
            fi = s(uv)
            di = np.linalg.norm(P[i] - fi)
            if di < d[i]:
                UV[i], F[i], d[i] = uv, fi, di
                todo.append(i)
    if not np.isfinite(d).all():
        raise FootPointFailure("foot points could not be continued around the circle")
    return UV


def circle_surface_hits(c: Circle3, s: Surface, uv_hint, n_samples=256, basis=None):
    """Points where the circle crosses (or touches) the surface, sorted by angle.

    The signed normal offset g(theta) of the circle point from its foot point is
    sampled, sign changes are bracketed and refined by Brent's method.  Near a
    sample minimum of |g| without a sign change g is minimized continuously:
    a sign flip there yields two close crossings, a minimum below 1e-10 r a
    tangential hit with multiplicity 2.
    """
    uv_hint = np.asarray(uv_hint, dtype=float)
    basis = c.basis() if basis is None else basis
    # half-step offset keeps samples off the basis start, which callers often
    # place on a known surface point
    th = 2 * np.pi * (np.arange(n_samples) + 0.5) / n_samples
    P = c.point_at(th, basis)
    UV, ok = closest_points(s, P, _initial_uv(s, P, uv_hint))
    UV = _continue_foot_points(s, P, UV, ok, uv_hint, c.radius)
    j = s.jet(UV, 1)
    N = np.cross(j["u"], j["v"])
    N /= np.linalg.norm(N, axis=1, keepdims=True)
    g = np.einsum("ij,ij->i", P - j["f"], N)
    r = c.radius
    if np.max(np.abs(g)) < 1e-10 * r:
        raise AllOnSurface("circle lies on the surface")

    def gfun(t, guess):
        # warm start from the previous foot point when it is close in angle
        p = c.point_at(t, basis)
        if gfun.last_uv is not None and abs(t - gfun.last_t) < 2 * np.pi / n_samples:
            guess = gfun.last_uv
        val, uv = _signed_offset(s, p, guess)
        gfun.last_uv, gfun.last_t = uv, t
        return val

    gfun.last_uv, gfun.last_t = None, 0.0

    hits = []
    for i in range(n_samples):
        k = (i + 1) % n_samples
        t0 = th[i]
        t1 = th[k] if k else th[k] + 2 * np.pi
        g0, g1 = g[i], g[k]
        if g0 == 0.0:
            hits.append(SurfaceHit(P[i], UV[i].copy(), float(t0)))
            continue
        if g0 * g1 < 0:
            guess = UV[i] if abs(g0) < abs(g1) else UV[k]
            t = brentq(lambda x: gfun(x, guess), t0, t1, xtol=1e-15, rtol=1e-15, maxiter=200)
            gfun(t, guess)
            t = float(np.mod(t, 2 * np.pi))
            hits.append(SurfaceHit(c.point_at(t, basis), gfun.last_uv, t))
            continue
        # |g| has a local minimum at a sample without sign change: either a
        # tangential contact or two crossings inside one sample interval
        gp = g[i - 1]
        # strict on one side so a symmetric pair of samples counts once
        if abs(g0) < abs(gp) and abs(g0) <= abs(g1) and gp * g0 > 0 and g0 * g1 > 0:
            if abs(g0) > 1e-3 * r:
                continue
            guess = UV[i]
            sgn = np.sign(g0)
            h = 2 * np.pi / n_samples
            lo, hi = th[i] - h, th[i] + h
            res = minimize_scalar(lambda x: sgn * gfun(x, guess), bounds=(lo, hi),
                                  method="bounded", options={"xatol": 1e-13})
            if res.fun < -1e-10 * r:
                for a, b in ((lo, res.x), (res.x, hi)):
                    t = brentq(lambda x: gfun(x, guess), a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
                    gfun(t, guess)
                    t = float(np.mod(t, 2 * np.pi))
                    hits.append(SurfaceHit(c.point_at(t, basis), gfun.last_uv, t))
            elif res.fun < 1e-10 * r:
                t = float(np.mod(res.x, 2 * np.pi))
                gfun(t, guess)
                hits.append(SurfaceHit(c.point_at(t, basis), gfun.last_uv, t, 2))
    hits.sort(key=lambda h: h.parameter)
    return hits


def line_surface_hit(origin, direction, s: Surface, uv_hint, max_iter=50) -> SurfaceHit:
    """Intersection of the line origin + t*direction with the surface near uv_hint."""
    origin = as_point(origin)
    d = as_point(direction)
    d = d / np.linalg.norm(d)
    uv = np.asarray(uv_hint, dtype=float)
    t = 0.0
    scale = max(1.0, np.linalg.norm(origin))
    for _ in range(max_iter):
        p = origin + t * d
        try:
            uv = closest_point(s, p, uv)
        except NoConvergence as exc:
            raise FootPointFailure(str(exc)) from None
        j = s.jet(uv, 1)
        n = np.cross(j["u"], j["v"])
        n /= np.linalg.norm(n)
        slope = d @ n
        if abs(slope) < 1e-6:
            raise Tangential("line is tangent to the surface (|dir.n| = %.2e)" % abs(slope))
        gval = (p - j["f"]) @ n
        if abs(gval) < 1e-13 * scale:
            return SurfaceHit(p, uv, float(t))
        t -= gval / slope
    raise NoConvergence("line_surface_hit: Newton did not converge")


@dataclass
class SectionCurve:
    hits: list = field(default_factory=list)
    closed: bool = False

    @property
    def points(self) -> np.ndarray:
        return np.array([h.point for h in self.hits])

    @property
    def uvs(self) -> np.ndarray:
        return np.array([h.uv for h in self.hits])

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "x", "y", "z", "u", "v"])
            for h in self.hits:
                w.writerow(["%.17g" % h.parameter] + ["%.17g" % x for x in h.point]
                           + ["%.17g" % x for x in h.uv])


def _correct(s: Surface, plane: Plane3, uv, x, step, tol):
    """Newton for f(uv) on the plane at chord distance ``step`` from x."""
    for _ in range(30):
        j = s.jet(uv, 1)
        d = j["f"] - x
        F = np.array([plane.signed_distance(j["f"]), (d @ d - step * step) / (2 * step)])
        if np.max(np.abs(F)) < tol:
            return uv
        J = np.array([[plane.normal @ j["u"], plane.normal @ j["v"]],
                      [d @ j["u"] / step, d @ j["v"] / step]])
        uv = uv - np.linalg.solve(J, F)
    raise NoConvergence("plane-section corrector failed")


def plane_section(s: Surface, plane: Plane3, seed: SurfaceHit, step: float,
                  max_points=200000) -> SectionCurve:
    """Trace the component of (surface ∩ plane) through ``seed``.

    Every vertex is projected back onto both the plane and the surface; the
    loop closes when the seed is less than one step ahead.  Consecutive
    vertices sit at chord distance ``step`` (the closing gap is shorter).  If the curve runs
    out of the domain both directions are traced and OpenCurveTruncated is
    raised carrying the partial curve.
    """
    tol = 1e-13 * max(1.0, np.linalg.norm(seed.point))

    def tangent(uv, prev):
        j = s.jet(uv, 1)
        n = np.cross(j["u"], j["v"])
        n /= np.linalg.norm(n)
        if abs(n @ plane.normal) > 1 - 1e-8:
            raise TangentialContact("plane is tangent to the surface")
        t = np.cross(n, plane.normal)
        t /= np.linalg.norm(t)
        if prev is not None and t @ prev < 0:
            t = -t
        return t

    uv0 = np.asarray(seed.uv, dtype=float)
    for _ in range(30):
        # minimum-norm Newton steps onto the plane
        j = s.jet(uv0, 1)
        dist = plane.signed_distance(j["f"])
        if abs(dist) <= tol:
            break
        row = np.array([plane.normal @ j["u"], plane.normal @ j["v"]])
        uv0 = uv0 - dist * row / (row @ row)
    else:
        raise NoConvergence("could not move the seed onto the plane")
    start = SurfaceHit(s(uv0), uv0, 0.0)

    def run(sign):
        out = []
        uv = uv0
        x = start.point
        t = sign * tangent(uv, None)
        arc = 0.0
        for _ in range(max_points):
            t = tangent(uv, t)
            if len(out) >= 3:
                ahead = start.point - x
                if np.linalg.norm(ahead) <= step and ahead @ t > 0:
                    return out, True
            target = x + step * t
            j = s.jet(uv, 1)
            J = np.column_stack([j["u"], j["v"]])
            guess = uv + np.linalg.lstsq(J, target - j["f"], rcond=None)[0]
            new = _correct(s, plane, guess, x, step, tol)
            if not s.in_domain(new):
                return out, False
            arc += np.linalg.norm(s(new) - x)
            uv = new
            x = s(uv)
            out.append(SurfaceHit(x, uv, sign * arc))
        return out, False

    fwd, closed = run(1.0)
    if closed:
        return SectionCurve([start] + fwd, True)
    back, _ = run(-1.0)
    curve = SectionCurve(list(reversed(back)) + [start] + fwd, False)
    raise OpenCurveTruncated("plane section left the parameter domain", curve)


def sphere_tangent_at(s: Surface, uv, R: float) -> Sphere3:
    """Sphere of radius R touching the surface at uv with K1 < 1/R < K2 (signed)."""
    fr = principal_frame(s, uv)
    gap = fr.K2 - fr.K1
    if gap <= 1e-12 * (abs(fr.K1) + abs(fr.K2) + 1):
        raise CurvatureSandwichViolated("umbilic point: no sphere separates the curvatures")
    for c in (R, -R):
        k = 1.0 / c
        if k - fr.K1 >= 0.1 * gap and fr.K2 - k >= 0.1 * gap:
            return Sphere3(fr.point + c * fr.normal, float(R))
    raise CurvatureSandwichViolated(
        "1/R = %.4g is not inside (K1, K2) = (%.4g, %.4g) with margin" % (1.0 / R, fr.K1, fr.K2))
