"""Parametric surfaces with derivatives up to order three and curvature queries."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import sympy as sp
from scipy.integrate import solve_ivp
from scipy.linalg import eigh

from .conics import Conic2
from .errors import (
    DegenerateMetric,
    DomainExit,
    NoConvergence,
    NotConjugate,
    PlaneTooFar,
    UmbilicEncountered,
)
from .geom3 import Plane3, unit

ORDERS = {
    0: ("f",),
    1: ("u", "v"),
    2: ("uu", "uv", "vv"),
    3: ("uuu", "uuv", "uvv", "vvv"),
}
TAGS = ("generic", "conjugate", "curvature-line")
FD_WIDEN = (1.0, 10.0, 70.0)


def _fd_from(lower: Callable, name: str, h: float) -> Callable:
    """Central difference of a lower-order partial in the last index letter."""
    def fn(u, v):
        if name[-1] == "u":
            return (lower(u + h, v) - lower(u - h, v)) / (2 * h)
        return (lower(u, v + h) - lower(u, v - h)) / (2 * h)
    return fn


class Surface:
    """A smooth map f(u, v) -> R^3 on a rectangular parameter domain.

    ``partials`` maps names among ``f, u, v, uu, uv, vv, uuu, uuv, uvv, vvv`` to
    vectorized callables returning arrays of shape ``(..., 3)``.  Missing
    entries are filled by central differences of the next lower order with
    step ``1e-5 * scale``.
    """

    def __init__(self, partials: dict, domain, periodic=(False, False), tag="generic",
                 implicit=None, name="surface", scale=1.0):
        if tag not in TAGS:
            raise ValueError("unknown parametrization tag %r" % tag)
        if "f" not in partials:
            raise ValueError("surface needs at least the point map 'f'")
        self.domain = tuple(tuple(float(x) for x in d) for d in domain)
        self.periodic = tuple(bool(p) for p in periodic)
        self.tag = tag
        self.implicit = implicit
        self.name = name
        self.scale = float(scale)
        self.fd_step = 1e-5 * self.scale
        self.analytic = set(partials)
        self._fn = dict(partials)
        depth = {nm: 0 for nm in partials}
        for order in (1, 2, 3):
            for nm in ORDERS[order]:
                if nm in self._fn:
                    continue
                lower = "f" if order == 1 else nm[:-1]
                # nested differences lose digits; widen the step with the nesting depth
                depth[nm] = depth[lower] + 1
                h = self.fd_step * FD_WIDEN[depth[nm] - 1]
                self._fn[nm] = _fd_from(self._fn[lower], nm, h)

    # evaluation -----------------------------------------------------------
    def point(self, u, v):
        return self._fn["f"](u, v)

    def __call__(self, uv):
        uv = np.asarray(uv, dtype=float)
        return self.point(uv[..., 0], uv[..., 1])

    def partial(self, name, u, v):
        return self._fn[name](u, v)

    def jet(self, uv, order=2) -> dict:
        uv = np.asarray(uv, dtype=float)
        u, v = uv[..., 0], uv[..., 1]
        out = {}
        for k in range(order + 1):
            for nm in ORDERS[k]:
                out[nm] = self._fn[nm](u, v)
        return out

    def normal(self, uv):
        j = self.jet(uv, 1)
        n = np.cross(j["u"], j["v"])
        return n / np.linalg.norm(n, axis=-1, keepdims=True)

    # domain ---------------------------------------------------------------
    def in_domain(self, uv, margin=0.0) -> bool:
        for k in range(2):
            if self.periodic[k]:
                continue
            lo, hi = self.domain[k]
            if not (lo + margin <= uv[k] <= hi - margin):
                return False
        return True

    def extent(self) -> float:
        return max(d[1] - d[0] for d in self.domain)

    # transformations ------------------------------------------------------
    def inverted(self, center) -> "Surface":
        """Image under inversion in the unit sphere around ``center``."""
        center = np.asarray(center, dtype=float)
        base = self
        tag = "curvature-line" if self.tag == "curvature-line" else "generic"
        if hasattr(self, "symbolic"):
            exprs, u, v = self.symbolic
            c = [sp.Float(float(x)) for x in center]
            d = [e - ci for e, ci in zip(exprs, c)]
            r2 = sum(di**2 for di in d)
            return sympy_surface([ci + di / r2 for ci, di in zip(c, d)], u, v, self.domain,
                                 self.periodic, tag, name=self.name + "@inv", scale=self.scale)

        def g(u, v):
            d = base.point(u, v) - center
            return center + d / np.sum(d * d, axis=-1, keepdims=True)

        return Surface({"f": g}, self.domain, self.periodic, tag, name=self.name + "@inv",
                       scale=self.scale)

    def __repr__(self):
        return "Surface(%s, tag=%s)" % (self.name, self.tag)


def _broadcast_stack(vals, shape):
    return np.stack([np.broadcast_to(np.asarray(c, dtype=float), shape) for c in vals], axis=-1)


def sympy_surface(exprs, u, v, domain, periodic=(False, False), tag="generic",
                  implicit=None, name="surface", scale=1.0) -> Surface:
    """Build a Surface whose partials (orders 0..3) are differentiated symbolically."""
    exprs = [sp.sympify(e) for e in exprs]
    partials = {}
    for order in range(4):
        for nm in ORDERS[order]:
            es = exprs
            if nm != "f":
                for ch in nm:
                    es = [sp.diff(e, u if ch == "u" else v) for e in es]
            raw = sp.lambdify((u, v), es, modules="numpy", cse=True)

            def fn(uu, vv, _raw=raw):
                if np.ndim(uu) == 0 and np.ndim(vv) == 0:
                    return np.array(_raw(float(uu), float(vv)), dtype=float)
                uu = np.asarray(uu, dtype=float)
                vv = np.asarray(vv, dtype=float)
                shape = np.broadcast_shapes(uu.shape, vv.shape)
                return _broadcast_stack(_raw(uu, vv), shape)

            partials[nm] = fn
    if implicit is not None:
        x, y, z = sp.symbols("x y z")
        F = sp.sympify(implicit)
        Ff = sp.lambdify((x, y, z), F, "numpy")
        Fg = sp.lambdify((x, y, z), [sp.diff(F, s) for s in (x, y, z)], "numpy")
        implicit = Implicit(lambda p: Ff(p[..., 0], p[..., 1], p[..., 2]),
                            lambda p: _broadcast_stack(Fg(p[..., 0], p[..., 1], p[..., 2]),
                                                       np.shape(p)[:-1]))
    s = Surface(partials, domain, periodic, tag, implicit, name, scale)
    s.symbolic = (exprs, u, v)
    return s


@dataclass(frozen=True)
class Implicit:
    value: Callable
    gradient: Callable


# fundamental forms ---------------------------------------------------------

def fundamental_forms(s: Surface, uv):
    j = s.jet(uv, 2)
    fu, fv = j["u"], j["v"]
    n = np.cross(fu, fv)
    nn = np.linalg.norm(n)
    if nn <= 1e-10:
        raise DegenerateMetric("f_u x f_v vanishes at uv=%r" % (tuple(uv),))
    n = n / nn
    I = np.array([[fu @ fu, fu @ fv], [fu @ fv, fv @ fv]])
    II = np.array([[j["uu"] @ n, j["uv"] @ n], [j["uv"] @ n, j["vv"] @ n]])
    return I, II, n, j


@dataclass(frozen=True)
class PrincipalFrame:
    point: np.ndarray
    normal: np.ndarray
    K1: float
    K2: float
    dir1: np.ndarray
    dir2: np.ndarray
    uv: tuple = field(default=(0.0, 0.0))

    def to_local(self, p) -> np.ndarray:
        """Coordinates (x, y, z) of p in the frame (dir1, dir2, normal)."""
        d = np.asarray(p, dtype=float) - self.point
        return np.stack([d @ self.dir1, d @ self.dir2, d @ self.normal], axis=-1)

    def from_local(self, x, y, z=0.0) -> np.ndarray:
        return (self.point + np.multiply.outer(x, self.dir1) + np.multiply.outer(y, self.dir2)
                + np.multiply.outer(z, self.normal))


def principal_frame(s: Surface, uv) -> PrincipalFrame:
    """Principal curvatures K1 <= K2 and directions, normal = f_u x f_v normalized."""
    uv = np.asarray(uv, dtype=float)
    I, II, n, j = fundamental_forms(s, uv)
    w, X = eigh(II, I)
    dirs = []
    for k in range(2):
        d = X[0, k] * j["u"] + X[1, k] * j["v"]
        dirs.append(d / np.linalg.norm(d))
    d1 = dirs[0]
    d1 = d1 - (d1 @ n) * n
    d1 = d1 / np.linalg.norm(d1)
    d2 = np.cross(n, d1)
    if d2 @ dirs[1] < 0:
        d2 = -d2
    return PrincipalFrame(j["f"], n, float(w[0]), float(w[1]), d1, d2, tuple(uv))


def is_umbilic(s: Surface, uv, tol=1e-4) -> bool:
    fr = principal_frame(s, uv)
    return abs(fr.K2 - fr.K1) < tol * (abs(fr.K1) + abs(fr.K2) + 1)


def conjugate_coeffs(s: Surface, uv, tol=1e-6):
    """(a, b) with f_uv = a f_u + b f_v."""
    j = s.jet(uv, 2)
    fu, fv, fuv = j["u"], j["v"], j["uv"]
    n = unit(np.cross(fu, fv))
    size = np.linalg.norm(fuv)
    if abs(fuv @ n) > tol * max(size, 1e-300):
        raise NotConjugate("f_uv has a normal component %.3e" % (fuv @ n))
    G = np.array([[fu @ fu, fu @ fv], [fu @ fv, fv @ fv]])
    a, b = np.linalg.solve(G, [fuv @ fu, fuv @ fv])
    return float(a), float(b)


def dupin_indicatrix(s: Surface, uv, plane: Plane3, max_height=None) -> Conic2:
    """Section of the osculating paraboloid by ``plane``, in principal-frame coordinates.

    Returns the conic (K1 x^2 + K2 y^2)/2 - h(x, y) = 0, h being the height of
    the plane above the tangent plane.  Check ``is_parabolic()`` on the result
    near parabolic points.
    """
    fr = principal_frame(s, uv)
    nz = plane.normal @ fr.normal
    if abs(nz) <= 1e-12:
        raise PlaneTooFar("plane is orthogonal to the tangent plane")
    h0 = (plane.offset - plane.normal @ fr.point) / nz
    hx = -(plane.normal @ fr.dir1) / nz
    hy = -(plane.normal @ fr.dir2) / nz
    if max_height is not None and abs(h0) > max_height:
        raise PlaneTooFar("plane height %.3e exceeds %.3e" % (abs(h0), max_height))
    return Conic2.from_coeffs(fr.K1 / 2, 0.0, fr.K2 / 2, -hx, -hy, -h0)


# curvature lines -------------------------------------------------------------

def principal_uv_direction(s: Surface, uv, which: int, ref=None):
    """Unit (3D) principal direction `which` at uv and its (du, dv) coefficients."""
    I, II, n, j = fundamental_forms(s, uv)
    w, X = eigh(II, I)
    x = X[:, which - 1]
    d = x[0] * j["u"] + x[1] * j["v"]
    scale = np.linalg.norm(d)
    x = x / scale
    d = d / scale
    if ref is not None and d @ ref < 0:
        x, d = -x, -d
    return x, d, w


def trace_curvature_line(s: Surface, uv0, which: int, arclength: float,
                         umbilic_tol=1e-4, rtol=1e-11, atol=1e-12, start_dir=None):
    """Follow principal direction field `which` (1 or 2) for a signed arclength.

    The initial orientation follows ``start_dir`` (a 3D vector) if given,
    otherwise the positive f_u (which=1 along u) sense of the eigenvector.
    """
    if which not in (1, 2):
        raise ValueError("which must be 1 or 2")
    uv0 = np.asarray(uv0, dtype=float)
    if arclength == 0:
        return uv0.copy()
    _, d0, w = principal_uv_direction(s, uv0, which)
    if start_dir is None:
        j = s.jet(uv0, 1)
        ref = j["u"] + 1e-3 * j["v"]
        if abs(d0 @ ref) < 1e-9 * np.linalg.norm(ref):
            ref = j["v"]
        start_dir = ref
    if d0 @ start_dir < 0:
        d0 = -d0
    if abs(w[1] - w[0]) < umbilic_tol * (abs(w[0]) + abs(w[1]) + 1):
        raise UmbilicEncountered("start point is umbilic")
    sign = 1.0 if arclength > 0 else -1.0
    x0, _, _ = principal_uv_direction(s, uv0, which, ref=d0)
    state = {"ref": x0}

    def rhs(t, y):
        if not s.in_domain(y):
            raise DomainExit("curvature line left the domain at uv=%r" % (tuple(y),))
        # follow the eigenvector closest to the previous one (compared in the
        # metric of the current point), not the eigenvalue index
        I, II, n, j = fundamental_forms(s, y)
        w, X = eigh(II, I)
        if abs(w[1] - w[0]) < umbilic_tol * (abs(w[0]) + abs(w[1]) + 1):
            raise UmbilicEncountered("umbilic reached at uv=%r" % (tuple(y),))
        best = None
        for k in range(2):
            x = X[:, k] / np.sqrt(X[:, k] @ I @ X[:, k])
            c = x @ I @ state["ref"] / np.sqrt(state["ref"] @ I @ state["ref"])
            if best is None or abs(c) > abs(best[0]):
                best = (c, x, k)
        c, x, k = best
        if k != which - 1:
            # the followed field switched eigenvalue order: the principal
            # curvatures crossed, so the path ran through an umbilic
            raise UmbilicEncountered("curvature line passes an umbilic near uv=%r" % (tuple(y),))
        if c < 0:
            x = -x
        state["ref"] = x
        return sign * x

    sol = solve_ivp(rhs, (0.0, abs(arclength)), uv0, method="RK45", rtol=rtol, atol=atol,
                    max_step=0.1 * s.scale)
    if not sol.success:
        raise NoConvergence("curvature-line integration failed: %s" % sol.message)
    return sol.y[:, -1]


# foot points ----------------------------------------------------------------

def closest_point(s: Surface, p, uv_guess, max_iter=50):
    """Foot point of p on the surface by damped Newton with backtracking."""
    p = np.asarray(p, dtype=float)
    uv = np.asarray(uv_guess, dtype=float).copy()

    def dist2(x):
        r = s(x) - p
        return float(r @ r)

    for _ in range(max_iter):
        j = s.jet(uv, 2)
        r = j["f"] - p
        dr = np.linalg.norm(r)
        fu, fv = j["u"], j["v"]
        g = np.array([r @ fu, r @ fv])
        size = max(np.linalg.norm(fu), np.linalg.norm(fv))
        # relative angle test with an absolute floor for points on the surface
        if np.linalg.norm(g) <= (1e-10 * dr + 1e-15 * s.scale) * size:
            return uv
        H = np.array([[fu @ fu + r @ j["uu"], fu @ fv + r @ j["uv"]],
                      [fu @ fv + r @ j["uv"], fv @ fv + r @ j["vv"]]])
        try:
            step = -np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            step = -g / (fu @ fu + fv @ fv)
        if g @ step >= 0:
            # Hessian not positive: fall back to Gauss-Newton
            Gm = H - np.array([[r @ j["uu"], r @ j["uv"]], [r @ j["uv"], r @ j["vv"]]])
            step = -np.linalg.solve(Gm, g)
        f0 = dr * dr
        t = 1.0
        while t > 1e-8:
            cand = uv + t * step
            if dist2(cand) <= f0 + 1e-4 * t * (g @ step) * 2 or t * np.linalg.norm(step) < 1e-15:
                break
            t *= 0.5
        new = uv + t * step
        if np.linalg.norm(new - uv) <= 1e-14 * max(1.0, np.linalg.norm(uv)):
            return new
        uv = new
    raise NoConvergence("closest_point did not converge within %d iterations" % max_iter)


def closest_points(s: Surface, P, UV, iters=8):
    """Vectorized undamped Newton for many foot points at once.

    Returns (uv, converged_mask); callers retry failures with closest_point.
    """
    P = np.asarray(P, dtype=float)
    UV = np.array(UV, dtype=float)
    for _ in range(iters):
        j = s.jet(UV, 2)
        r = j["f"] - P
        fu, fv = j["u"], j["v"]
        g0 = np.einsum("...i,...i", r, fu)
        g1 = np.einsum("...i,...i", r, fv)
        h00 = np.einsum("...i,...i", fu, fu) + np.einsum("...i,...i", r, j["uu"])
        h01 = np.einsum("...i,...i", fu, fv) + np.einsum("...i,...i", r, j["uv"])
        h11 = np.einsum("...i,...i", fv, fv) + np.einsum("...i,...i", r, j["vv"])
        det = h00 * h11 - h01 * h01
        with np.errstate(divide="ignore", invalid="ignore"):
            du = -(h11 * g0 - h01 * g1) / det
            dv = -(-h01 * g0 + h00 * g1) / det
        UV[..., 0] += du
        UV[..., 1] += dv
    j = s.jet(UV, 1)
    r = j["f"] - P
    dr = np.linalg.norm(r, axis=-1)
    g = np.stack([np.einsum("...i,...i", r, j["u"]), np.einsum("...i,...i", r, j["v"])], -1)
    size = np.maximum(np.linalg.norm(j["u"], axis=-1), np.linalg.norm(j["v"], axis=-1))
    ok = np.isfinite(UV).all(-1) & (np.linalg.norm(g, axis=-1) <= (1e-10 * dr + 1e-15 * s.scale) * size)
    return UV, ok
