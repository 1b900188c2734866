"""Circle-based principal-direction estimators, quad defects and fourth-point solvers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .conics import diagonal_bisectors
from .errors import (
    CollinearBase,
    DegenerateDiagonal,
    DegeneratePoints,
    DiagonalDegenerate,
    FourPointsNotFound,
    FourthPointMissing,
    NoConvergence,
    ParabolicPoint,
    ParallelPlanes,
    TangentialContact,
    UmbilicRegion,
)
from .geom3 import Circle3, Plane3, circle_through, line_angle, quat_cross_ratio, triple_product, unit
from .intersect import SurfaceHit, circle_surface_hits, line_surface_hit, sphere_tangent_at
from .surface import PrincipalFrame, Surface, conjugate_coeffs, is_umbilic, principal_frame


def _xyz(p) -> np.ndarray:
    return np.asarray(p.point if isinstance(p, SurfaceHit) else p, dtype=float)


def match_errors(p1, p2, frame: PrincipalFrame):
    """Angle errors of two estimated line directions against the principal lines.

    Directions are unoriented and interchangeable, so both assignments are
    tried and the one with the smaller worst error is kept.
    """
    a = (line_angle(p1, frame.dir1), line_angle(p2, frame.dir2))
    b = (line_angle(p1, frame.dir2), line_angle(p2, frame.dir1))
    if max(a) <= max(b):
        return a[0], a[1], False
    return b[1], b[0], True


@dataclass(frozen=True)
class PrincipalEstimate:
    base_point: np.ndarray
    base_uv: np.ndarray
    dir1: np.ndarray
    dir2: np.ndarray
    frame: PrincipalFrame
    angle_err_1: float
    angle_err_2: float
    eps_eff: float
    hits: tuple = ()

    @property
    def max_error(self) -> float:
        return max(self.angle_err_1, self.angle_err_2)

    def to_record(self) -> dict:
        return {
            "base_uv": [float(x) for x in self.base_uv],
            "dir1": [float(x) for x in self.dir1],
            "dir2": [float(x) for x in self.dir2],
            "angle_err_1": float(self.angle_err_1),
            "angle_err_2": float(self.angle_err_2),
            "eps_eff": float(self.eps_eff),
        }


@dataclass(frozen=True)
class QuadDefects:
    planarity_volume: float = float("nan")
    planarity_height: float = float("nan")
    circularity: float = float("nan")
    eps_eff: float = float("nan")

    def to_record(self) -> dict:
        return {"planarity_height": self.planarity_height, "circularity": self.circularity,
                "eps_eff": self.eps_eff}


def eps_eff(A, B, C) -> float:
    a, b, c = _xyz(A), _xyz(B), _xyz(C)
    return float(max(np.linalg.norm(a - b), np.linalg.norm(b - c), np.linalg.norm(a - c)))


# placement helpers ---------------------------------------------------------

def lift_to_surface(s: Surface, frame: PrincipalFrame, x, y) -> SurfaceHit:
    """Surface point above frame-tangent coordinates (x, y), along the normal."""
    p = frame.from_local(x, y)
    j = s.jet(frame.uv, 1)
    J = np.column_stack([j["u"], j["v"]])
    guess = np.asarray(frame.uv) + np.linalg.lstsq(J, p - frame.point, rcond=None)[0]
    return line_surface_hit(p, frame.normal, s, guess)


def triple_around(s: Surface, uv, eps, angles=(0.3, 1.9, 3.4)):
    """Three surface points at tangent distance eps around uv, at the given
    polar angles measured from the first principal direction."""
    fr = principal_frame(s, uv)
    return tuple(lift_to_surface(s, fr, eps * np.cos(a), eps * np.sin(a)) for a in angles)


def grid_quad(s: Surface, uv, eps):
    """A = f(u,v), B = f(u+eps,v), C = f(u,v+eps), D = f(u+eps,v+eps)."""
    u, v = float(uv[0]), float(uv[1])
    return tuple(SurfaceHit.at(s, (u + du, v + dv)) for du, dv in ((0, 0), (eps, 0), (0, eps), (eps, eps)))


# principal directions --------------------------------------------------------

def _angle_at(B, A, C) -> float:
    return line_angle(A - B, C - B) if (A - B) @ (C - B) >= 0 else np.pi - line_angle(A - B, C - B)


def euclidean_principal(s: Surface, A: SurfaceHit, B: SurfaceHit, C: SurfaceHit,
                        umbilic_tol=1e-4, n_samples=256) -> PrincipalEstimate:
    """Principal directions from the circle through three nearby surface points.

    The circle (ABC) meets the surface in a fourth point D; the four points are
    put in cyclic order, the diagonals meet at Z, the normal line of the circle
    plane through Z meets the surface at Z_f, and the diagonal bisectors are
    projected along that line onto the tangent plane at Z_f.
    """
    a, b, c = _xyz(A), _xyz(B), _xyz(C)
    ang = _angle_at(b, a, c)
    if ang < np.pi / 6:
        raise DegeneratePoints("angle ABC = %.3g is below pi/6" % ang)
    if is_umbilic(s, B.uv, umbilic_tol):
        raise UmbilicRegion("base point is (nearly) umbilic")
    omega = circle_through(a, b, c)
    basis = omega.basis(start=a)
    hits = circle_surface_hits(omega, s, B.uv, n_samples, basis=basis)
    tb = omega.angle_of(b, basis)
    tc = omega.angle_of(c, basis)
    sep = 1e-6 * omega.radius
    others = [h for h in hits
              if min(np.linalg.norm(h.point - p) for p in (a, b, c)) > sep]
    if not others:
        raise FourthPointMissing("circle (ABC) has no fourth surface point")
    # the fourth point should close the cyclic order A, B, C, D (A sits at angle 0)
    if tb < tc:
        cand = [h for h in others if h.parameter > tc]
        mid = 0.5 * (tc + 2 * np.pi)
    else:
        cand = [h for h in others if h.parameter < tc]
        mid = 0.5 * tc
    cand = cand or others
    D = min(cand, key=lambda h: abs(np.angle(np.exp(1j * (h.parameter - mid)))))
    d = D.point
    pts = [(0.0, a), (tb, b), (tc, c), (D.parameter, d)]
    pts.sort(key=lambda t: t[0])
    e1, e2 = basis
    q = [np.array([(p - omega.center) @ e1, (p - omega.center) @ e2]) for _, p in pts]
    try:
        bis = diagonal_bisectors(q[0], q[1], q[2], q[3])
    except DegenerateDiagonal as exc:
        raise DiagonalDegenerate(str(exc)) from None
    if bis.parallel:
        raise DiagonalDegenerate("diagonals are parallel")
    Z = omega.center + bis.vertex[0] * e1 + bis.vertex[1] * e2
    Zf = line_surface_hit(Z, omega.normal, s, B.uv)
    fr = principal_frame(s, Zf.uv)
    ns, npi = fr.normal, omega.normal
    out = []
    for bb in (bis.b1, bis.b2):
        b3 = bb[0] * e1 + bb[1] * e2
        p = b3 - (b3 @ ns) / (npi @ ns) * npi
        out.append(unit(p))
    err1, err2, swapped = match_errors(out[0], out[1], fr)
    p1, p2 = (out[1], out[0]) if swapped else (out[0], out[1])
    return PrincipalEstimate(Zf.point, np.asarray(Zf.uv), p1, p2, fr, err1, err2,
                             eps_eff(a, b, c), (A, B, C, D))


def moebius_circle(s: Surface, uv_P, R: float, eps: float):
    """Tangent sphere S at P and the circle on S at geodesic radius eps around P."""
    S = sphere_tangent_at(s, uv_P, R)
    P = s(np.asarray(uv_P, dtype=float))
    if eps / R >= np.pi / 2:
        raise ValueError("eps must be smaller than pi R / 2")
    nh = unit(S.center - P)
    depth = R * (1 - np.cos(eps / R))
    return S, Circle3(P + depth * nh, R * np.sin(eps / R), nh)


def moebius_principal(s: Surface, uv_P, R: float, eps: float, n_samples=256) -> PrincipalEstimate:
    """Moebius-invariant estimate: circles (APC) and (BPD) through the base point."""
    uv_P = np.asarray(uv_P, dtype=float)
    S, omega = moebius_circle(s, uv_P, R, eps)
    P = s(uv_P)
    hits = circle_surface_hits(omega, s, uv_P, n_samples)
    transversal = [h for h in hits if h.multiplicity == 1]
    if len(hits) != 4 or len(transversal) != 4:
        raise FourPointsNotFound("circle meets the surface in %d points, need 4" % len(hits))
    A, B, C, D = (h.point for h in hits)
    t1 = circle_through(A, P, C).tangent_through(P)
    t2 = circle_through(B, P, D).tangent_through(P)
    if t1 @ t2 < 0:
        t2 = -t2
    fr = principal_frame(s, uv_P)
    n = fr.normal
    out = []
    for b in (t1 + t2, t1 - t2):
        b = b - (b @ n) * n
        out.append(unit(b))
    err1, err2, swapped = match_errors(out[0], out[1], fr)
    p1, p2 = (out[1], out[0]) if swapped else (out[0], out[1])
    return PrincipalEstimate(P, uv_P, p1, p2, fr, err1, err2, 2 * omega.radius, tuple(hits))


# quad defects ------------------------------------------------------------------

def planarity_defect(A, B, C, D) -> QuadDefects:
    a, b, c, d = (_xyz(p) for p in (A, B, C, D))
    ab, ac, ad = b - a, c - a, d - a
    base = np.linalg.norm(np.cross(ab, ac))
    scale = max(np.linalg.norm(ab), np.linalg.norm(ac), np.linalg.norm(c - b))
    if base <= 1e-12 * scale**2 or scale == 0:
        raise CollinearBase("A, B, C are collinear")
    vol = triple_product(ab, ac, ad)
    return QuadDefects(planarity_volume=vol, planarity_height=abs(vol) / base,
                       eps_eff=eps_eff(a, b, c))


def circularity_defect(A, B, C, D) -> QuadDefects:
    a, b, c, d = (_xyz(p) for p in (A, B, C, D))
    Q = quat_cross_ratio(a, b, c, d)
    return QuadDefects(circularity=float(np.linalg.norm(Q.imag) / Q.norm()), eps_eff=eps_eff(a, b, c))


def quad_defects(A, B, C, D) -> QuadDefects:
    p = planarity_defect(A, B, C, D)
    q = circularity_defect(A, B, C, D)
    return QuadDefects(p.planarity_volume, p.planarity_height, q.circularity, p.eps_eff)


def ee6_coefficient(s: Surface, uv, h=None) -> float:
    """Leading coefficient c with 12 * det[AB, AC, AD] = c eps^6 + o(eps^6) for the
    grid quad A=f(u,v), B=f(u+eps,v), C=f(u,v+eps), D=f(u+eps,v+eps) of a
    conjugate parametrization:

        c = (a_u - ab) (f_uu x f_u).f_v + (b_v - ab) (f_vv x f_u).f_v

    with f_uv = a f_u + b f_v; a_u and b_v are central differences.
    """
    uv = np.asarray(uv, dtype=float)
    h = 1e-5 * s.scale if h is None else h
    a, b = conjugate_coeffs(s, uv)
    a_u = (conjugate_coeffs(s, uv + [h, 0])[0] - conjugate_coeffs(s, uv - [h, 0])[0]) / (2 * h)
    b_v = (conjugate_coeffs(s, uv + [0, h])[1] - conjugate_coeffs(s, uv - [0, h])[1]) / (2 * h)
    j = s.jet(uv, 2)
    T1 = triple_product(j["uu"], j["u"], j["v"])
    T2 = triple_product(j["vv"], j["u"], j["v"])
    return float((a_u - a * b) * T1 + (b_v - a * b) * T2)


# fourth points -------------------------------------------------------------------

def planar_fourth_point(s: Surface, A, B, C, D_guess: SurfaceHit, max_iter=50) -> SurfaceHit:
    """Point of plane(ABC) ∩ surface nearest to D_guess."""
    plane = Plane3.from_points(_xyz(A), _xyz(B), _xyz(C))
    e = eps_eff(A, B, C)
    tol = 1e-13 * max(e, 1e-300)
    D = _xyz(D_guess)
    uv = np.asarray(D_guess.uv, dtype=float)
    if abs(plane.signed_distance(D)) <= tol:
        return D_guess
    for _ in range(max_iter):
        j = s.jet(uv, 1)
        n = np.cross(j["u"], j["v"])
        n /= np.linalg.norm(n)
        sin_angle = np.linalg.norm(np.cross(n, plane.normal))
        if sin_angle < 1e-3 * e:
            raise TangentialContact("plane (ABC) is nearly tangent to the surface")
        T = np.cross(n, plane.normal) / sin_angle
        F = np.array([plane.signed_distance(j["f"]), (j["f"] - D) @ T])
        J = np.array([[plane.normal @ j["u"], plane.normal @ j["v"]],
                      [T @ j["u"], T @ j["v"]]])
        step = np.linalg.solve(J, F)
        uv = uv - step
        if abs(F[0]) <= tol and np.linalg.norm(step) <= 1e-15 * max(1.0, np.linalg.norm(uv)) * 10:
            break
        if abs(F[0]) <= tol and abs(F[1]) <= 1e-12 * e**3 + 1e-16:
            break
    else:
        raise NoConvergence("planar_fourth_point did not converge")
    return SurfaceHit.at(s, uv)


def circular_fourth_point(s: Surface, A, B, C, D_guess: SurfaceHit, umbilic_tol=1e-4,
                          n_samples=256) -> SurfaceHit:
    """Fourth intersection of the circle (ABC) with the surface, nearest D_guess in uv."""
    if is_umbilic(s, D_guess.uv, umbilic_tol):
        raise UmbilicRegion("quad lies at an umbilic")
    a, b, c = _xyz(A), _xyz(B), _xyz(C)
    omega = circle_through(a, b, c)
    hits = circle_surface_hits(omega, s, D_guess.uv, n_samples)
    sep = 1e-6 * omega.radius
    others = [h for h in hits if min(np.linalg.norm(h.point - p) for p in (a, b, c)) > sep]
    if not others:
        raise FourthPointMissing("circle (ABC) has no fourth surface point")
    g = np.asarray(D_guess.uv, dtype=float)
    return min(others, key=lambda h: np.linalg.norm(np.asarray(h.uv) - g))


def parabolic_measures(s: Surface, uv):
    """Relative sizes of (f_uu x f_u).f_v and (f_vv x f_u).f_v."""
    j = s.jet(uv, 2)
    fu, fv = j["u"], j["v"]
    base = np.linalg.norm(np.cross(fu, fv))
    t1 = triple_product(j["uu"], fu, fv) / (base * max(np.linalg.norm(j["uu"]), 1e-300))
    t2 = triple_product(j["vv"], fu, fv) / (base * max(np.linalg.norm(j["vv"]), 1e-300))
    t1 = 0.0 if np.linalg.norm(j["uu"]) == 0 else t1
    t2 = 0.0 if np.linalg.norm(j["vv"]) == 0 else t2
    return float(t1), float(t2)


def double_planar_point(s: Surface, A, B, C, E, F, D_guess: SurfaceHit, tol=1e-6) -> SurfaceHit:
    """The point M making both quads ABMC and BMFE planar.

    M lies on the line where plane(ABC) meets plane(BEF); that line passes
    through B and its other surface hit near D_guess is returned.
    """
    for uv in (B.uv, D_guess.uv):
        t1, t2 = parabolic_measures(s, uv)
        if abs(t1) < tol or abs(t2) < tol:
            raise ParabolicPoint("second fundamental form degenerates near uv=(%.6g, %.6g)" % tuple(uv))
    p1 = Plane3.from_points(_xyz(A), _xyz(B), _xyz(C))
    p2 = Plane3.from_points(_xyz(B), _xyz(E), _xyz(F))
    d = np.cross(p1.normal, p2.normal)
    if np.linalg.norm(d) < 1e-12:
        raise ParallelPlanes("planes (ABC) and (BEF) are parallel")
    d /= np.linalg.norm(d)
    b = _xyz(B)
    g = _xyz(D_guess)
    origin = b + ((g - b) @ d) * d
    hit = line_surface_hit(origin, d, s, D_guess.uv)
    if np.linalg.norm(hit.point - b) <= 1e-6 * np.linalg.norm(g - b):
        raise NoConvergence("line hit collapsed onto B")
    return SurfaceHit(hit.point, hit.uv, hit.parameter)
