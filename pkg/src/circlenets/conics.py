"""Plane conics as symmetric 3x3 forms, their pencils, axes and diagonal bisectors.

A conic is the zero set of ``[x y 1] M [x y 1]^T``.  Lines are homogeneous
triples ``(a, b, c)`` meaning ``a x + b y + c = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import (
    CircularConic,
    DegenerateDiagonal,
    NotACircle,
    ProportionalConics,
)

TINY = 1e-14


@dataclass(frozen=True)
class Conic2:
    M: np.ndarray

    def __post_init__(self):
        M = np.asarray(self.M, dtype=float)
        if M.shape != (3, 3):
            raise ValueError("conic matrix must be 3x3")
        M = 0.5 * (M + M.T)
        if np.linalg.norm(M) <= TINY:
            raise ValueError("conic matrix is identically zero")
        object.__setattr__(self, "M", M)

    @classmethod
    def from_coeffs(cls, a, b, c, d, e, f) -> "Conic2":
        """a x^2 + b xy + c y^2 + d x + e y + f = 0"""
        return cls(np.array([[a, b / 2, d / 2], [b / 2, c, e / 2], [d / 2, e / 2, f]]))

    @classmethod
    def circle(cls, cx, cy, r) -> "Conic2":
        return cls.from_coeffs(1.0, 0.0, 1.0, -2 * cx, -2 * cy, cx * cx + cy * cy - r * r)

    @property
    def block(self) -> np.ndarray:
        return self.M[:2, :2]

    def __call__(self, x, y):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        M = self.M
        return (M[0, 0] * x * x + 2 * M[0, 1] * x * y + M[1, 1] * y * y
                + 2 * M[0, 2] * x + 2 * M[1, 2] * y + M[2, 2])

    def gradient(self, x, y) -> np.ndarray:
        M = self.M
        return 2 * np.array([M[0, 0] * x + M[0, 1] * y + M[0, 2],
                             M[0, 1] * x + M[1, 1] * y + M[1, 2]])

    def scale(self) -> float:
        return float(np.linalg.norm(self.M))

    def is_parabolic(self, tol=1e-10) -> bool:
        ev = np.linalg.eigvalsh(self.block)
        return abs(ev[0] * ev[1]) <= tol * max(ev[0] ** 2, ev[1] ** 2, TINY)

    def center(self) -> np.ndarray:
        """Center of a central conic (solves block @ c = -linear part)."""
        if self.is_parabolic():
            raise ValueError("parabolic conic has no finite center")
        return np.linalg.solve(self.block, -self.M[:2, 2])

    def is_circle(self, tol=1e-10) -> bool:
        B = self.block
        s = max(abs(B[0, 0]), abs(B[1, 1]))
        if s <= TINY:
            return False
        return abs(B[0, 0] - B[1, 1]) <= tol * s and abs(B[0, 1]) <= tol * s

    def circle_params(self):
        """(center, radius) of a genuine circle."""
        if not self.is_circle():
            raise NotACircle("leading block is not proportional to the identity")
        k = 0.5 * (self.M[0, 0] + self.M[1, 1])
        c = -self.M[:2, 2] / k
        r2 = c @ c - self.M[2, 2] / k
        if r2 <= 0:
            raise NotACircle("circle has no real points")
        return c, float(np.sqrt(r2))

    def transformed(self, R, t) -> "Conic2":
        """Image of the conic under x -> R x + t."""
        H = np.eye(3)
        H[:2, :2] = R
        H[:2, 2] = t
        Hi = np.linalg.inv(H)
        return Conic2(Hi.T @ self.M @ Hi)


@dataclass(frozen=True)
class LinePair2:
    l1: np.ndarray
    l2: np.ndarray
    vertex: np.ndarray  # homogeneous; last coordinate 0 means parallel lines

    def as_matrix(self) -> np.ndarray:
        return 0.5 * (np.outer(self.l1, self.l2) + np.outer(self.l2, self.l1))

    @property
    def at_infinity(self) -> bool:
        v = self.vertex
        return abs(v[2]) <= 1e-12 * np.linalg.norm(v[:2])

    def vertex_point(self) -> np.ndarray:
        if self.at_infinity:
            raise ValueError("line pair is parallel; vertex at infinity")
        return self.vertex[:2] / self.vertex[2]

    def contains(self, p, tol=1e-8) -> bool:
        h = np.array([p[0], p[1], 1.0])
        # the line at infinity contains no finite point
        d = [abs(l @ h) / np.linalg.norm(l[:2]) for l in (self.l1, self.l2)
             if np.linalg.norm(l[:2]) > 1e-12 * np.linalg.norm(l)]
        return bool(d) and min(d) <= tol


@dataclass(frozen=True)
class PencilMember:
    lam: complex
    pair: LinePair2 | None
    complex_root: bool = False
    complex_lines: bool = False

    @property
    def is_real(self) -> bool:
        return self.pair is not None


def _adjugate(A: np.ndarray) -> np.ndarray:
    C = np.empty((3, 3))
    for i in range(3):
        for j in range(3):
            minor = np.delete(np.delete(A, i, 0), j, 1)
            C[j, i] = (-1) ** (i + j) * (minor[0, 0] * minor[1, 1] - minor[0, 1] * minor[1, 0])
    return C


def pencil_polynomial(Q: Conic2, W: Conic2) -> np.ndarray:
    """Coefficients (highest first) of det(M_Q + lam M_W) as a cubic in lam."""
    A, B = Q.M, W.M
    return np.array([
        np.linalg.det(B),
        np.trace(_adjugate(B) @ A),
        np.trace(_adjugate(A) @ B),
        np.linalg.det(A),
    ])


def factor_line_pair(M: np.ndarray, tol=1e-9):
    """Split a rank <= 2 symmetric form into two real lines.

    Returns a LinePair2, or None when the restricted form is definite
    (the lines are complex conjugate).
    """
    w, V = np.linalg.eigh(M)
    order = np.argsort(np.abs(w))
    w = w[order]
    V = V[:, order]
    vertex = V[:, 0]
    big = np.abs(w[2])
    if big <= TINY:
        raise ValueError("zero form")
    if abs(w[1]) <= tol * big:
        # rank one: a double line
        l = np.sqrt(abs(w[2])) * V[:, 2] * np.sign(w[2])
        m = np.sqrt(abs(w[2])) * V[:, 2]
        return LinePair2(l, m, np.cross(V[:, 2], V[:, 1]))
    if np.sign(w[1]) == np.sign(w[2]):
        return None
    pos, neg = (1, 2) if w[1] > 0 else (2, 1)
    a = np.sqrt(w[pos]) * V[:, pos]
    b = np.sqrt(-w[neg]) * V[:, neg]
    return LinePair2(a + b, a - b, vertex)


def pencil_degenerate_members(Q: Conic2, W: Conic2) -> list[PencilMember]:
    """Degenerate members M_Q + lam M_W of the pencil spanned by Q and W.

    Roots of the determinant cubic come from the companion matrix and get one
    Newton polish each.  Real roots are factored into line pairs; complex roots
    are returned flagged with ``pair=None``.  If det(M_W) vanishes, W itself is
    reported as the member at lam = inf.
    """
    qa = Q.M / np.linalg.norm(Q.M)
    wa = W.M / np.linalg.norm(W.M)
    c = float(np.sum(qa * wa))
    if np.linalg.norm(qa - c * wa) <= 1e-10:
        raise ProportionalConics("conics are proportional")

    coeffs = pencil_polynomial(Q, W)
    scale = np.linalg.norm(Q.M) + np.linalg.norm(W.M)
    members: list[PencilMember] = []
    if abs(coeffs[0]) <= 1e-12 * scale**3:
        pair = factor_line_pair(W.M)
        members.append(PencilMember(np.inf, pair, complex_lines=pair is None))
    roots = np.roots(coeffs) if abs(coeffs[0]) > 1e-12 * scale**3 else np.roots(coeffs[1:])
    dp = np.polyder(coeffs)
    for r in roots:
        d = np.polyval(dp, r)
        if abs(d) > 0:
            r = r - np.polyval(coeffs, r) / d
        if abs(r.imag) > 1e-9 * max(1.0, abs(r)):
            members.append(PencilMember(complex(r), None, complex_root=True))
            continue
        lam = float(r.real)
        pair = factor_line_pair(Q.M + lam * W.M)
        members.append(PencilMember(lam, pair, complex_lines=pair is None))
    return members


def conic_axes(Q: Conic2):
    """Unit axis directions of a central conic (eigenvectors of the 2x2 block)."""
    B = Q.block
    if np.linalg.norm(B) <= 1e-12:
        raise CircularConic("conic has a vanishing quadratic part")
    w, V = np.linalg.eigh(B)
    if abs(w[1] - w[0]) <= 1e-10 * max(abs(w[0]), abs(w[1])):
        raise CircularConic("conic is a circle; axes are undefined")
    return V[:, 0].copy(), V[:, 1].copy()


@dataclass(frozen=True)
class Bisectors:
    b1: np.ndarray
    b2: np.ndarray
    vertex: np.ndarray | None
    parallel: bool = False


def _rot90(v):
    return np.array([-v[1], v[0]])


def diagonal_bisectors(A, B, C, D) -> Bisectors:
    """Angle bisectors at Z = (AC) x (BD) of the two diagonals."""
    A, B, C, D = (np.asarray(p, dtype=float)[:2] for p in (A, B, C, D))
    ac = C - A
    bd = D - B
    scale = max(np.linalg.norm(ac), np.linalg.norm(bd), TINY)
    if np.linalg.norm(ac) <= 1e-12 * scale or np.linalg.norm(bd) <= 1e-12 * scale:
        raise DegenerateDiagonal("a diagonal has coincident endpoints")
    d1 = ac / np.linalg.norm(ac)
    d2 = bd / np.linalg.norm(bd)
    cross = d1[0] * d2[1] - d1[1] * d2[0]
    if abs(cross) <= 1e-10:
        return Bisectors(d1, _rot90(d1), None, parallel=True)
    s = d1 + d2
    t = d1 - d2
    b1 = s / np.linalg.norm(s) if np.linalg.norm(s) >= np.linalg.norm(t) else t / np.linalg.norm(t)
    # Z = A + p d1 = B + q d2
    p, _ = np.linalg.solve(np.column_stack([d1, -d2]), B - A)
    return Bisectors(b1, _rot90(b1), A + p * d1)


@dataclass(frozen=True)
class ConicHit:
    point: np.ndarray
    angle: float
    multiplicity: int = 1


def _trig_coeffs(Q: Conic2, center, r):
    # Q restricted to the circle is a degree-2 trigonometric polynomial in t;
    # eight samples determine it exactly.
    t = 2 * np.pi * np.arange(8) / 8
    vals = Q(center[0] + r * np.cos(t), center[1] + r * np.sin(t))
    F = np.fft.fft(vals) / 8
    return F  # vals(t) = sum_k F[k] e^{ikt}, k in {-2..2}


def circle_conic_intersections(Q: Conic2, W: Conic2) -> list[ConicHit]:
    """Common points of a conic and a circle, sorted by angle about the circle center."""
    center, r = W.circle_params()
    F = _trig_coeffs(Q, center, r)
    c = {k: F[k % 8] for k in (-2, -1, 0, 1, 2)}
    # z^2 * sum_k c_k z^k, highest power first
    poly = np.array([c[2], c[1], c[0], c[-1], c[-2]])
    scale = np.max(np.abs(poly))
    if scale <= TINY:
        raise ValueError("circle lies on the conic")

    def g(t):
        return Q(center[0] + r * np.cos(t), center[1] + r * np.sin(t))

    def dg(t):
        x = center + r * np.array([np.cos(t), np.sin(t)])
        return float(Q.gradient(*x) @ (r * np.array([-np.sin(t), np.cos(t)])))

    def ddg(t, h=1e-6):
        return (dg(t + h) - dg(t - h)) / (2 * h)

    nz = np.nonzero(np.abs(poly) > 1e-14 * scale)[0]
    roots = np.roots(poly[nz[0]:]) if len(nz) else np.array([])
    ts = sorted(float(np.mod(np.angle(z), 2 * np.pi)) for z in roots if abs(abs(z) - 1) < 1e-5)
    # merge nearly coincident angles (tangential contact)
    groups: list[list[float]] = []
    for t in ts:
        if groups and abs(t - groups[-1][-1]) < 1e-4:
            groups[-1].append(t)
        else:
            groups.append([t])
    if len(groups) > 1 and abs(groups[0][0] + 2 * np.pi - groups[-1][-1]) < 1e-4:
        groups[0] = [x - 2 * np.pi for x in groups[-1]] + groups[0]
        groups.pop()

    qscale = Q.scale() * max(1.0, r, np.linalg.norm(center)) ** 2
    hits = []
    for grp in groups:
        t = float(np.mean(grp))
        mult = len(grp)
        if mult == 1:
            for _ in range(5):
                d = dg(t)
                if d == 0:
                    break
                t -= g(t) / d
        else:
            for _ in range(5):
                dd = ddg(t)
                if dd == 0:
                    break
                t -= dg(t) / dd
            mult = 2
        if abs(g(t)) > 1e-7 * qscale:
            continue
        t = float(np.mod(t, 2 * np.pi))
        p = center + r * np.array([np.cos(t), np.sin(t)])
        hits.append(ConicHit(p, t, mult))
    hits.sort(key=lambda h: h.angle)
    return hits


def point_conic_distance(Q: Conic2, p) -> float:
    """Euclidean distance from p to a central conic.

    Works in the conic's principal frame, where the foot point satisfies
    y_i = q_i / (1 + mu a_i); clearing denominators gives a quartic in mu.
    """
    p = np.asarray(p, dtype=float)[:2]
    x0 = Q.center()
    w, V = np.linalg.eigh(Q.block)
    cprime = float(Q(*x0))
    q = V.T @ (p - x0)
    a1, a2 = w
    q1, q2 = q
    # a1 q1^2 (1+mu a2)^2 + a2 q2^2 (1+mu a1)^2 + c' (1+mu a1)^2 (1+mu a2)^2 = 0
    P1 = np.polymul([a1, 1.0], [a1, 1.0])
    P2 = np.polymul([a2, 1.0], [a2, 1.0])
    quartic = np.polyadd(np.polyadd(a1 * q1**2 * P2, a2 * q2**2 * P1), cprime * np.polymul(P1, P2))
    cands = []
    for mu in np.roots(quartic):
        if abs(mu.imag) > 1e-8 * max(1.0, abs(mu)):
            continue
        mu = mu.real
        d1, d2 = 1 + mu * a1, 1 + mu * a2
        if abs(d1) < TINY or abs(d2) < TINY:
            continue
        cands.append(np.array([q1 / d1, q2 / d2]))
    # foot points with a zero coordinate of q sit at 1 + mu a_i = 0
    for i, j in ((0, 1), (1, 0)):
        mu = -1.0 / w[i]
        dj = 1 + mu * w[j]
        if abs(dj) < TINY:
            continue
        yj = q[j] / dj
        s = -(cprime + w[j] * yj**2) / w[i]
        if s >= 0:
            for sg in (1, -1):
                y = np.zeros(2)
                y[i] = sg * np.sqrt(s)
                y[j] = yj
                cands.append(y)
    if not cands:
        raise ValueError("no real foot point found")
    return float(min(np.linalg.norm(y - q) for y in cands))
