"""3D primitives: planes, circles, spheres, quaternions, Moebius inversion.

Points and vectors are plain ``numpy`` arrays of shape ``(3,)``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import CenterCoincidence, CoincidentPoints, CollinearPoints, DegeneratePoints

TINY = 1e-14


def as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(3)
    if not np.all(np.isfinite(a)):
        raise ValueError("non-finite coordinates: %r" % (a,))
    return a


def unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v)
    if n < TINY:
        raise DegeneratePoints("cannot normalize a zero vector")
    return v / n


def triple_product(u, v, w) -> float:
    """det[u v w] = (u x v) . w"""
    return float(np.dot(np.cross(u, v), w))


def any_perpendicular(n) -> np.ndarray:
    n = unit(n)
    axis = np.zeros(3)
    axis[np.argmin(np.abs(n))] = 1.0
    return unit(np.cross(n, axis))


def line_angle(a, b) -> float:
    """Angle in [0, pi/2] between two unoriented lines with directions a, b."""
    a = unit(a)
    b = unit(b)
    c = abs(float(np.dot(a, b)))
    s = float(np.linalg.norm(a - np.dot(a, b) * b))
    return float(np.arctan2(s, c))


@dataclass(frozen=True)
class Plane3:
    normal: np.ndarray
    offset: float

    @classmethod
    def through(cls, point, normal) -> "Plane3":
        n = unit(normal)
        return cls(n, float(np.dot(n, as_point(point))))

    @classmethod
    def from_points(cls, a, b, c) -> "Plane3":
        a, b, c = as_point(a), as_point(b), as_point(c)
        n = np.cross(b - a, c - a)
        scale = max(np.linalg.norm(b - a), np.linalg.norm(c - a), np.linalg.norm(c - b))
        if np.linalg.norm(n) <= 1e-12 * scale**2 or scale < TINY:
            raise CollinearPoints("plane through collinear points")
        return cls.through(a, n)

    def signed_distance(self, p) -> float:
        return float(np.dot(self.normal, p) - self.offset)

    def project(self, p) -> np.ndarray:
        return p - self.signed_distance(p) * self.normal

    def basis(self):
        e1 = any_perpendicular(self.normal)
        return e1, np.cross(self.normal, e1)


@dataclass(frozen=True)
class Circle3:
    center: np.ndarray
    radius: float
    normal: np.ndarray

    def basis(self, start=None):
        """Orthonormal in-plane pair (e1, e2) with e1 x e2 = normal.

        If ``start`` is given, e1 points from the center towards it.
        """
        if start is None:
            e1 = any_perpendicular(self.normal)
        else:
            d = as_point(start) - self.center
            d = d - np.dot(d, self.normal) * self.normal
            e1 = unit(d)
        return e1, np.cross(self.normal, e1)

    def point_at(self, theta, basis):
        e1, e2 = basis
        theta = np.asarray(theta, dtype=float)
        return (self.center + self.radius * (np.multiply.outer(np.cos(theta), e1)
                                             + np.multiply.outer(np.sin(theta), e2)))

    def tangent_at(self, theta, basis):
        e1, e2 = basis
        return -np.sin(theta) * e1 + np.cos(theta) * e2

    def angle_of(self, p, basis) -> float:
        e1, e2 = basis
        d = as_point(p) - self.center
        return float(np.mod(np.arctan2(np.dot(d, e2), np.dot(d, e1)), 2 * np.pi))

    def tangent_through(self, p) -> np.ndarray:
        """Unit tangent of the circle at a point p lying on it."""
        return unit(np.cross(self.normal, as_point(p) - self.center))

    def distance(self, p) -> float:
        d = as_point(p) - self.center
        h = float(np.dot(d, self.normal))
        rho = float(np.linalg.norm(d - h * self.normal))
        return float(np.hypot(rho - self.radius, h))

    @property
    def plane(self) -> Plane3:
        return Plane3.through(self.center, self.normal)


@dataclass(frozen=True)
class Sphere3:
    center: np.ndarray
    radius: float

    def contains(self, p, tol=1e-10) -> bool:
        return abs(np.linalg.norm(as_point(p) - self.center) - self.radius) <= tol * self.radius


def circle_through(a, b, c) -> Circle3:
    """Circumcircle of three points.

    The circumcenter is found as ``a + s*(b-a) + t*(c-a)`` from the 2x2 Gram
    system of the triangle, which stays well conditioned for thin triangles.
    """
    a, b, c = as_point(a), as_point(b), as_point(c)
    ab = b - a
    ac = c - a
    emax = max(np.linalg.norm(ab), np.linalg.norm(ac), np.linalg.norm(c - b))
    if min(np.linalg.norm(ab), np.linalg.norm(ac), np.linalg.norm(c - b)) <= TINY * max(1.0, emax):
        raise CoincidentPoints("circle_through needs three distinct points")
    n = np.cross(ab, ac)
    area2 = np.linalg.norm(n)
    if 0.5 * area2 <= 1e-12 * emax**2:
        raise CollinearPoints("circle_through: points are collinear")
    g11 = ab @ ab
    g12 = ab @ ac
    g22 = ac @ ac
    det = g11 * g22 - g12 * g12
    s = 0.5 * g22 * (g11 - g12) / det
    t = 0.5 * g11 * (g22 - g12) / det
    center = a + s * ab + t * ac
    radius = float(np.mean([np.linalg.norm(p - center) for p in (a, b, c)]))
    return Circle3(center, radius, n / area2)


def moebius_invert(p, center, radius: float = 1.0) -> np.ndarray:
    """Inversion in the sphere of given radius around ``center``."""
    d = as_point(p) - as_point(center)
    r2 = float(d @ d)
    if r2 <= 1e-24:
        raise CenterCoincidence("point coincides with the inversion center")
    return as_point(center) + radius**2 * d / r2


@dataclass(frozen=True)
class Quaternion:
    w: float
    x: float
    y: float
    z: float

    @classmethod
    def from_point(cls, p) -> "Quaternion":
        p = as_point(p)
        return cls(0.0, float(p[0]), float(p[1]), float(p[2]))

    @property
    def imag(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @property
    def real(self) -> float:
        return self.w

    def norm(self) -> float:
        return float(np.sqrt(self.w**2 + self.x**2 + self.y**2 + self.z**2))

    def conjugate(self) -> "Quaternion":
        return Quaternion(self.w, -self.x, -self.y, -self.z)

    def inverse(self) -> "Quaternion":
        n2 = self.w**2 + self.x**2 + self.y**2 + self.z**2
        if n2 <= TINY**2:
            raise DegeneratePoints("quaternion is not invertible")
        c = self.conjugate()
        return Quaternion(c.w / n2, c.x / n2, c.y / n2, c.z / n2)

    def __mul__(self, o: "Quaternion") -> "Quaternion":
        a1, b1, c1, d1 = self.w, self.x, self.y, self.z
        a2, b2, c2, d2 = o.w, o.x, o.y, o.z
        return Quaternion(
            a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
            a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
            a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
            a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
        )

    def __sub__(self, o: "Quaternion") -> "Quaternion":
        return Quaternion(self.w - o.w, self.x - o.x, self.y - o.y, self.z - o.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.w, self.x, self.y, self.z])


def quat_cross_ratio(a, b, c, d) -> Quaternion:
    """Q = (A-B)(B-C)^-1 (C-D)(D-A)^-1 for points embedded as imaginary quaternions."""
    qa, qb, qc, qd = (Quaternion.from_point(p) for p in (a, b, c, d))
    bc = qb - qc
    da = qd - qa
    if bc.norm() <= TINY or da.norm() <= TINY:
        raise DegeneratePoints("cross-ratio needs B != C and D != A")
    return (qa - qb) * bc.inverse() * (qc - qd) * da.inverse()


def rotation_matrix(axis, angle: float) -> np.ndarray:
    k = unit(axis)
    kx = np.array([[0, -k[2], k[1]], [k[2], 0, -k[0]], [-k[1], k[0], 0]])
    return np.eye(3) + np.sin(angle) * kx + (1 - np.cos(angle)) * kx @ kx
