import csv

import numpy as np
import pytest

from circlenets.catalog import make_surface
from circlenets.errors import AllOnSurface, CurvatureSandwichViolated, Tangential, TangentialContact
from circlenets.geom3 import Circle3, Plane3, unit
from circlenets.intersect import (
    SurfaceHit,
    circle_surface_hits,
    line_surface_hit,
    plane_section,
    sphere_tangent_at,
)
from circlenets.surface import principal_frame

SPHERE = make_surface("sphere:R=1")
TORUS = make_surface("torus:R=2,r=1")
CUBIC = make_surface("cubic-graph:K1=1,K2=2,a30=0.1,a21=-0.05,a12=0.2,a03=0.07")


def assert_on_circle_and_surface(hits, c, s, tol=1e-9):
    for h in hits:
        assert np.linalg.norm(s(h.uv) - h.point) < tol
        assert c.distance(h.point) < tol


def test_circle_sphere_two_hits():
    c = Circle3(np.array([0.5, 0, 0]), 1.0, np.array([0, 0, 1.0]))
    hits = circle_surface_hits(c, SPHERE, (0.0, 0.0))
    assert len(hits) == 2
    pts = sorted((h.point for h in hits), key=lambda p: p[1])
    assert np.allclose(pts, [(0.25, -np.sqrt(15) / 4, 0), (0.25, np.sqrt(15) / 4, 0)], atol=1e-12)
    assert_on_circle_and_surface(hits, c, SPHERE)
    assert all(h.multiplicity == 1 for h in hits)


def test_circle_inside_sphere_is_empty():
    c = Circle3(np.zeros(3), 0.1, np.array([0, 0, 1.0]))
    assert circle_surface_hits(c, SPHERE, (0.0, 0.0)) == []


def test_circle_on_sphere_raises():
    c = Circle3(np.zeros(3), 1.0, np.array([0, 0, 1.0]))
    with pytest.raises(AllOnSurface):
        circle_surface_hits(c, SPHERE, (0.0, 0.0))


def test_tangential_circle_reports_double_hit():
    # circle in the plane y = 0 touching the cylinder x^2 + y^2 = 1 from outside at (1, 0, 0)
    cyl = make_surface("cylinder:r=1")
    c = Circle3(np.array([1.5, 0, 0]), 0.5, np.array([0, 1.0, 0]))
    hits = circle_surface_hits(c, cyl, (0.0, 0.0))
    assert len(hits) == 1 and hits[0].multiplicity == 2
    assert np.allclose(hits[0].point, (1, 0, 0), atol=1e-5)


def test_hit_count_is_even_for_small_transversal_circles():
    rng = np.random.default_rng(11)
    for k in range(200):
        s = TORUS if k % 2 else CUBIC
        uv = rng.uniform(-0.8, 0.8, size=2)
        fr = principal_frame(s, uv)
        r = rng.uniform(0.02, 0.1)
        normal = unit(fr.normal + rng.normal(scale=0.7, size=3))
        center = fr.point + rng.normal(scale=0.5 * r, size=3)
        c = Circle3(center, r, normal)
        hits = circle_surface_hits(c, s, uv)
        mult = sum(h.multiplicity for h in hits)
        assert mult % 2 == 0
        assert_on_circle_and_surface(hits, c, s)


def test_line_hits():
    h = line_surface_hit((0.2, 0, 0), (1, 0, 0), SPHERE, (0.1, 0.1))
    assert np.allclose(h.point, (1, 0, 0), atol=1e-13)
    h = line_surface_hit((-0.2, 0, 0), (-1, 0, 0), SPHERE, (0.1, 3.0))
    assert np.allclose(h.point, (-1, 0, 0), atol=1e-13)
    x0, y0 = 0.3, -0.4
    h = line_surface_hit((x0, y0, 5.0), (0, 0, -1), CUBIC, (0.0, 0.0))
    q = (x0**2 + 2 * y0**2) / 2 + 0.1 * x0**3 - 0.05 * x0**2 * y0 + 0.2 * x0 * y0**2 + 0.07 * y0**3
    assert h.point[2] == pytest.approx(q, abs=1e-14)
    assert np.allclose(h.point[:2], (x0, y0), atol=1e-14)


def test_line_grazing_cylinder_is_tangential():
    cyl = make_surface("cylinder:r=1")
    with pytest.raises(Tangential):
        line_surface_hit((1, -1, 0), (0, 1, 1e-8), cyl, (0.0, 0.0))


def test_plane_section_sphere_circle():
    seed = SurfaceHit.at(SPHERE, (np.arcsin(0.6), 0.3))
    curve = plane_section(SPHERE, Plane3.through((0, 0, 0.6), (0, 0, 1)), seed, 0.02)
    assert curve.closed
    P = curve.points
    assert np.max(np.abs(np.hypot(P[:, 0], P[:, 1]) - 0.8)) < 1e-8
    assert np.max(np.abs(P[:, 2] - 0.6)) < 1e-9
    gaps = np.linalg.norm(np.diff(np.vstack([P, P[:1]]), axis=0), axis=1)
    assert gaps.max() <= 0.02 * (1 + 1e-9)


@pytest.mark.parametrize("u0, radius", [(0.0, 3.0), (np.pi, 1.0)])
def test_plane_section_torus_finds_seed_component(u0, radius):
    seed = SurfaceHit.at(TORUS, (u0, 0.4))
    curve = plane_section(TORUS, Plane3.through((0, 0, 0), (0, 0, 1)), seed, 0.05)
    assert curve.closed
    P = curve.points
    assert np.max(np.abs(np.hypot(P[:, 0], P[:, 1]) - radius)) < 1e-9


def test_plane_tangent_to_sphere():
    seed = SurfaceHit.at(SPHERE, (0.0, 0.0))
    with pytest.raises(TangentialContact):
        plane_section(SPHERE, Plane3.through((1, 0, 0), (1, 0, 0)), seed, 0.02)


def test_section_csv(tmp_path):
    seed = SurfaceHit.at(SPHERE, (np.arcsin(0.6), 0.3))
    curve = plane_section(SPHERE, Plane3.through((0, 0, 0.6), (0, 0, 1)), seed, 0.1)
    path = tmp_path / "section.csv"
    curve.to_csv(path)
    rows = list(csv.reader(open(path)))
    assert rows[0] == ["s", "x", "y", "z", "u", "v"]
    assert len(rows) == len(curve.hits) + 1


def test_sphere_tangent_at():
    sph = sphere_tangent_at(TORUS, (0.0, 0.0), 2.0)
    assert sph.radius == 2.0
    assert np.allclose(sph.center, (1, 0, 0))
    assert sph.contains(np.array([3.0, 0, 0]))
    with pytest.raises(CurvatureSandwichViolated):
        sphere_tangent_at(SPHERE, (0.2, 0.1), 1.0)
    with pytest.raises(CurvatureSandwichViolated):
        sphere_tangent_at(TORUS, (0.0, 0.0), 0.5)
    sph = sphere_tangent_at(make_surface("cubic-graph:K1=1,K2=2"), (0.0, 0.0), 1 / 1.5)
    assert np.allclose(sph.center, (0, 0, 1 / 1.5))
