import numpy as np
import pytest
from scipy.optimize import minimize

from circlenets.catalog import make_surface
from circlenets.errors import DomainExit, NoConvergence, NotConjugate, SurfaceSpecError, UmbilicEncountered
from circlenets.geom3 import Plane3
from circlenets.surface import (
    ORDERS,
    Surface,
    closest_point,
    conjugate_coeffs,
    dupin_indicatrix,
    fundamental_forms,
    is_umbilic,
    principal_frame,
    trace_curvature_line,
)

TORUS = make_surface("torus:R=2,r=1")
CATALOG_SPECS = ["torus:R=2,r=1", "sphere:R=1", "cylinder:r=1", "revolve:a=2,b=1,c=1,d=0.2",
                 "revolve-conjugate:c=0.5,k=3", "cubic-graph:K1=1,K2=2,a30=0.1,a21=-0.05,a12=0.2,a03=0.07",
                 "translational", "ellipsoid:a=3,b=2,c=1", "ellipsoid-cl:a=5,b=3,c=1"]


def sample_uv(s, n=6, seed=0):
    rng = np.random.default_rng(seed)
    (u0, u1), (v0, v1) = s.domain
    pad_u, pad_v = 0.1 * (u1 - u0), 0.1 * (v1 - v0)
    return np.column_stack([rng.uniform(u0 + pad_u, u1 - pad_u, n),
                            rng.uniform(v0 + pad_v, v1 - pad_v, n)])


@pytest.mark.parametrize("spec", CATALOG_SPECS)
def test_catalog_tag_invariants(spec):
    s = make_surface(spec)
    for uv in sample_uv(s):
        I, II, n, j = fundamental_forms(s, uv)
        assert np.linalg.norm(np.cross(j["u"], j["v"])) > 1e-10
        if s.tag == "curvature-line":
            assert abs(I[0, 1]) < 1e-8 * np.sqrt(I[0, 0] * I[1, 1])
            assert abs(II[0, 1]) < 1e-8 * max(1.0, np.abs(II).max())
        if s.tag == "conjugate":
            assert abs(j["uv"] @ n) < 1e-8 * max(1.0, np.linalg.norm(j["uv"]))


def test_surface_spec_errors():
    with pytest.raises(SurfaceSpecError):
        make_surface("klein-bottle")
    with pytest.raises(SurfaceSpecError):
        make_surface("torus:R")
    with pytest.raises(SurfaceSpecError):
        make_surface("torus:Q=3")


def test_principal_frame_examples():
    fr = principal_frame(make_surface("sphere:R=2"), (0.3, 0.2))
    assert fr.K1 == pytest.approx(fr.K2, abs=1e-12) and abs(fr.K1) == pytest.approx(0.5)
    fr = principal_frame(TORUS, (0.0, 0.0))
    assert np.allclose(fr.point, (3, 0, 0))
    assert (fr.K1, fr.K2) == pytest.approx((1 / 3, 1.0), abs=1e-12)
    # parallel is the y direction, meridian the z direction
    assert abs(fr.dir1[1]) == pytest.approx(1.0) and abs(fr.dir2[2]) == pytest.approx(1.0)
    fr = principal_frame(make_surface("cylinder:r=0.5"), (0.2, 1.0))
    assert sorted(abs(k) for k in (fr.K1, fr.K2)) == pytest.approx([0.0, 2.0], abs=1e-12)


@pytest.mark.parametrize("spec", CATALOG_SPECS)
def test_principal_frame_post(spec):
    s = make_surface(spec)
    for uv in sample_uv(s, 4, seed=1):
        fr = principal_frame(s, uv)
        assert fr.K1 <= fr.K2
        for a, b in ((fr.dir1, fr.dir2), (fr.dir1, fr.normal), (fr.dir2, fr.normal)):
            assert abs(a @ b) < 1e-10
        # shape operator in the tangent basis: S = I^-1 II acting on (du, dv)
        I, II, n, j = fundamental_forms(s, uv)
        J = np.column_stack([j["u"], j["v"]])
        S = np.linalg.solve(I, II)
        for K, d in ((fr.K1, fr.dir1), (fr.K2, fr.dir2)):
            x = np.linalg.lstsq(J, d, rcond=None)[0]
            res = np.linalg.norm(J @ (S @ x) - K * d)
            assert res < 1e-8 * max(abs(fr.K1), abs(fr.K2), 1.0)


@pytest.mark.parametrize("spec", ["torus:R=2,r=1", "revolve:a=2,b=1,c=1,d=0.2", "ellipsoid-cl:a=5,b=3,c=1"])
def test_curvature_line_directions_are_coordinate_directions(spec):
    s = make_surface(spec)
    for uv in sample_uv(s, 5, seed=2):
        fr = principal_frame(s, uv)
        j = s.jet(uv, 1)
        eu, ev = j["u"] / np.linalg.norm(j["u"]), j["v"] / np.linalg.norm(j["v"])
        pairs = [(abs(fr.dir1 @ eu), abs(fr.dir2 @ ev)), (abs(fr.dir1 @ ev), abs(fr.dir2 @ eu))]
        assert max(min(p) for p in pairs) > 1 - 1e-8


def test_umbilics():
    assert is_umbilic(make_surface("sphere:R=1"), (0.4, 1.0))
    assert not is_umbilic(TORUS, (0.0, 0.0))
    s = make_surface("ellipsoid:a=3,b=2,c=1")

    def gap(x):
        fr = principal_frame(s, x)
        return (fr.K2 - fr.K1) ** 2

    res = minimize(gap, (0.6, 0.05), method="Nelder-Mead",
                   options={"xatol": 1e-12, "fatol": 1e-30, "maxiter": 4000})
    assert is_umbilic(s, res.x, tol=1e-6)
    # the four classical umbilics lie in the plane of the largest and smallest axes
    x, y, z = s(res.x)
    a, b, c = 3.0, 2.0, 1.0
    assert abs(y) < 1e-6
    assert x**2 == pytest.approx(a**2 * (a**2 - b**2) / (a**2 - c**2), rel=1e-6)
    assert z**2 == pytest.approx(c**2 * (b**2 - c**2) / (a**2 - c**2), rel=1e-6)


def test_conjugate_coeffs():
    assert conjugate_coeffs(make_surface("translational"), (0.3, -0.4)) == pytest.approx((0, 0), abs=1e-14)
    s = make_surface("revolve:a=2,b=1,c=1,d=0.2")
    for u in (-1.0, 0.3, 2.0):
        a, b = conjugate_coeffs(s, (u, 0.7))
        g = 2 + np.cos(u) + 0.2 * np.cos(2 * u)
        dg = -np.sin(u) - 0.4 * np.sin(2 * u)
        assert a == pytest.approx(0.0, abs=1e-12)
        assert b == pytest.approx(dg / g, rel=1e-10, abs=1e-12)
    # the graph z = uv has f_uv = (0, 0, 1), purely normal at the origin
    with pytest.raises(NotConjugate):
        conjugate_coeffs(make_surface("cubic-graph:K1=1,K2=2,a21=1"), (0.3, 0.2))


def test_dupin_indicatrix_examples():
    s = make_surface("cubic-graph:K1=1,K2=1")
    Q = dupin_indicatrix(s, (0, 0), Plane3.through((0, 0, 0.02), (0, 0, 1)))
    assert np.allclose(Q.M / Q.M[0, 0], np.diag([1, 1, -0.04]), atol=1e-14)
    s = make_surface("cubic-graph:K1=1,K2=2")
    Q = dupin_indicatrix(s, (0, 0), Plane3.through((0, 0, 0.02), (0, 0, 1)))
    assert np.allclose(Q.M / Q.M[2, 2], -np.diag([1 / 0.04, 1 / 0.02, -1]), atol=1e-12)
    # axes ratio sqrt(K2/K1)
    assert np.sqrt(Q.M[1, 1] / Q.M[0, 0]) == pytest.approx(np.sqrt(2))
    # tilted plane z = 0.02 + 0.001 x: substitute points of the paraboloid section
    pl = Plane3.through((0, 0, 0.02), (-0.001, 0, 1))
    Q = dupin_indicatrix(s, (0, 0), pl)
    cx = 0.001
    for t in np.linspace(0, 2 * np.pi, 8, endpoint=False):
        # (x - cx)^2/2 + y^2 = 0.02 + cx^2/2 is the section of z=(x^2+2y^2)/2 by the plane
        rr = 0.02 + cx**2 / 2
        x = cx + np.sqrt(2 * rr) * np.cos(t)
        y = np.sqrt(rr) * np.sin(t)
        assert abs(Q(x, y)) < 1e-15
    assert np.allclose(Q.center(), (cx, 0), atol=1e-14)


def test_trace_meridian_and_parallel():
    uv = trace_curvature_line(TORUS, (0.0, 0.0), 2, 0.5)
    assert uv == pytest.approx((0.5, 0.0), abs=1e-9)
    uv = trace_curvature_line(TORUS, (0.0, 0.0), 1, 2 * np.pi * 3)
    assert np.linalg.norm(TORUS(uv) - TORUS((0.0, 0.0))) < 1e-6


def test_trace_roundtrip():
    s = make_surface("ellipsoid:a=3,b=2,c=1")
    uv0 = np.array([0.3, 0.8])
    t = 0.4
    mid = trace_curvature_line(s, uv0, 1, t)
    fwd = principal_frame(s, mid).dir1
    if fwd @ (s(mid) - s(uv0)) < 0:
        fwd = -fwd
    back = trace_curvature_line(s, mid, 1, -t, start_dir=fwd)
    assert np.linalg.norm(back - uv0) < 1e-8 * t


def test_trace_errors():
    s = make_surface("ellipsoid-cl:a=5,b=3,c=1")
    with pytest.raises(DomainExit):
        trace_curvature_line(s, (3.0, 14.0), 1, 50.0)
    e = make_surface("ellipsoid:a=3,b=2,c=1")
    # along the meridian v = 0 (the xz ellipse) from the equator towards the umbilic
    fr = principal_frame(e, (0.0, 0.0))
    which = 1 if abs(fr.dir1[2]) > 0.9 else 2
    with pytest.raises(UmbilicEncountered):
        trace_curvature_line(e, (0.0, 0.0), which, 3.0, start_dir=np.array([0, 0, 1.0]))


def test_closest_point_examples():
    sph = make_surface("sphere:R=1")
    uv = np.array([0.3, -0.7])
    assert np.linalg.norm(sph(closest_point(sph, sph(uv), uv + 0.01)) - sph(uv)) < 1e-10
    foot = closest_point(sph, 2 * sph(uv), uv + 0.05)
    assert np.allclose(sph(foot), sph(uv), atol=1e-10)
    rng = np.random.default_rng(3)
    for spec in ("torus:R=2,r=1", "ellipsoid-cl:a=5,b=3,c=1"):
        s = make_surface(spec)
        for uvs in sample_uv(s, 5, seed=4):
            p = s(uvs) + 0.01 * s.normal(uvs)
            got = closest_point(s, p, uvs + rng.normal(scale=0.02, size=2))
            assert np.linalg.norm(got - uvs) < 1e-8


def test_closest_point_failure():
    s = make_surface("cubic-graph:K1=1,K2=2")
    with pytest.raises(NoConvergence):
        closest_point(s, np.array([1.5, -1.0, 3.0]), (-1.9, 1.9), max_iter=2)


@pytest.mark.parametrize("spec", ["torus:R=2,r=1", "cubic-graph:K1=1,K2=2,a30=0.1,a21=-0.05,a12=0.2,a03=0.07",
                                  "ellipsoid-cl:a=5,b=3,c=1", "revolve-conjugate:c=0.5,k=3"])
def test_finite_difference_fallback_matches_analytic(spec):
    ref = make_surface(spec)
    for order in (1, 2, 3):
        keep = [nm for k in range(order) for nm in ORDERS[k]]
        s = Surface({nm: ref._fn[nm] for nm in keep}, ref.domain, ref.periodic, ref.tag,
                    scale=ref.scale)
        for uv in sample_uv(ref, 4, seed=5):
            for nm in ORDERS[order]:
                a = ref.partial(nm, *uv)
                b = s.partial(nm, *uv)
                assert np.linalg.norm(a - b) <= 1e-6 * max(np.linalg.norm(a), 1.0)


def test_inverted_surface_is_still_curvature_line():
    inv = TORUS.inverted((6.0, 1.0, 0.5))
    assert inv.tag == "curvature-line"
    for uv in sample_uv(inv, 4, seed=6):
        I, II, n, j = fundamental_forms(inv, uv)
        assert abs(I[0, 1]) < 1e-10 * np.sqrt(I[0, 0] * I[1, 1])
        assert abs(II[0, 1]) < 1e-8 * np.abs(II).max()
