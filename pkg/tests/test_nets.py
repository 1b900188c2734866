import csv
import json

import numpy as np
import pytest

from circlenets.catalog import make_surface
from circlenets.constructions import circular_fourth_point
from circlenets.errors import DomainExit, NotConjugate, SurfaceSpecError, UmbilicEncountered
from circlenets.intersect import SurfaceHit
from circlenets.nets import (
    CONSTRUCTED,
    FIXED_EVEN,
    FIXED_INITIAL,
    PROJECTED,
    build_circular_net,
    build_conjugate_onsurface,
    build_conjugate_projection,
    deviation_report,
    net_quad_defects,
    smooth_net,
    sublattice,
)

TORUS = make_surface("torus:R=2,r=1")
REVCONJ = make_surface("revolve-conjugate:c=0.5,k=3")
ELLCL = make_surface("ellipsoid-cl:a=5,b=3,c=1")
TRANS = make_surface("translational")


def test_smooth_net_matches_direct_evaluation():
    net = smooth_net(TORUS, (0.0, 0.0), 0.1, 10, 10)
    assert net.dims == (11, 11)
    i, j = 4, 7
    assert np.array_equal(net.xyz[i, j], TORUS((0.0 + i * 0.1, 0.0 + j * 0.1)))
    assert np.allclose(net.xyz[i, j], TORUS((0.4, 0.7)), atol=1e-15)
    assert (net.kind == FIXED_INITIAL).all()


@pytest.mark.parametrize("spec, uv0", [("revolve:a=2,b=1,c=1,d=0.2", (0.3, 0.1)),
                                       ("ellipsoid-cl:a=5,b=3,c=1", (3.0, 14.0))])
def test_traced_net_matches_parametrization(spec, uv0):
    s = make_surface(spec)
    direct = smooth_net(s, uv0, 0.1, 4, 4)
    traced = smooth_net(s, uv0, 0.1, 4, 4, traced=True)
    assert np.max(np.linalg.norm(direct.xyz - traced.xyz, axis=-1)) < 1e-8


def test_smooth_net_domain_exit():
    with pytest.raises(DomainExit):
        smooth_net(make_surface("cubic-graph"), (0.0, 0.0), 0.5, 10, 10)


def test_deviation_of_smooth_net_is_zero():
    rep = deviation_report(smooth_net(ELLCL, (3.0, 14.0), 0.1, 4, 4), ELLCL)
    assert rep.aggregates["failed"] == 0
    for key in ("du", "dv", "dist"):
        assert rep.aggregates["all"][key]["max"] < 1e-12


def test_projection_translational_is_identity():
    net = build_conjugate_projection(TRANS, (0.1, -0.3), 0.1, 8)
    ref = smooth_net(TRANS, (0.1, -0.3), 0.1, 8, 8)
    assert np.max(np.abs(net.xyz - ref.xyz)) < 1e-14


def test_projection_quads_are_planar():
    net = build_conjugate_projection(REVCONJ, (0.2, 0.1), 0.1, 10)
    _, summary = net_quad_defects(net)
    assert summary["planarity_height"]["max"] < 1e-12
    assert (net.kind[1:, 1:] == PROJECTED).all()
    assert np.array_equal(net.xyz[:, 0], smooth_net(REVCONJ, (0.2, 0.1), 0.1, 10, 10).xyz[:, 0])


def test_conjugate_builders_need_conjugate_tag():
    cubic = make_surface("cubic-graph:K1=1,K2=2")
    with pytest.raises(NotConjugate):
        build_conjugate_projection(cubic, (0.0, 0.0), 0.1, 4)
    with pytest.raises(NotConjugate):
        build_conjugate_onsurface(cubic, (0.0, 0.0), 0.1, 4)


def test_onsurface_translational_has_no_shift():
    net = build_conjugate_onsurface(TRANS, (0.1, -0.3), 0.1, 6)
    rep = deviation_report(net, TRANS)
    assert rep.aggregates["all"]["du"]["max"] < 1e-10
    assert rep.aggregates["all"]["dv"]["max"] < 1e-10


@pytest.mark.parametrize("N", [5, 6])
def test_onsurface_invariants(N):
    eps = 0.05
    net = build_conjugate_onsurface(REVCONJ, (0.2, 0.1), eps, N)
    assert net.dims == (N + 1, N + 1)
    assert (net.kind[::2, 1:] == FIXED_EVEN).all()
    assert (net.kind[1::2, 1:] == CONSTRUCTED).all()
    resid = np.linalg.norm(REVCONJ(net.uv.reshape(-1, 2)) - net.xyz.reshape(-1, 3), axis=1)
    assert resid.max() < 1e-10
    rows, _ = net_quad_defects(net)
    assert max(abs(r["planarity_volume"]) for r in rows) < 1e-10 * eps**3


def test_first_constructed_vertex_orders():
    # M = (1, 1) from the quads on columns 0..2: du ~ eps^3, dv ~ eps^4
    eps_list = np.array([0.2, 0.1, 0.05, 0.025])
    du, dv = [], []
    for eps in eps_list:
        rep = deviation_report(build_conjugate_onsurface(REVCONJ, (0.2, 0.1), eps, 2), REVCONJ)
        du.append(abs(rep.du[1, 1]))
        dv.append(abs(rep.dv[1, 1]))
    su = np.polyfit(np.log(eps_list), np.log(du), 1)[0]
    sv = np.polyfit(np.log(eps_list), np.log(dv), 1)[0]
    assert 2.7 <= su <= 3.3
    assert 3.7 <= sv <= 4.3


def test_onsurface_du_accumulates_linearly():
    N = 12
    rep = deviation_report(build_conjugate_onsurface(REVCONJ, (0.2, 0.1), 0.05, N), REVCONJ)
    rows = np.arange(1, N + 1)
    acc = np.array([np.max(np.abs(rep.du[1::2, j])) for j in rows])
    fit = np.polyfit(rows, acc, 1)
    pred = np.polyval(fit, rows)
    r2 = 1 - np.sum((acc - pred) ** 2) / np.sum((acc - acc.mean()) ** 2)
    assert fit[0] > 0 and r2 > 0.9


def test_circular_net_on_cylinder_is_smooth_net():
    cyl = make_surface("cylinder:r=1")
    net = build_circular_net(cyl, (0.0, 0.0), 0.1, 5)
    ref = smooth_net(cyl, (0.0, 0.0), 0.1, 5, 5)
    assert np.max(np.linalg.norm(net.xyz - ref.xyz, axis=-1)) < 1e-9


def test_circular_net_errors():
    with pytest.raises(UmbilicEncountered):
        build_circular_net(make_surface("sphere:R=1"), (0.1, 0.2), 0.1, 3)
    with pytest.raises(SurfaceSpecError):
        build_circular_net(REVCONJ, (0.2, 0.1), 0.1, 3)


def test_circular_net_invariants_and_fill_order():
    s, uv0, eps, N = ELLCL, (3.0, 14.0), 0.1, 4
    net = build_circular_net(s, uv0, eps, N)
    _, summary = net_quad_defects(net)
    assert summary["circularity"]["max"] < 1e-8
    resid = np.linalg.norm(s(net.uv.reshape(-1, 2)) - net.xyz.reshape(-1, 3), axis=1)
    assert resid.max() < 1e-10
    # row-by-row fill gives the same vertices: each depends on its lower-left triple only
    rows = smooth_net(s, uv0, eps, N, N)
    ref = rows.uv.copy()
    for i in range(1, N + 1):
        for j in range(1, N + 1):
            D = circular_fourth_point(s, rows.hit(i - 1, j - 1), rows.hit(i, j - 1),
                                      rows.hit(i - 1, j), SurfaceHit.at(s, ref[i, j]))
            rows.xyz[i, j], rows.uv[i, j] = D.point, D.uv
    assert np.array_equal(rows.xyz, net.xyz)
    # determinism
    assert np.array_equal(build_circular_net(s, uv0, eps, N).xyz, net.xyz)


def test_sublattice_partition():
    assert sublattice(0, 0) == "even" and sublattice(2, 4) == "even"
    assert sublattice(1, 1) == "odd" and sublattice(3, 5) == "odd"
    assert sublattice(1, 0) == "intermediate" and sublattice(0, 3) == "intermediate"


def test_exports(tmp_path):
    net = build_conjugate_projection(REVCONJ, (0.2, 0.1), 0.1, 3)
    net.to_obj(tmp_path / "net.obj")
    lines = open(tmp_path / "net.obj").read().splitlines()
    verts = [l for l in lines if l.startswith("v ")]
    faces = [l for l in lines if l.startswith("f ")]
    assert len(verts) == 16 and len(faces) == 9
    assert all(len(f.split()) == 5 for f in faces)
    net.to_json(tmp_path / "net.json")
    rec = json.load(open(tmp_path / "net.json"))
    assert rec["dims"] == [4, 4] and len(rec["vertices"]) == 16
    rep = deviation_report(net, REVCONJ)
    rep.to_csv(tmp_path / "dev.csv")
    rows = list(csv.reader(open(tmp_path / "dev.csv")))
    assert rows[0] == ["i", "j", "du", "dv", "dist", "sublattice"]
    assert len(rows) == 17
    # byte reproducibility
    net.to_obj(tmp_path / "again.obj")
    assert open(tmp_path / "again.obj").read() == open(tmp_path / "net.obj").read()
