import json
import subprocess
import sys

import pytest

from circlenets.cli import main


def test_principal_moebius_torus(tmp_path, capsys):
    out = tmp_path / "p.json"
    rc = main(["principal", "--surface", "torus:R=2,r=1", "--uv", "0,0", "--eps", "0.05",
               "--method", "moebius", "--out", str(out)])
    assert rc == 0
    line = capsys.readouterr().out.split()
    assert float(line[1]) < 1e-6 and float(line[3]) < 1e-6
    rec = json.loads(out.read_text())
    assert rec["angle_err_1"] < 1e-6 and len(rec["dir1"]) == 3


def test_principal_sphere_is_umbilic(tmp_path, capsys):
    rc = main(["principal", "--surface", "sphere:R=1", "--uv", "0.2,0.3", "--out", str(tmp_path / "p.json")])
    assert rc == 2
    assert "UmbilicRegion" in capsys.readouterr().err


def test_principal_euclidean_cubic(tmp_path):
    out = tmp_path / "p.json"
    rc = main(["principal", "--method", "euclidean", "--eps", "0.1", "--out", str(out),
               "--surface", "cubic-graph:K1=1,K2=2,a30=0.1,a21=-0.05,a12=0.2,a03=0.07"])
    assert rc == 0
    rec = json.loads(out.read_text())
    assert len(rec["dir1"]) == 3 and len(rec["dir2"]) == 3
    assert rec["method"] == "euclidean" and 0 <= rec["angle_err_1"] <= 0.8


def test_build_net_circular_torus(tmp_path, capsys):
    rc = main(["build-net", "--kind", "circular", "--surface", "torus:R=2,r=1", "--eps", "0.05",
               "--n", "20", "--out", str(tmp_path)])
    assert rc == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["dims"] == [21, 21] and summary["circularity_max"] < 1e-8
    obj = (tmp_path / "net.obj").read_text().splitlines()
    assert sum(l.startswith("v ") for l in obj) == 441
    assert all(len(l.split()) == 5 for l in obj if l.startswith("f "))
    for name in ("net.json", "deviations.csv", "summary.json"):
        assert (tmp_path / name).exists()


def test_build_net_projection_and_reproducibility(tmp_path, capsys):
    args = ["build-net", "--kind", "projection", "--surface", "revolve:a=2,b=1,c=1,d=0.2",
            "--eps", "0.1", "--n", "10"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["planarity_max"] < 1e-12
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("net.obj", "net.json", "deviations.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_build_net_parabolic(tmp_path, capsys):
    rc = main(["build-net", "--kind", "onsurface", "--surface", "cylinder-graph:c=1",
               "--uv", "0.1,0.1", "--eps", "0.1", "--n", "4", "--out", str(tmp_path)])
    assert rc == 2
    assert "ParabolicPoint" in capsys.readouterr().err


def test_sweep_single_and_unknown(tmp_path, capsys):
    rc = main(["sweep", "--experiment", "thm4-planar-fourth", "--out", str(tmp_path)])
    assert rc == 0
    assert capsys.readouterr().out.startswith("PASS thm4-planar-fourth: slope")
    assert (tmp_path / "thm4-planar-fourth.csv").exists()
    assert json.loads((tmp_path / "summary.json").read_text())["gate"] is True
    assert main(["sweep", "--experiment", "nonexistent", "--out", str(tmp_path)]) == 2
    assert "UnknownExperiment" in capsys.readouterr().err


def test_bad_arguments_exit_through_argparse():
    with pytest.raises(SystemExit) as exc:
        main(["principal", "--surface", "torus", "--eps", "-1"])
    assert exc.value.code == 2


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "circlenets", "--help"], capture_output=True, text=True)
    assert res.returncode == 0 and "build-net" in res.stdout
