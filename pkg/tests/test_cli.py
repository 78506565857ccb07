import csv
import json

import numpy as np
import pytest

from fbms import catenoid
from fbms.cli import main
from fbms.mesh import TriMesh, export_mesh


def run(tmp_path, *args):
    return main([*args, "--out-dir", str(tmp_path)])


def test_critical_params(tmp_path, capsys):
    assert run(tmp_path, "critical-params") == 0
    data = json.loads((tmp_path / "critical_params.json").read_text())
    assert data["a_star"] == pytest.approx(2.17162, abs=1e-4)
    assert data["area_over_pi"] == pytest.approx(1.6671, abs=5e-4)
    assert max(data["residual_balance"], data["residual_orthogonality"]) < 1e-12
    assert json.loads(capsys.readouterr().out) == data


def test_sweepout_scan_outputs_are_deterministic(tmp_path):
    first, second = tmp_path / "a", tmp_path / "b"
    assert run(first, "sweepout-scan", "--tier", "fast", "--ns", "8", "--nt", "8") == 0
    assert run(second, "sweepout-scan", "--tier", "fast", "--ns", "8", "--nt", "8") == 0
    for name in ("sweepout_grid.csv", "sweepout_summary.json"):
        assert (first / name).read_bytes() == (second / name).read_bytes()
    rows = list(csv.DictReader((first / "sweepout_grid.csv").open(newline="")))
    assert len(rows) == 64
    assert all(float(r["area"]) == 0.0 for r in rows if float(r["t"]) in (0.0, 1.0))
    summary = json.loads((first / "sweepout_summary.json").read_text())
    assert summary["bounds"] == "pass" and summary["topology_mismatches"] == []


def test_spectrum_with_eigenfunction(tmp_path):
    assert run(tmp_path, "spectrum", "--surface", "disc", "--tier", "fast", "--problem", "steklov", "-k", "5", "--eigenfunction", "1") == 0
    report = json.loads((tmp_path / "spectrum.json").read_text())
    assert np.allclose(report["eigenvalues"][1:5], [1, 1, 2, 2], rtol=2e-2)
    ply = (tmp_path / "eigenfunction_1.ply").read_text().splitlines()
    assert ply[0] == "ply" and "property double value" in ply
    assert (tmp_path / "spectrum.csv").read_text().startswith("k,eigenvalue")


def test_spectrum_from_mesh_file(tmp_path):
    cc = catenoid.solve_critical_catenoid()
    path = tmp_path / "k.obj"
    path.write_bytes(export_mesh(catenoid.revolve_to_mesh(cc.a, cc.h, 32, 16)))
    assert run(tmp_path, "spectrum", "--mesh", str(path), "--group", "prismatic:2") == 0
    assert json.loads((tmp_path / "spectrum.json").read_text())["index"] == 1


def test_minimize_disc_verdict(tmp_path):
    assert run(tmp_path, "minimize", "--start", "disc", "--tier", "fast") == 0
    report = json.loads((tmp_path / "flow_report.json").read_text())
    assert report["verdict"]["summary"].startswith("disc, area 0.99")
    assert report["verdict"]["index"] == 1
    assert (tmp_path / "minimized.obj").read_text().startswith("# fbms mesh")


def test_minimize_catenoid_verdict(tmp_path):
    assert run(tmp_path, "minimize", "--start", "catenoid", "--tier", "fast") == 0
    verdict = json.loads((tmp_path / "flow_report.json").read_text())["verdict"]
    assert verdict["summary"].startswith("annulus, area 1.66")
    assert verdict["equivariant_index"] == 1


def test_usage_errors(tmp_path):
    bad = tmp_path / "bad.cfg"
    bad.write_text("tier = enormous\n")
    assert run(tmp_path, "critical-params", "--config", str(bad)) == 2
    assert run(tmp_path, "spectrum", "--mesh", str(tmp_path / "missing.obj")) == 2
    assert run(tmp_path, "verify-all", "--only", "1,x") == 2
    assert run(tmp_path, "verify-all", "--only", "42") == 2
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 2


def test_numeric_failure_exit_code(tmp_path):
    v = np.array([[0, 0, 0], [0.3, 0, 0], [0, 0.3, 0], [0, 0, 0.3]], dtype=float)
    closed = TriMesh(v, [[0, 2, 1], [0, 1, 3], [0, 3, 2], [1, 2, 3]], np.zeros(4, dtype=bool))
    path = tmp_path / "closed.obj"
    path.write_bytes(export_mesh(closed))
    assert run(tmp_path, "spectrum", "--mesh", str(path), "--problem", "steklov") == 3


def test_verify_subset_and_negative_control(tmp_path, capsys):
    assert run(tmp_path, "verify-all", "--only", "1,2") == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("[PASS]  1") and lines[1].startswith("[PASS]  2")
    # an unreachable stopping threshold makes the fixed-point criterion fail by name
    broken = tmp_path / "broken.cfg"
    broken.write_text("tier = fast\ngradient_tolerance = 1e-15\n")
    assert run(tmp_path, "verify-all", "--only", "8", "--config", str(broken)) == 1
    assert "[FAIL]  8 minimizer fixed points" in capsys.readouterr().out
    summary = json.loads((tmp_path / "verify_all.json").read_text())
    assert summary["passed"] is False
