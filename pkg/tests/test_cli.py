import json
import subprocess
import sys

import numpy as np
import pytest

from fracpvar.cli import EXIT_FAILED, EXIT_HYPOTHESIS, EXIT_IO, EXIT_OK, main
from fracpvar.domain import Field, build_grid, read_field_csv, write_field_csv


def edited(config_dir, tmp_path, name, **changes):
    lines = (config_dir / f"{name}.cfg").read_text().splitlines()
    keep = [ln for ln in lines if ln.split("=")[0].strip() not in changes]
    path = tmp_path / f"{name}_edit.cfg"
    path.write_text("\n".join(keep + [f"{k} = {v}" for k, v in changes.items()]) + "\n")
    return path


@pytest.fixture(scope="module")
def exhaust_dir(tmp_path_factory, config_dir):
    out = tmp_path_factory.mktemp("sub")
    assert main(["exhaust", "--config", str(config_dir / "sublinear.cfg"), "--out", str(out)]) == EXIT_OK
    return out


def test_check_ok(config_dir, capsys):
    assert main(["check", "--config", str(config_dir / "superlinear.cfg")]) == EXIT_OK
    out = capsys.readouterr().out
    assert "regime: superlinear" in out and "FAIL" not in out


def test_check_constant_weight_fails(config_dir, tmp_path, capsys):
    cfg = edited(config_dir, tmp_path, "superlinear", **{"weight.kind": "constant"})
    assert main(["check", "--config", str(cfg)]) == EXIT_HYPOTHESIS
    assert "phi > 0" in capsys.readouterr().out


@pytest.mark.parametrize("changes", [
    {"params.q": 1.0},
    {"solver.tol": 0},
    {"grid.radii": "[]"},
    {"grid.radii": "[2, 4.3]"},
])
def test_config_errors_exit_2(config_dir, tmp_path, changes):
    cfg = edited(config_dir, tmp_path, "superlinear", **changes)
    assert main(["exhaust", "--config", str(cfg), "--out", str(tmp_path / "o")]) == EXIT_HYPOTHESIS


def test_exhaust_needs_two_radii(config_dir, tmp_path):
    cfg = edited(config_dir, tmp_path, "sublinear", **{"grid.radii": "[2]"})
    assert main(["exhaust", "--config", str(cfg), "--out", str(tmp_path)]) == EXIT_HYPOTHESIS


def test_missing_config_exit_4(tmp_path):
    assert main(["check", "--config", str(tmp_path / "nope.cfg")]) == EXIT_IO


def test_exhaust_outputs(exhaust_dir):
    names = {p.name for p in exhaust_dir.iterdir()}
    for f in ("exhaustion.csv", "trace.csv", "plot_data.csv", "report.json", "levels.png",
              "seminorms.png", "solution.png", "solution_R2.csv", "solution_R4.csv", "solution_R8.csv"):
        assert f in names
    rep = json.loads((exhaust_dir / "report.json").read_text())
    assert rep["regime"] == "sublinear"
    assert all(v in (True, None) for v in rep["verdicts"].values())
    header = (exhaust_dir / "exhaustion.csv").read_text().splitlines()[0]
    assert header == "R,level,seminorm_p,neg_part,T,iterations"


def test_solve_and_diagnose(config_dir, tmp_path):
    out = tmp_path / "s"
    assert main(["solve", "--config", str(config_dir / "sublinear.cfg"), "--out", str(out),
                 "--radius", "4", "--no-plots"]) == EXIT_OK
    assert not (out / "solution.png").exists()
    assert main(["diagnose", "--config", str(config_dir / "sublinear.cfg"), "--out", str(out),
                 "--trials", "2000"]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert rep["solve"]["R"] == 4.0
    diag = rep["diagnostics"]
    assert diag["fuzz"]["violations"] == 0
    assert diag["pohozaev_sign_test"]["verdict"] == "MIXED"
    assert np.isfinite(diag["sobolev_ratio"])


def test_solve_rejects_unknown_radius(config_dir, tmp_path):
    assert main(["solve", "--config", str(config_dir / "sublinear.cfg"), "--out", str(tmp_path),
                 "--radius", "3"]) == EXIT_HYPOTHESIS


def test_diagnose_zero_field(config_dir, tmp_path):
    g = build_grid(2.0, 0.125, 1)
    path = tmp_path / "zero.csv"
    write_field_csv(path, Field(np.zeros(g.size), g))
    assert main(["diagnose", "--config", str(config_dir / "sublinear.cfg"), "--out", str(tmp_path),
                 "--solution", str(path), "--trials", "100"]) == EXIT_OK
    diag = json.loads((tmp_path / "report.json").read_text())["diagnostics"]
    assert diag["sobolev_ratio"] is None
    assert diag["pohozaev_residual"] == 0.0


def test_diagnose_grid_mismatch(config_dir, tmp_path):
    g = build_grid(3.0, 0.125, 1)
    path = tmp_path / "odd.csv"
    write_field_csv(path, Field(np.ones(g.size), g))
    assert main(["diagnose", "--config", str(config_dir / "sublinear.cfg"), "--out", str(tmp_path),
                 "--solution", str(path)]) == EXIT_IO


def test_diagnose_shifted_coordinates(config_dir, tmp_path):
    g = build_grid(2.0, 0.125, 1)
    path = tmp_path / "shift.csv"
    write_field_csv(path, Field(np.ones(g.size), g))
    coords, values = read_field_csv(path)
    np.savetxt(path, np.column_stack([coords + 0.01, values]), delimiter=",", header="x0,u", comments="")
    assert main(["diagnose", "--config", str(config_dir / "sublinear.cfg"), "--out", str(tmp_path),
                 "--solution", str(path)]) == EXIT_IO


def test_fuzz_command(capsys):
    assert main(["fuzz", "--p", "2", "--p", "3", "--trials", "5000"]) == EXIT_OK
    assert capsys.readouterr().out.count("violations=0") == 2


def test_failed_verdict_exit_1(config_dir, tmp_path, monkeypatch):
    import fracpvar.cli as cli
    real = cli.run_exhaustion

    def broken(cfg, **kw):
        rep = real(cfg, **kw)
        rep.verdicts["below_cap"] = False
        return rep
    monkeypatch.setattr(cli, "run_exhaustion", broken)
    assert main(["exhaust", "--config", str(config_dir / "sublinear.cfg"), "--out", str(tmp_path),
                 "--no-plots"]) == EXIT_FAILED


def test_entry_point_subprocess(config_dir):
    res = subprocess.run([sys.executable, "-m", "fracpvar.cli", "check", "--config",
                          str(config_dir / "sublinear.cfg")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr
    assert "regime: sublinear" in res.stdout
