import json
import re
import time

import numpy as np
import pytest

from chs_dynbc import acceptance, cli
from chs_dynbc.io import read_rows

SMALL = """
[mesh]
n = 16
[scheme]
T = 0.02
n_blocks = 2
dt = 1e-3
[output]
snapshot_every = 5
"""

ZERO_DATA = """
[mesh]
n = 16
[potential]
bulk = "logarithmic"
c = 2.0
[scheme]
T = 0.02
n_blocks = 2
[initial.mu]
profile = "constant"
value = 0.0
[initial.rho]
profile = "constant"
value = 0.0
[control]
profile = "zero"
"""


def _write(tmp_path, text, name="run.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def test_run_writes_outputs(tmp_path):
    out = tmp_path / "out"
    start = time.perf_counter()
    code = cli.main(["run", "--config", _write(tmp_path, SMALL), "--out", str(out), "--vtk"])
    assert code == cli.EXIT_OK
    assert time.perf_counter() - start < 5.0
    header, rows = read_rows(out / "timeseries.csv")
    assert len(rows) == 21 and rows[-1]["t"] == pytest.approx(0.02)
    snaps = sorted((out / "snapshots").glob("*.csv"))
    assert [p.name for p in snaps] == ["snapshot_000000.csv", "snapshot_000005.csv",
                                       "snapshot_000010.csv", "snapshot_000015.csv",
                                       "snapshot_000020.csv"]
    assert len(list((out / "snapshots").glob("*.vtk"))) == len(snaps)
    assert (out / "config.toml").exists() and (out / "mesh.csv").exists()


def test_default_run_is_fast(tmp_path):
    start = time.perf_counter()
    assert cli.main(["run", "--out", str(tmp_path)]) == cli.EXIT_OK
    assert time.perf_counter() - start < 5.0
    assert len(list((tmp_path / "snapshots").glob("*.csv"))) >= 1


def test_rerun_is_bit_identical(tmp_path):
    cfg = _write(tmp_path, SMALL)
    cli.main(["run", "--config", cfg, "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", cfg, "--out", str(tmp_path / "b")])
    for name in ("timeseries.csv", "snapshots/snapshot_000020.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_saved_config_reproduces_run(tmp_path):
    cli.main(["run", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path / "a")])
    cli.main(["run", "--config", str(tmp_path / "a" / "config.toml"), "--out", str(tmp_path / "b")])
    assert ((tmp_path / "a" / "timeseries.csv").read_bytes()
            == (tmp_path / "b" / "timeseries.csv").read_bytes())


def test_zero_data_run_stays_zero(tmp_path):
    out = tmp_path / "out"
    assert cli.main(["run", "--config", _write(tmp_path, ZERO_DATA), "--out", str(out)]) == 0
    header, rows = read_rows(out / "timeseries.csv")
    for row in rows:
        for key in header:
            if key not in ("step", "t", "dt_used"):
                assert row[key] == 0.0, key


def test_config_error_exit_code(tmp_path, capsys):
    bad = _write(tmp_path, '[potential]\nbulk = "logarithmic"\nc = 0.5\n')
    assert cli.main(["run", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "c > 1" in capsys.readouterr().err


def test_syntax_error_exit_code(tmp_path, capsys):
    bad = _write(tmp_path, "[mesh\nn = 3\n")
    assert cli.main(["run", "--config", bad, "--out", str(tmp_path)]) == cli.EXIT_CONFIG
    assert "line 1" in capsys.readouterr().err


def test_solver_failure_exit_code(tmp_path):
    # one Newton iteration can never meet the tolerance and halving is forbidden
    text = ("[mesh]\nn = 16\n[scheme]\nT = 0.02\nn_blocks = 2\nnewton_max = 1\n"
            "newton_tol = 1e-300\ndt_min = 1e-3\n")
    out = tmp_path / "out"
    assert cli.main(["run", "--config", _write(tmp_path, text), "--out", str(out)]) == cli.EXIT_SOLVER
    record = json.loads((out / "failure.json").read_text())
    assert record["status"] == "failed" and record["command"] == "run"


def test_verify_subset(tmp_path, capsys):
    code = cli.main(["verify", "--only", "compatibility,dense_oracle", "--out", str(tmp_path)])
    assert code == cli.EXIT_OK
    _, rows = read_rows(tmp_path / "verify.csv")
    assert [r["criterion"] for r in rows] == ["compatibility", "dense_oracle"]
    assert re.search(r"^PASS +compatibility", capsys.readouterr().out, re.M)


def test_verify_detects_sabotage(tmp_path, monkeypatch, capsys):
    monkeypatch.setitem(acceptance.TOLERANCES, "dense_oracle", 0.0)
    code = cli.main(["verify", "--only", "dense_oracle", "--out", str(tmp_path)])
    assert code == cli.EXIT_VERIFY
    assert "FAILED: dense_oracle" in capsys.readouterr().out


def test_verify_unknown_criterion(tmp_path):
    assert cli.main(["verify", "--only", "nonsense", "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_stability_identical_controls(tmp_path):
    cfg = _write(tmp_path, SMALL + "[stability]\nscales = [0.0, 0.1]\n")
    assert cli.main(["stability", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, rows = read_rows(tmp_path / "stability.csv")
    assert rows[0]["lhs"] == 0.0 and rows[0]["control_l2"] == 0.0
    assert rows[1]["lhs"] > 0 and np.isfinite(rows[1]["ratio"])


def test_stability_refuses_obstacle(tmp_path):
    cfg = _write(tmp_path, SMALL + '[potential]\nbulk = "obstacle"\n')
    assert cli.main(["stability", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_CONFIG


def test_convergence_gives_two_ratios(tmp_path):
    cfg = _write(tmp_path, SMALL + "[convergence]\nparameter = \"dt\"\n"
                 "values = [4e-3, 2e-3, 1e-3, 5e-4]\n")
    cfg_text = open(cfg).read().replace("dt = 1e-3\n", "dt = 4e-3\n")
    open(cfg, "w").write(cfg_text)
    assert cli.main(["convergence", "--config", cfg, "--out", str(tmp_path)]) == 0
    _, diffs = read_rows(tmp_path / "convergence_differences.csv")
    _, ratios = read_rows(tmp_path / "convergence_ratios.csv")
    assert len(diffs) == 3 and len(ratios) == 2
    for row in ratios:
        assert 1.5 < row["rho_ratio"] < 2.5


def test_empty_sweep(tmp_path):
    assert cli.main(["sweep", "--config", _write(tmp_path, SMALL), "--out", str(tmp_path)]) == 0
    header, rows = read_rows(tmp_path / "sweep.csv")
    assert rows == [] and header[0] == "point"


def test_sweep_records_failed_points(tmp_path, monkeypatch):
    monkeypatch.setenv("CHS_DYNBC_JOBS", "2")
    cfg = _write(tmp_path, SMALL + '[sweep.grid]\n"potential.bulk" = ["regular", "logarithmic"]\n'
                 '"potential.c" = [0.5]\n')
    assert cli.main(["sweep", "--config", cfg, "--out", str(tmp_path)]) == cli.EXIT_SOLVER
    _, rows = read_rows(tmp_path / "sweep.csv")
    assert [r["status"] for r in rows] == ["ok", "config_error"]
    assert (tmp_path / "point_0000" / "timeseries.csv").exists()


def test_jobs_environment_override(monkeypatch):
    monkeypatch.setenv("CHS_DYNBC_JOBS", "3")
    assert cli._jobs(1) == 3
    monkeypatch.delenv("CHS_DYNBC_JOBS")
    assert cli._jobs(2) == 2


def test_default_convergence_emits_rho_and_mu_ratios(tmp_path):
    # default refinement is dt in {1e-2, 5e-3, 2.5e-3}
    assert cli.main(["convergence", "--out", str(tmp_path)]) == 0
    header, ratios = read_rows(tmp_path / "convergence_ratios.csv")
    assert len(ratios) == 1
    assert np.isfinite(ratios[0]["rho_ratio"]) and np.isfinite(ratios[0]["mu_ratio"])
