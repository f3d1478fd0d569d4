import csv
import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chs_dynbc.diagnostics.trajectory import CSV_COLUMNS
from chs_dynbc.discretization import build_disc_mesh, build_interval_mesh
from chs_dynbc.io import (format_value, read_nodal_csv, read_rows, write_failure, write_rows,
                          write_snapshot, write_timeseries, write_vtk)
from chs_dynbc.problems import reference_config, reference_problem
from chs_dynbc.stepper import run_simulation


def test_format_value():
    assert format_value(True) == "1" and format_value(np.False_) == "0"
    assert format_value(7) == "7"
    assert format_value(0.1) == "0.10000000000000001"
    assert format_value(math.inf) == "inf" and format_value(-math.inf) == "-inf"
    assert format_value(math.nan) == "nan"
    assert format_value(None) == ""


@given(st.lists(st.floats(allow_nan=False), min_size=1, max_size=20))
def test_float_round_trip_is_exact(tmp_path_factory, values):
    path = tmp_path_factory.mktemp("rt") / "v.csv"
    write_rows(path, ["v"], [{"v": v} for v in values])
    _, rows = read_rows(path)
    assert [r["v"] for r in rows] == values


def test_rfc4180_quoting(tmp_path):
    path = write_rows(tmp_path / "q.csv", ["name", "note"],
                      [{"name": "a,b", "note": 'say "hi"'}, {"name": "line\nbreak"}])
    raw = path.read_bytes()
    assert raw.startswith(b"name,note\r\n")
    assert b'"a,b","say ""hi"""' in raw
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[1] == ["a,b", 'say "hi"'] and rows[2] == ["line\nbreak", ""]


def test_write_rows_rejects_unknown_columns(tmp_path):
    with pytest.raises(KeyError):
        write_rows(tmp_path / "x.csv", ["a"], [{"a": 1, "b": 2}])


def test_timeseries_columns(tmp_path):
    problem = reference_problem(n=8)
    traj = run_simulation(reference_config(T=0.005, n_blocks=1), problem)
    header, rows = read_rows(write_timeseries(tmp_path / "ts.csv", traj))
    assert tuple(header) == CSV_COLUMNS
    assert len(rows) == len(traj)
    assert [r["step"] for r in rows] == list(range(len(traj)))
    np.testing.assert_array_equal([r["t"] for r in rows], traj.times)


@pytest.mark.parametrize("mesh", [build_interval_mesh(5), build_disc_mesh(1)])
def test_snapshot_round_trip(tmp_path, mesh):
    rng = np.random.default_rng(0)
    field = rng.normal(size=mesh.n_nodes)
    path = write_snapshot(tmp_path / "s.csv", mesh, {"rho": field})
    header, rows = read_rows(path)
    assert header[0] == "node_id" and header[-2:] == ["boundary", "rho"]
    assert sum(r["boundary"] for r in rows) == mesh.n_boundary
    np.testing.assert_array_equal(read_nodal_csv(path, "rho", mesh.n_nodes), field)
    with pytest.raises(KeyError):
        read_nodal_csv(path, "mu")
    with pytest.raises(ValueError):
        read_nodal_csv(path, "rho", mesh.n_nodes + 1)
    with pytest.raises(ValueError):
        write_snapshot(tmp_path / "bad.csv", mesh, {"rho": field[:-1]})


def test_vtk_structure(tmp_path):
    mesh = build_disc_mesh(1)
    vals = np.arange(mesh.n_nodes, dtype=float)
    lines = write_vtk(tmp_path / "m.vtk", mesh, {"mu": vals}).read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII" and lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == f"POINTS {mesh.n_nodes} double"
    ne = mesh.elements.shape[0]
    i = lines.index(f"CELLS {ne} {4 * ne}")
    assert all(line.startswith("3 ") for line in lines[i + 1: i + 1 + ne])
    j = lines.index(f"CELL_TYPES {ne}")
    assert set(lines[j + 1: j + 1 + ne]) == {"5"}
    k = lines.index(f"POINT_DATA {mesh.n_nodes}")
    assert lines[k + 1] == "SCALARS mu double 1"
    np.testing.assert_array_equal([float(v) for v in lines[k + 3:]], vals)


def test_vtk_interval_uses_lines(tmp_path):
    text = write_vtk(tmp_path / "i.vtk", build_interval_mesh(3), {}).read_text()
    assert "CELL_TYPES 3\n3\n3\n3\n" in text and "POINT_DATA" not in text


def test_failure_record(tmp_path):
    path = write_failure(tmp_path / "f.json", "NewtonError", "no convergence", t=0.25)
    record = json.loads(path.read_text())
    assert record == {"status": "failed", "kind": "NewtonError", "message": "no convergence",
                      "t": 0.25}
