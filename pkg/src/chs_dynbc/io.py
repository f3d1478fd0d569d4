"""CSV, legacy VTK and failure-record writers.

All CSV goes through the ``csv`` module (RFC 4180 quoting, CRLF line ends)
and floats are written with 17 significant digits so that re-reading them
gives back the same doubles.
"""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .diagnostics.trajectory import CSV_COLUMNS, Trajectory
from .discretization import Mesh

SNAPSHOT_FIELDS = ("mu", "rho", "xi")


def format_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return format(v, ".17g")
    return "" if v is None else str(v)


def write_rows(path, columns: Sequence[str], rows: Iterable[Mapping]) -> Path:
    """Write dict rows under a fixed header; missing keys become empty cells."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            extra = set(row) - set(columns)
            if extra:
                raise KeyError(f"row has columns outside the header: {sorted(extra)}")
            writer.writerow([format_value(row.get(c)) for c in columns])
    return path


def read_rows(path) -> tuple:
    """(header, rows) with every numeric-looking cell converted to float."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = []
        for raw in reader:
            row = {}
            for key, cell in zip(header, raw):
                try:
                    row[key] = float(cell)
                except ValueError:
                    row[key] = cell
            rows.append(row)
    return header, rows


def write_timeseries(path, traj: Trajectory) -> Path:
    return write_rows(path, CSV_COLUMNS, traj.rows())


def _coordinate_columns(mesh: Mesh) -> list:
    return ["x", "y"][: mesh.dim]


def write_mesh_csv(path, mesh: Mesh) -> Path:
    """node_id, coordinates, boundary flag."""
    return write_snapshot(path, mesh, {})


def write_snapshot(path, mesh: Mesh, fields: Mapping[str, np.ndarray]) -> Path:
    """One row per node: node_id, coordinates, boundary flag, then the fields."""
    coords = _coordinate_columns(mesh)
    columns = ["node_id", *coords, "boundary", *fields]
    on_boundary = np.zeros(mesh.n_nodes, dtype=bool)
    on_boundary[mesh.boundary] = True
    for name, values in fields.items():
        if np.shape(values) != (mesh.n_nodes,):
            raise ValueError(f"field {name!r} is not a nodal vector")
    rows = []
    for i in range(mesh.n_nodes):
        row = {"node_id": i, "boundary": bool(on_boundary[i])}
        row.update({c: mesh.nodes[i, k] for k, c in enumerate(coords)})
        row.update({name: values[i] for name, values in fields.items()})
        rows.append(row)
    return write_rows(path, columns, rows)


def read_nodal_csv(path, column: str, n_nodes: Optional[int] = None) -> np.ndarray:
    """Nodal vector from a snapshot-style CSV (rows ordered by node_id)."""
    header, rows = read_rows(path)
    if column not in header:
        raise KeyError(f"{path}: no column {column!r} (have {', '.join(header)})")
    if "node_id" in header:
        rows = sorted(rows, key=lambda r: r["node_id"])
    values = np.array([r[column] for r in rows], dtype=float)
    if n_nodes is not None and values.size != n_nodes:
        raise ValueError(f"{path}: {values.size} values for a mesh with {n_nodes} nodes")
    return values


def write_vtk(path, mesh: Mesh, fields: Mapping[str, np.ndarray], title: str = "chs_dynbc") -> Path:
    """Legacy ASCII VTK unstructured grid with nodal scalar fields."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    pts = np.zeros((mesh.n_nodes, 3))
    pts[:, : mesh.dim] = mesh.nodes
    cells = mesh.elements
    k = cells.shape[1]
    cell_type = 3 if mesh.dim == 1 else 5   # VTK_LINE, VTK_TRIANGLE
    lines = ["# vtk DataFile Version 3.0", title[:255], "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {mesh.n_nodes} double"]
    lines += [" ".join(format(c, ".17g") for c in p) for p in pts]
    lines.append(f"CELLS {cells.shape[0]} {cells.shape[0] * (k + 1)}")
    lines += [f"{k} " + " ".join(str(int(i)) for i in c) for c in cells]
    lines.append(f"CELL_TYPES {cells.shape[0]}")
    lines += [str(cell_type)] * cells.shape[0]
    if fields:
        lines.append(f"POINT_DATA {mesh.n_nodes}")
        for name, values in fields.items():
            lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
            lines += [format(float(v), ".17g") for v in values]
    path.write_text("\n".join(lines) + "\n", encoding="ascii")
    return path


def write_failure(path, kind: str, message: str, **context) -> Path:
    """Machine-readable record of an aborted run."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    record = {"status": "failed", "kind": kind, "message": message, **context}
    path.write_text(json.dumps(record, indent=2, sort_keys=True, default=str) + "\n",
                    encoding="utf-8")
    return path
