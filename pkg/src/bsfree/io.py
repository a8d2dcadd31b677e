"""Writers and readers for the on-disk artifact formats.

All text output uses shortest round-trip float formatting and fixed row
order, so rerunning an experiment reproduces files byte for byte.
Schemas:

snapshot CSV    time,node_kind,node_id,x,y,value_u,value_w
                one row per mesh vertex; surface vertices carry
                ``node_kind=surface`` and a filled ``value_w``, all
                others leave it empty
diagnostics CSV step,time,minU,maxU,minW,maxW,Q,R_cum (row per step)
VI CSV          node_id,x,y,z,active,multiplier (surface nodes), with
                a trailing ``# summary`` comment carrying solver facts
free boundary   loop_id,theta_start,theta_end,arclength
VTK             legacy ASCII unstructured grid, point data ``U`` and
                ``W`` (``W`` zero off the surface)
"""

from __future__ import annotations

import csv
import io as _io
from pathlib import Path

import numpy as np
from scipy import sparse

from .coupled import DIAGNOSTIC_COLUMNS
from .freeboundary import FreeBoundaryArc, VIResult
from .mesh import Mesh

SNAPSHOT_COLUMNS = ("time", "node_kind", "node_id", "x", "y", "value_u", "value_w")
VI_COLUMNS = ("node_id", "x", "y", "z", "active", "multiplier")
FREE_BOUNDARY_COLUMNS = ("loop_id", "theta_start", "theta_end", "arclength")


def _fmt(value: float) -> str:
    return repr(float(value))


def write_snapshot_csv(path, mesh: Mesh, time: float, U: np.ndarray, W: np.ndarray) -> None:
    surface_index = mesh.surface_index()
    t = _fmt(time)
    rows = [",".join(SNAPSHOT_COLUMNS)]
    for node in range(mesh.n_vertices):
        x, y = mesh.vertices[node]
        s = surface_index[node]
        kind = "surface" if s >= 0 else "bulk"
        w = _fmt(W[s]) if s >= 0 else ""
        rows.append(f"{t},{kind},{node},{_fmt(x)},{_fmt(y)},{_fmt(U[node])},{w}")
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_snapshot_csv(path) -> dict:
    """Parse a snapshot file back into arrays keyed like the writer."""
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames != list(SNAPSHOT_COLUMNS):
            raise ValueError(f"{path}: unexpected snapshot header {reader.fieldnames}")
        records = list(reader)
    n = len(records)
    out = {
        "time": float(records[0]["time"]) if records else 0.0,
        "xy": np.empty((n, 2)),
        "U": np.empty(n),
        "node_kind": np.empty(n, dtype=object),
    }
    w_pairs: list[tuple[int, float]] = []
    for row in records:
        i = int(row["node_id"])
        out["xy"][i] = (float(row["x"]), float(row["y"]))
        out["U"][i] = float(row["value_u"])
        out["node_kind"][i] = row["node_kind"]
        if row["node_kind"] == "surface":
            w_pairs.append((i, float(row["value_w"])))
    out["surface_nodes"] = np.array([i for i, _ in w_pairs], dtype=np.int64)
    out["W"] = np.array([w for _, w in w_pairs])
    return out


def write_diagnostics_csv(path, diagnostics: np.ndarray) -> None:
    buf = _io.StringIO()
    buf.write(",".join(DIAGNOSTIC_COLUMNS) + "\n")
    for row in diagnostics:
        buf.write(str(int(row[0])))
        for value in row[1:]:
            buf.write("," + _fmt(value))
        buf.write("\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def read_diagnostics_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader)
        if header != list(DIAGNOSTIC_COLUMNS):
            raise ValueError(f"{path}: unexpected diagnostics header {header}")
        return np.array([[float(v) for v in row] for row in reader])


def write_vi_csv(path, mesh: Mesh, result: VIResult) -> None:
    rows = [",".join(VI_COLUMNS)]
    for local, node in enumerate(mesh.surface_nodes):
        x, y = mesh.vertices[node]
        rows.append(
            f"{node},{_fmt(x)},{_fmt(y)},{_fmt(result.z[node])},"
            f"{int(result.active[local])},{_fmt(result.multiplier[local])}"
        )
    rows.append(
        f"# summary: sweeps={result.sweeps} comp_residual={_fmt(result.comp_residual)} "
        f"active={int(result.active.sum())}/{mesh.n_surface}"
    )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def read_vi_csv(path) -> dict:
    """Parse an obstacle-solution file back into arrays keyed like the writer."""
    node_ids: list[int] = []
    z: list[float] = []
    active: list[bool] = []
    multiplier: list[float] = []
    with open(path, newline="", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header != list(VI_COLUMNS):
            raise ValueError(f"{path}: unexpected header {header}")
        for line in f:
            if line.startswith("#"):
                continue
            cells = line.strip().split(",")
            node_ids.append(int(cells[0]))
            z.append(float(cells[3]))
            active.append(cells[4] == "1")
            multiplier.append(float(cells[5]))
    return {
        "node_id": np.array(node_ids, dtype=np.int64),
        "z": np.array(z),
        "active": np.array(active, dtype=bool),
        "multiplier": np.array(multiplier),
    }


def write_free_boundary_csv(path, arcs: list[FreeBoundaryArc]) -> None:
    rows = [",".join(FREE_BOUNDARY_COLUMNS)]
    for arc in arcs:
        rows.append(
            f"{arc.loop_id},{_fmt(arc.theta_start)},{_fmt(arc.theta_end)},{_fmt(arc.arclength)}"
        )
    Path(path).write_text("\n".join(rows) + "\n", encoding="utf-8")


def write_vtk(path, mesh: Mesh, U: np.ndarray, W: np.ndarray | None = None, title: str = "bsfree fields") -> None:
    """Legacy ASCII VTK unstructured grid with point data."""
    buf = _io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write(title + "\n")
    buf.write("ASCII\nDATASET UNSTRUCTURED_GRID\n")
    n, m = mesh.n_vertices, mesh.n_triangles
    buf.write(f"POINTS {n} double\n")
    for x, y in mesh.vertices:
        buf.write(f"{_fmt(x)} {_fmt(y)} 0.0\n")
    buf.write(f"CELLS {m} {4 * m}\n")
    for a, b, c in mesh.triangles:
        buf.write(f"3 {a} {b} {c}\n")
    buf.write(f"CELL_TYPES {m}\n")
    buf.write("5\n" * m)
    buf.write(f"POINT_DATA {n}\n")
    buf.write("SCALARS U double 1\nLOOKUP_TABLE default\n")
    for value in U:
        buf.write(_fmt(value) + "\n")
    if W is not None:
        padded = np.zeros(n)
        padded[mesh.surface_nodes] = W
        buf.write("SCALARS W double 1\nLOOKUP_TABLE default\n")
        for value in padded:
            buf.write(_fmt(value) + "\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def write_matrix_market(path, A) -> None:
    """Coordinate MatrixMarket export for debugging sessions."""
    coo = sparse.coo_matrix(A)
    buf = _io.StringIO()
    buf.write("%%MatrixMarket matrix coordinate real general\n")
    buf.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
    order = np.lexsort((coo.col, coo.row))
    for k in order:
        buf.write(f"{coo.row[k] + 1} {coo.col[k] + 1} {_fmt(coo.data[k])}\n")
    Path(path).write_text(buf.getvalue(), encoding="utf-8")
