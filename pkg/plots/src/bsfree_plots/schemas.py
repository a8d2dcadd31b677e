"""Readers for the run-artifact CSV schemas.

Each reader checks the exact header before touching the rows and raises
:class:`SchemaError` naming the file, so a figure never renders from a
file that merely looks similar.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SNAPSHOT_HEADER = ["time", "node_kind", "node_id", "x", "y", "value_u", "value_w"]
SWEEP_HEADER = ["eps", "time", "l2_bulk", "l2_surface", "overlap"]
STUDY_HEADER = ["level", "n_vertices", "h_max", "time", "l2_bulk", "l2_surface"]
COMPARISON_HEADER = ["time", "l2_bulk", "l2_surface", "overlap_a", "overlap_b"]
FREE_BOUNDARY_HEADER = ["loop_id", "theta_start", "theta_end", "arclength"]


class SchemaError(Exception):
    """An artifact file does not match its documented schema."""


@dataclass(frozen=True)
class Snapshot:
    """Surface rows of one field snapshot, sorted by angle."""

    time: float
    angle: np.ndarray
    value_u: np.ndarray
    value_w: np.ndarray
    n_bulk_rows: int


def _rows(path: Path, expected_header: list[str], kind: str) -> list[list[str]]:
    try:
        with open(path, newline="") as handle:
            reader = csv.reader(handle)
            rows = [row for row in reader if row and not row[0].startswith("#")]
    except OSError as exc:
        raise SchemaError(f"{path}: {exc.strerror or exc}") from exc
    if not rows or rows[0] != expected_header:
        got = ",".join(rows[0]) if rows else "<empty file>"
        raise SchemaError(
            f"{path}: expected {kind} header {','.join(expected_header)!r}, got {got!r}"
        )
    return rows[1:]


def _floats(path: Path, rows: list[list[str]], width: int) -> np.ndarray:
    try:
        return np.array([[float(cell) for cell in row] for row in rows], dtype=float).reshape(
            len(rows), width
        )
    except ValueError as exc:
        raise SchemaError(f"{path}: non-numeric row ({exc})") from exc


def read_snapshot(path) -> Snapshot:
    """Surface trace of one ``snapshot_NNN.csv``."""
    path = Path(path)
    rows = _rows(path, SNAPSHOT_HEADER, "snapshot")
    angle, u, w = [], [], []
    n_bulk = 0
    time = None
    for line_no, row in enumerate(rows, start=2):
        if len(row) != 7:
            raise SchemaError(f"{path}:{line_no}: expected 7 columns, found {len(row)}")
        try:
            t = float(row[0])
        except ValueError as exc:
            raise SchemaError(f"{path}:{line_no}: bad time {row[0]!r}") from exc
        if time is None:
            time = t
        elif t != time:
            raise SchemaError(f"{path}:{line_no}: mixed snapshot times {time} and {t}")
        kind = row[1]
        if kind == "bulk":
            n_bulk += 1
            continue
        if kind != "surface":
            raise SchemaError(f"{path}:{line_no}: unknown node kind {kind!r}")
        try:
            x, y = float(row[3]), float(row[4])
            u_val, w_val = float(row[5]), float(row[6])
        except ValueError as exc:
            raise SchemaError(f"{path}:{line_no}: non-numeric surface row") from exc
        angle.append(np.arctan2(y, x) % (2.0 * np.pi))
        u.append(u_val)
        w.append(w_val)
    if time is None:
        raise SchemaError(f"{path}: snapshot has no data rows")
    order = np.argsort(np.asarray(angle))
    return Snapshot(
        time=time,
        angle=np.asarray(angle)[order],
        value_u=np.asarray(u)[order],
        value_w=np.asarray(w)[order],
        n_bulk_rows=n_bulk,
    )


def read_sweep_report(path) -> np.ndarray:
    """Rows of ``sweep_report.csv`` as a float array."""
    path = Path(path)
    return _floats(path, _rows(path, SWEEP_HEADER, "sweep report"), 5)


def read_study_report(path) -> np.ndarray:
    """Rows of ``study_report.csv`` as a float array."""
    path = Path(path)
    return _floats(path, _rows(path, STUDY_HEADER, "study report"), 6)


def read_comparison(path) -> np.ndarray:
    """Rows of a run-vs-run ``comparison.csv`` as a float array."""
    path = Path(path)
    return _floats(path, _rows(path, COMPARISON_HEADER, "comparison"), 5)


def read_free_boundary(path) -> np.ndarray:
    """Contact arcs of one ``freeboundary_NNN.csv``; may be empty."""
    path = Path(path)
    rows = _rows(path, FREE_BOUNDARY_HEADER, "free boundary")
    if not rows:
        return np.empty((0, 4))
    return _floats(path, rows, 4)
