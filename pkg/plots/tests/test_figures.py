"""Rendering: every figure kind produces a real, stable image."""

from pathlib import Path

import numpy as np
import pytest

from bsfree_plots.figures import (
    plot_comparison,
    plot_free_boundary,
    plot_surface_overlay,
    plot_surface_traces,
    plot_sweep,
)
from bsfree_plots.schemas import SchemaError, read_snapshot

REFERENCE = Path(__file__).parents[1] / "reference"

PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


def _check(path: Path) -> bytes:
    data = path.read_bytes()
    assert data.startswith(PNG_MAGIC)
    assert len(data) > 2000
    return data


def test_surface_traces(tmp_path) -> None:
    out = plot_surface_traces(
        [REFERENCE / "evi" / "snapshot_000.csv", REFERENCE / "evi" / "snapshot_001.csv"],
        tmp_path / "traces.png",
    )
    _check(out)


def test_surface_traces_rerender_is_byte_identical(tmp_path) -> None:
    inputs = [REFERENCE / "evi" / "snapshot_000.csv"]
    first = _check(plot_surface_traces(inputs, tmp_path / "a.png"))
    second = _check(plot_surface_traces(inputs, tmp_path / "b.png"))
    assert first == second


def test_surface_traces_need_surface_rows(tmp_path) -> None:
    bulk_only = tmp_path / "snapshot_000.csv"
    bulk_only.write_text(
        "time,node_kind,node_id,x,y,value_u,value_w\n0.1,bulk,0,1.5,0.0,1.0,\n"
    )
    with pytest.raises(SchemaError, match="no surface rows"):
        plot_surface_traces([bulk_only], tmp_path / "x.png")


def test_overlay_and_overlap_shrinks(tmp_path) -> None:
    coarse = REFERENCE / "sweep" / "eps_0.1" / "snapshot_000.csv"
    fine = REFERENCE / "sweep" / "eps_0.01" / "snapshot_000.csv"
    out = plot_surface_overlay([coarse, fine], ["eps = 0.1", "eps = 0.01"], tmp_path / "o.png")
    _check(out)

    # the data behind the figure: the pointwise U*W overlap shrinks with eps
    a, b = read_snapshot(coarse), read_snapshot(fine)
    assert float(np.sum(b.value_u * b.value_w)) < float(np.sum(a.value_u * a.value_w))

    with pytest.raises(ValueError, match="one label per snapshot"):
        plot_surface_overlay([coarse, fine], ["just one"], tmp_path / "y.png")


def test_comparison_from_study_report(tmp_path) -> None:
    _check(plot_comparison(REFERENCE / "study_report.csv", tmp_path / "study.png"))


def test_comparison_from_pairwise_report(tmp_path) -> None:
    _check(plot_comparison(REFERENCE / "comparison.csv", tmp_path / "pair.png"))


def test_comparison_zero_line_for_identical_runs(tmp_path) -> None:
    report = tmp_path / "comparison.csv"
    report.write_text(
        "time,l2_bulk,l2_surface,overlap_a,overlap_b\n"
        "0.1,0.0,0.0,0.5,0.5\n0.2,0.0,0.0,0.4,0.4\n"
    )
    _check(plot_comparison(report, tmp_path / "zero.png"))


def test_comparison_rejects_unknown_report(tmp_path) -> None:
    report = tmp_path / "report.csv"
    report.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        plot_comparison(report, tmp_path / "x.png")


def test_sweep_figure(tmp_path) -> None:
    _check(plot_sweep(REFERENCE / "sweep" / "sweep_report.csv", tmp_path / "sweep.png"))


def test_free_boundary_figure(tmp_path) -> None:
    out = plot_free_boundary(
        [REFERENCE / "evi" / "freeboundary_000.csv", REFERENCE / "evi" / "freeboundary_001.csv"],
        [0.3, 1.0],
        tmp_path / "arcs.png",
    )
    _check(out)

    with pytest.raises(ValueError, match="one time per arc file"):
        plot_free_boundary([REFERENCE / "evi" / "freeboundary_000.csv"], [0.3, 1.0], tmp_path / "z.png")


def test_free_boundary_wrapping_arc(tmp_path) -> None:
    arcs = tmp_path / "freeboundary_000.csv"
    arcs.write_text(
        "loop_id,theta_start,theta_end,arclength\n0,5.5,1.0,1.78\n"
    )
    _check(plot_free_boundary([arcs], [0.2], tmp_path / "wrap.png"))
