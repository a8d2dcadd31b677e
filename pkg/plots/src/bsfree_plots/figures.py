"""The figure renderers.

All output is written through one helper with a fixed size and no
varying metadata, so rerendering the same inputs yields byte-identical
files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .schemas import (
    SchemaError,
    read_comparison,
    read_free_boundary,
    read_snapshot,
    read_study_report,
    read_sweep_report,
)

TWO_PI = 2.0 * np.pi


def _save(fig, out_path) -> Path:
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return out_path


def _closed(angle: np.ndarray, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    # repeat the first sample at angle + 2*pi so the loop visibly closes
    return np.append(angle, angle[0] + TWO_PI), np.append(values, values[0])


def plot_surface_traces(snapshot_paths, out_path) -> Path:
    """One panel per snapshot: U (black) and W (red) against angle."""
    snapshots = [read_snapshot(p) for p in snapshot_paths]
    for path, snap in zip(snapshot_paths, snapshots):
        if snap.angle.size == 0:
            raise SchemaError(f"{path}: snapshot has no surface rows to trace")
    fig, axes = plt.subplots(
        1, len(snapshots), figsize=(4.0 * len(snapshots), 3.2), sharey=True, squeeze=False
    )
    for ax, snap in zip(axes[0], snapshots):
        ax.plot(*_closed(snap.angle, snap.value_u), color="black", label="U")
        ax.plot(*_closed(snap.angle, snap.value_w), color="red", label="W")
        ax.set_title(f"t = {snap.time:g}")
        ax.set_xlabel("angle")
        ax.set_xlim(0.0, TWO_PI)
    axes[0][0].set_ylabel("surface trace")
    axes[0][0].legend(loc="upper right")
    fig.tight_layout()
    return _save(fig, out_path)


def plot_surface_overlay(snapshot_paths, labels, out_path) -> Path:
    """Traces of several runs at a matching time in one panel.

    U is drawn solid and W dashed, one color per run; used to show the
    overlap region shrinking as the reaction speeds up.
    """
    if len(labels) != len(snapshot_paths):
        raise ValueError("need one label per snapshot")
    snapshots = [read_snapshot(p) for p in snapshot_paths]
    for path, snap in zip(snapshot_paths, snapshots):
        if snap.angle.size == 0:
            raise SchemaError(f"{path}: snapshot has no surface rows to trace")
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    colors = plt.rcParams["axes.prop_cycle"].by_key()["color"]
    for i, (snap, label) in enumerate(zip(snapshots, labels)):
        color = colors[i % len(colors)]
        ax.plot(*_closed(snap.angle, snap.value_u), color=color, label=f"U, {label}")
        ax.plot(*_closed(snap.angle, snap.value_w), color=color, linestyle="--", label=f"W, {label}")
    ax.set_xlim(0.0, TWO_PI)
    ax.set_xlabel("angle")
    ax.set_ylabel(f"surface trace at t = {snapshots[0].time:g}")
    ax.legend(loc="upper right", fontsize="small")
    fig.tight_layout()
    return _save(fig, out_path)


def plot_comparison(report_path, out_path) -> Path:
    """Discrepancy-vs-time curves from a comparison or study report."""
    try:
        rows = read_study_report(report_path)
        study = True
    except SchemaError:
        rows = read_comparison(report_path)
        study = False

    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    if study:
        for level in sorted(set(rows[:, 0])):
            sub = rows[rows[:, 0] == level]
            sub = sub[np.argsort(sub[:, 3])]
            label = f"level {int(level)} vs finest"
            ax.plot(sub[:, 3], sub[:, 5], marker="o", label=f"surface, {label}")
            ax.plot(sub[:, 3], sub[:, 4], marker="s", linestyle="--", label=f"bulk, {label}")
    else:
        rows = rows[np.argsort(rows[:, 0])]
        ax.plot(rows[:, 0], rows[:, 2], marker="o", color="red", label="surface")
        ax.plot(rows[:, 0], rows[:, 1], marker="s", linestyle="--", color="black", label="bulk")
    ax.set_xlabel("time")
    ax.set_ylabel("L2 discrepancy")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, out_path)


def plot_sweep(report_path, out_path) -> Path:
    """Distance to the instantaneous-reaction limit per reaction speed."""
    rows = read_sweep_report(report_path)
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for eps in sorted(set(rows[:, 0]), reverse=True):
        sub = rows[rows[:, 0] == eps]
        sub = sub[np.argsort(sub[:, 1])]
        ax.semilogy(sub[:, 1], sub[:, 3], marker="o", label=f"eps = {eps:g}")
    ax.set_xlabel("time")
    ax.set_ylabel("L2(surface) distance to limit")
    ax.legend(fontsize="small")
    fig.tight_layout()
    return _save(fig, out_path)


def plot_free_boundary(arc_paths, times, out_path) -> Path:
    """Contact arcs over time: one horizontal bar per arc at its time."""
    if len(times) != len(arc_paths):
        raise ValueError("need one time per arc file")
    fig, ax = plt.subplots(figsize=(5.6, 3.6))
    for path, t in zip(arc_paths, times):
        arcs = read_free_boundary(path)
        for loop_id, start, end, _length in arcs:
            if end >= start:
                ax.hlines(t, start, end, color="black", linewidth=3)
            else:
                # arc wrapping through angle zero
                ax.hlines(t, start, TWO_PI, color="black", linewidth=3)
                ax.hlines(t, 0.0, end, color="black", linewidth=3)
    ax.set_xlim(0.0, TWO_PI)
    ax.set_ylim(0.0, max(times) * 1.1)
    ax.set_xlabel("angle")
    ax.set_ylabel("time")
    ax.set_title("contact region")
    fig.tight_layout()
    return _save(fig, out_path)
