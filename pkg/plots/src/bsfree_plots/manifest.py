"""Manifest-driven figure generation.

A manifest is a JSON file listing (inputs, kind, output, options)
entries; paths are resolved against the manifest's directory and every
input must parse under its schema before anything renders.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import figures
from .schemas import (
    read_comparison,
    read_free_boundary,
    read_snapshot,
    read_study_report,
    read_sweep_report,
)


class ManifestError(Exception):
    """The manifest itself is malformed or references missing inputs."""


@dataclass(frozen=True)
class PlotEntry:
    kind: str
    inputs: tuple[Path, ...]
    out: Path
    options: dict = field(default_factory=dict)


@dataclass(frozen=True)
class PlotManifest:
    base_dir: Path
    entries: tuple[PlotEntry, ...]


def _validate_inputs(entry: PlotEntry) -> None:
    for path in entry.inputs:
        if not path.exists():
            raise ManifestError(f"{entry.out.name}: input {path} does not exist")
    if entry.kind in ("surface-traces", "surface-overlay"):
        for path in entry.inputs:
            read_snapshot(path)
    elif entry.kind == "comparison":
        try:
            read_study_report(entry.inputs[0])
        except Exception:
            read_comparison(entry.inputs[0])
    elif entry.kind == "sweep":
        read_sweep_report(entry.inputs[0])
    elif entry.kind == "free-boundary":
        for path in entry.inputs:
            read_free_boundary(path)


_KINDS = ("surface-traces", "surface-overlay", "comparison", "sweep", "free-boundary")


def load_manifest(path) -> PlotManifest:
    """Parse and validate a manifest; every input must exist and parse."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except OSError as exc:
        raise ManifestError(f"{path}: {exc.strerror or exc}") from exc
    except json.JSONDecodeError as exc:
        raise ManifestError(f"{path}: not valid JSON ({exc})") from exc
    if not isinstance(raw, dict) or not isinstance(raw.get("plots"), list):
        raise ManifestError(f"{path}: manifest must be an object with a 'plots' list")

    base = path.parent
    entries = []
    for i, item in enumerate(raw["plots"]):
        where = f"{path}: plots[{i}]"
        if not isinstance(item, dict):
            raise ManifestError(f"{where}: must be an object")
        kind = item.get("kind")
        if kind not in _KINDS:
            raise ManifestError(f"{where}: unknown kind {kind!r}, expected one of {_KINDS}")
        inputs = item.get("inputs")
        if isinstance(inputs, str):
            inputs = [inputs]
        if not isinstance(inputs, list) or not inputs:
            raise ManifestError(f"{where}: 'inputs' must be a non-empty list of paths")
        out = item.get("out")
        if not isinstance(out, str):
            raise ManifestError(f"{where}: 'out' must be a path string")
        options = item.get("options", {})
        if not isinstance(options, dict):
            raise ManifestError(f"{where}: 'options' must be an object")
        entry = PlotEntry(
            kind=kind,
            inputs=tuple(base / p for p in inputs),
            out=Path(out),
            options=options,
        )
        if kind == "surface-overlay" and len(options.get("labels", ())) != len(entry.inputs):
            raise ManifestError(f"{where}: surface-overlay needs options.labels, one per input")
        if kind == "free-boundary":
            times = options.get("times")
            if not isinstance(times, list) or len(times) != len(entry.inputs):
                raise ManifestError(f"{where}: free-boundary needs options.times, one per input")
        _validate_inputs(entry)
        entries.append(entry)
    return PlotManifest(base_dir=base, entries=tuple(entries))


def render_manifest(manifest, out_dir=None) -> list[Path]:
    """Render every entry; returns the written figure paths.

    Relative outputs land under ``out_dir`` (default: the manifest's
    directory).
    """
    if not isinstance(manifest, PlotManifest):
        manifest = load_manifest(manifest)
    root = Path(out_dir) if out_dir is not None else manifest.base_dir
    written = []
    for entry in manifest.entries:
        out = entry.out if entry.out.is_absolute() else root / entry.out
        if entry.kind == "surface-traces":
            written.append(figures.plot_surface_traces(entry.inputs, out))
        elif entry.kind == "surface-overlay":
            written.append(
                figures.plot_surface_overlay(entry.inputs, entry.options["labels"], out)
            )
        elif entry.kind == "comparison":
            written.append(figures.plot_comparison(entry.inputs[0], out))
        elif entry.kind == "sweep":
            written.append(figures.plot_sweep(entry.inputs[0], out))
        elif entry.kind == "free-boundary":
            written.append(
                figures.plot_free_boundary(entry.inputs, entry.options["times"], out)
            )
    return written
