"""Manifest loading, validation, and end-to-end rendering (CLI included)."""

import json
import shutil
from pathlib import Path

import pytest

from bsfree_plots.cli import main
from bsfree_plots.manifest import ManifestError, load_manifest, render_manifest
from bsfree_plots.schemas import SchemaError

REFERENCE = Path(__file__).parents[1] / "reference"


def test_reference_manifest_loads() -> None:
    manifest = load_manifest(REFERENCE / "manifest.json")
    assert len(manifest.entries) == 6
    kinds = {entry.kind for entry in manifest.entries}
    assert kinds == {"surface-traces", "surface-overlay", "comparison", "sweep", "free-boundary"}


def test_render_reference_manifest(tmp_path) -> None:
    written = render_manifest(REFERENCE / "manifest.json", out_dir=tmp_path)
    assert len(written) == 6
    for path in written:
        assert path.exists()
        assert path.stat().st_size > 2000
    again = render_manifest(REFERENCE / "manifest.json", out_dir=tmp_path / "again")
    for first, second in zip(written, again):
        assert first.read_bytes() == second.read_bytes()


def test_manifest_rejects_missing_input(tmp_path) -> None:
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"plots": [
        {"kind": "sweep", "inputs": ["absent.csv"], "out": "x.png"}
    ]}))
    with pytest.raises(ManifestError, match="does not exist"):
        load_manifest(path)


def test_manifest_rejects_unknown_kind(tmp_path) -> None:
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"plots": [
        {"kind": "pie", "inputs": ["a.csv"], "out": "x.png"}
    ]}))
    with pytest.raises(ManifestError, match="unknown kind 'pie'"):
        load_manifest(path)


def test_manifest_rejects_mismatched_schema(tmp_path) -> None:
    shutil.copy(REFERENCE / "study_report.csv", tmp_path / "report.csv")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"plots": [
        {"kind": "sweep", "inputs": ["report.csv"], "out": "x.png"}
    ]}))
    with pytest.raises(SchemaError, match="expected sweep report header"):
        load_manifest(path)


def test_manifest_requires_per_kind_options(tmp_path) -> None:
    snap = REFERENCE / "evi" / "snapshot_000.csv"
    shutil.copy(snap, tmp_path / "snapshot_000.csv")
    path = tmp_path / "manifest.json"
    path.write_text(json.dumps({"plots": [
        {"kind": "surface-overlay", "inputs": ["snapshot_000.csv"], "out": "x.png"}
    ]}))
    with pytest.raises(ManifestError, match="needs options.labels"):
        load_manifest(path)

    path.write_text(json.dumps({"plots": [
        {"kind": "free-boundary", "inputs": ["snapshot_000.csv"], "out": "x.png"}
    ]}))
    with pytest.raises(ManifestError, match="needs options.times"):
        load_manifest(path)


def test_manifest_rejects_bad_json(tmp_path) -> None:
    path = tmp_path / "manifest.json"
    path.write_text("{nope")
    with pytest.raises(ManifestError, match="not valid JSON"):
        load_manifest(path)


def test_cli_manifest_shorthand(tmp_path, capsys) -> None:
    code = main([str(REFERENCE / "manifest.json"), "--out-dir", str(tmp_path)])
    assert code == 0
    out = capsys.readouterr().out
    assert out.count("wrote ") == 6
    assert (tmp_path / "figures" / "contact_arcs.png").exists()


def test_cli_single_figure(tmp_path, capsys) -> None:
    code = main([
        "sweep",
        str(REFERENCE / "sweep" / "sweep_report.csv"),
        "--out",
        str(tmp_path / "sweep.png"),
    ])
    assert code == 0
    assert (tmp_path / "sweep.png").stat().st_size > 2000


def test_cli_reports_schema_errors(tmp_path, capsys) -> None:
    code = main([
        "sweep",
        str(REFERENCE / "study_report.csv"),
        "--out",
        str(tmp_path / "x.png"),
    ])
    assert code == 2
    assert "expected sweep report header" in capsys.readouterr().err
    assert not (tmp_path / "x.png").exists()
