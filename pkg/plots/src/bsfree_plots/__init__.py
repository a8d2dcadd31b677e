"""Figures from bsfree run artifacts.

Reads only the documented CSV schemas (snapshots, reports, free-boundary
tables); never imports the solver package, so figures can be regenerated
from shipped artifacts alone.
"""

from .figures import (
    plot_comparison,
    plot_free_boundary,
    plot_surface_overlay,
    plot_surface_traces,
    plot_sweep,
)
from .manifest import ManifestError, PlotManifest, load_manifest, render_manifest
from .schemas import (
    SchemaError,
    read_comparison,
    read_free_boundary,
    read_snapshot,
    read_study_report,
    read_sweep_report,
)

__version__ = "0.1.0"

__all__ = [
    "ManifestError",
    "PlotManifest",
    "SchemaError",
    "load_manifest",
    "plot_comparison",
    "plot_free_boundary",
    "plot_surface_overlay",
    "plot_surface_traces",
    "plot_sweep",
    "read_comparison",
    "read_free_boundary",
    "read_snapshot",
    "read_study_report",
    "read_sweep_report",
    "render_manifest",
]
