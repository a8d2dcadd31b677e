"""Command line front end: a manifest path, or one figure per subcommand."""

from __future__ import annotations

import argparse
import sys

from .figures import (
    plot_comparison,
    plot_free_boundary,
    plot_surface_overlay,
    plot_surface_traces,
    plot_sweep,
)
from .manifest import ManifestError, render_manifest
from .schemas import SchemaError

_SUBCOMMANDS = ("render", "traces", "overlay", "comparison", "sweep", "freeboundary")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsfree-plots",
        description="Regenerate figures from bsfree run artifacts.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    render = sub.add_parser("render", help="render every entry of a manifest")
    render.add_argument("manifest")
    render.add_argument("--out-dir", default=None, help="root for relative figure paths")

    traces = sub.add_parser("traces", help="surface traces, one panel per snapshot")
    traces.add_argument("snapshots", nargs="+")
    traces.add_argument("--out", required=True)

    overlay = sub.add_parser("overlay", help="overlaid surface traces of several runs")
    overlay.add_argument("snapshots", nargs="+")
    overlay.add_argument("--labels", nargs="+", required=True)
    overlay.add_argument("--out", required=True)

    comparison = sub.add_parser("comparison", help="discrepancy-vs-time curves")
    comparison.add_argument("report")
    comparison.add_argument("--out", required=True)

    sweep = sub.add_parser("sweep", help="distance-to-limit curves per reaction speed")
    sweep.add_argument("report")
    sweep.add_argument("--out", required=True)

    fb = sub.add_parser("freeboundary", help="contact arcs over time")
    fb.add_argument("arcs", nargs="+")
    fb.add_argument("--times", nargs="+", type=float, required=True)
    fb.add_argument("--out", required=True)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    # `bsfree-plots <manifest.json>` is shorthand for `render`
    if argv and argv[0] not in _SUBCOMMANDS and argv[0].endswith(".json"):
        argv = ["render", *argv]
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "render":
            for path in render_manifest(args.manifest, out_dir=args.out_dir):
                print(f"wrote {path}")
        elif args.command == "traces":
            print(f"wrote {plot_surface_traces(args.snapshots, args.out)}")
        elif args.command == "overlay":
            print(f"wrote {plot_surface_overlay(args.snapshots, args.labels, args.out)}")
        elif args.command == "comparison":
            print(f"wrote {plot_comparison(args.report, args.out)}")
        elif args.command == "sweep":
            print(f"wrote {plot_sweep(args.report, args.out)}")
        else:
            print(f"wrote {plot_free_boundary(args.arcs, args.times, args.out)}")
    except (ManifestError, SchemaError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
