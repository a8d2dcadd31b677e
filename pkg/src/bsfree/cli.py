"""Command line front end.

Exit codes: 0 on success, 1 when a solver or comparison fails at run
time, 2 for bad configuration or input files.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .experiments import (
    ConfigError,
    PRESETS,
    compare_runs,
    load_config,
    list_presets,
    preset,
    run_coupled_experiment,
    run_dtn_check,
    run_eps_sweep,
    run_evi_experiment,
    run_pvi_experiment,
    run_refine_study,
    validate_config,
    DTN_BOUNDS,
)
from .freeboundary import DEFAULT_CONTACT_THRESHOLD, extract_free_boundary
from .io import read_vi_csv, write_free_boundary_csv
from .linalg import SolverError
from .mesh import AnnulusSpec, MeshError, generate_annulus, read_mesh, refine_uniform, write_mesh


def _config_from_args(args, expected_kind: str) -> dict:
    if (args.config is None) == (args.preset is None):
        raise ConfigError("exactly one of --config or --preset is required")
    config = load_config(args.config) if args.config else preset(args.preset)
    config = validate_config(config)
    if config["kind"] != expected_kind:
        raise ConfigError(
            f"kind: this subcommand runs {expected_kind!r} configs, got {config['kind']!r}"
        )
    return config


def _extra(args) -> dict | None:
    return {"seed": args.seed} if args.seed is not None else None


def _cmd_mesh_gen(args) -> int:
    spec = AnnulusSpec(
        r_inner=args.r_inner,
        r_outer=args.r_outer,
        n_angular=args.n_angular,
        n_radial=args.n_radial,
        grading=args.grading,
    )
    mesh = generate_annulus(spec)
    write_mesh(args.out, mesh)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return 0


def _cmd_mesh_import(args) -> int:
    mesh = read_mesh(args.source)
    write_mesh(args.out, mesh)
    print(
        f"validated {args.source}: {mesh.n_vertices} vertices, "
        f"{mesh.n_surface} surface nodes; rewrote to {args.out}"
    )
    return 0


def _cmd_mesh_refine(args) -> int:
    mesh = read_mesh(args.source)
    for _ in range(args.levels):
        mesh = refine_uniform(mesh, project_boundary=args.project_boundary)
    write_mesh(args.out, mesh)
    print(f"wrote {args.out}: {mesh.n_vertices} vertices, {mesh.n_triangles} triangles")
    return 0


def _cmd_run(args) -> int:
    config = _config_from_args(args, args.run_kind)
    runner = {
        "coupled": run_coupled_experiment,
        "evi": run_evi_experiment,
        "pvi": run_pvi_experiment,
    }[args.run_kind]
    runner(config, args.out, extra_resolved=_extra(args))
    print(f"{args.run_kind} run complete: artifacts in {args.out}")
    return 0


def _cmd_sweep_eps(args) -> int:
    config = _config_from_args(args, "eps-sweep")
    rows = run_eps_sweep(config, args.out, threads=args.threads, extra_resolved=_extra(args))
    print(f"sweep complete: {len(rows)} report rows in {args.out}/sweep_report.csv")
    return 0


def _cmd_study_refine(args) -> int:
    config = _config_from_args(args, "refine-study")
    rows = run_refine_study(config, args.out, extra_resolved=_extra(args))
    print(f"study complete: {len(rows)} report rows in {args.out}/study_report.csv")
    return 0


def _cmd_check_dtn(args) -> int:
    config = _config_from_args(args, "dtn-check")
    report = run_dtn_check(config, args.out, extra_resolved=_extra(args))
    for entry in report["meshes"]:
        for key in sorted(entry["pass"]):
            verdict = "PASS" if entry["pass"][key] else "FAIL"
            print(
                f"{entry['name']} {key}: {entry[key]:.3e} "
                f"(bound {DTN_BOUNDS[key]:g}) {verdict}"
            )
    print("dtn check: " + ("PASS" if report["pass"] else "FAIL"))
    return 0 if report["pass"] else 1


def _cmd_compare(args) -> int:
    rows = compare_runs(args.dir_a, args.dir_b, times=args.times, out_path=args.out)
    print(f"wrote {args.out}: {len(rows)} rows")
    return 0


def _cmd_freeboundary(args) -> int:
    mesh = read_mesh(f"{args.run_dir}/mesh.txt")
    vi = read_vi_csv(f"{args.run_dir}/vi_{args.index:03d}.csv")
    z = np.ones(mesh.n_vertices)
    z[vi["node_id"]] = vi["z"]
    arcs = extract_free_boundary(mesh, z, args.threshold)
    write_free_boundary_csv(args.out, arcs)
    print(f"wrote {args.out}: {len(arcs)} contact arcs")
    return 0


def _cmd_presets(args) -> int:
    for name in list_presets():
        print(f"{name}: {PRESETS[name]['kind']}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bsfree",
        description="Coupled bulk-surface evolutions and their free-boundary limits.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="path to a JSON configuration")
    common.add_argument("--preset", help="name of a built-in configuration")
    common.add_argument("--out", required=True, help="output directory for artifacts")
    common.add_argument("--threads", type=int, default=1, help="worker processes for sweeps")
    common.add_argument("--seed", type=int, default=None, help="recorded in the config echo")

    mesh = sub.add_parser("mesh", help="generate, validate, or refine meshes")
    mesh_sub = mesh.add_subparsers(dest="mesh_command", required=True)
    gen = mesh_sub.add_parser("gen", help="generate an annulus")
    gen.add_argument("--r-inner", type=float, default=1.0)
    gen.add_argument("--r-outer", type=float, default=2.0)
    gen.add_argument("--n-angular", type=int, default=32)
    gen.add_argument("--n-radial", type=int, default=4)
    gen.add_argument("--grading", type=float, default=1.0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(handler=_cmd_mesh_gen)
    imp = mesh_sub.add_parser("import", help="validate a mesh file and rewrite it")
    imp.add_argument("source")
    imp.add_argument("--out", required=True)
    imp.set_defaults(handler=_cmd_mesh_import)
    ref = mesh_sub.add_parser("refine", help="red-refine a mesh file")
    ref.add_argument("source")
    ref.add_argument("--out", required=True)
    ref.add_argument("--levels", type=int, default=1)
    ref.add_argument("--project-boundary", action="store_true")
    ref.set_defaults(handler=_cmd_mesh_refine)

    run = sub.add_parser("run", help="run a single experiment")
    run_sub = run.add_subparsers(dest="run_kind", required=True)
    for kind, text in (
        ("coupled", "evolve the coupled bulk-surface system"),
        ("evi", "stationary obstacle problem at given times"),
        ("pvi", "time-stepped obstacle problem"),
    ):
        p = run_sub.add_parser(kind, parents=[common], help=text)
        p.set_defaults(handler=_cmd_run)

    sweep = sub.add_parser("sweep", help="parameter sweeps")
    sweep_sub = sweep.add_subparsers(dest="sweep_command", required=True)
    eps = sweep_sub.add_parser(
        "eps", parents=[common], help="reaction-speed sweep against the obstacle limit"
    )
    eps.set_defaults(handler=_cmd_sweep_eps)

    study = sub.add_parser("study", help="convergence studies")
    study_sub = study.add_subparsers(dest="study_command", required=True)
    refine = study_sub.add_parser(
        "refine", parents=[common], help="self-convergence on nested refinements"
    )
    refine.set_defaults(handler=_cmd_study_refine)

    check = sub.add_parser("check", help="internal consistency checks")
    check_sub = check.add_subparsers(dest="check_command", required=True)
    dtn = check_sub.add_parser(
        "dtn", parents=[common], help="surface-reduced route against the full solve"
    )
    dtn.set_defaults(handler=_cmd_check_dtn)

    compare = sub.add_parser("compare", help="compare the snapshots of two run directories")
    compare.add_argument("dir_a")
    compare.add_argument("dir_b")
    compare.add_argument("--out", required=True, help="comparison CSV to write")
    compare.add_argument("--times", type=float, nargs="+", default=None)
    compare.set_defaults(handler=_cmd_compare)

    fb = sub.add_parser("freeboundary", help="extract contact arcs from a finished run")
    fb.add_argument("run_dir")
    fb.add_argument("--index", type=int, default=0, help="which vi_NNN.csv to read")
    fb.add_argument("--threshold", type=float, default=DEFAULT_CONTACT_THRESHOLD)
    fb.add_argument("--out", required=True)
    fb.set_defaults(handler=_cmd_freeboundary)

    presets = sub.add_parser("presets", help="list built-in configurations")
    presets.set_defaults(handler=_cmd_presets)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MeshError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
