"""Experiment configuration, presets, runners, and run comparison.

A configuration is a JSON object with ``"schema": 1`` and a ``"kind"``
from :data:`CONFIG_KINDS`.  Validation errors name the offending entry
by its JSON path (``params.delta_k: must be > 0``) so a bad file can be
fixed without reading source.  Every runner writes a self-contained
directory:

* ``config.json`` -- the input echoed back plus a ``resolved`` block
  (package version, resolved step size, mesh sizes), so a directory
  fully documents how it was produced
* ``mesh.txt`` -- the mesh in the native text format
* ``diagnostics.csv``, ``snapshot_NNN.csv`` / ``.vtk`` for evolutions
* ``vi_NNN.csv``, ``freeboundary_NNN.csv`` for obstacle solves
* a report file for the composite kinds (``sweep_report.csv``,
  ``study_report.csv``, ``dtn_report.json``)

Reruns with the same configuration and a single worker reproduce every
file byte for byte.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .assembly import bulk_mass, surface_mass
from .coupled import (
    DIAGNOSTIC_COLUMNS,
    DIRICHLET,
    FLUX_FREE,
    CoupledRun,
    ModelParams,
    run_coupled,
)
from .freeboundary import (
    DEFAULT_CONTACT_THRESHOLD,
    dtn_load,
    dtn_matrix,
    extract_free_boundary,
    recover_fields,
    solve_evi,
    solve_evi_via_dtn,
    PviProblem,
)
from .io import (
    read_snapshot_csv,
    write_diagnostics_csv,
    write_free_boundary_csv,
    write_matrix_market,
    write_snapshot_csv,
    write_vi_csv,
    write_vtk,
)
from .linalg import CgConfig, PsorConfig
from .mesh import (
    AnnulusSpec,
    Mesh,
    MeshError,
    generate_annulus,
    mesh_size,
    read_mesh,
    refine_uniform,
    write_mesh,
)

SCHEMA_VERSION = 1
CONFIG_KINDS = ("coupled", "evi", "pvi", "eps-sweep", "refine-study", "dtn-check")

COMPARISON_COLUMNS = ("time", "l2_bulk", "l2_surface", "overlap_a", "overlap_b")
SWEEP_COLUMNS = ("eps", "time", "l2_bulk", "l2_surface", "overlap")
STUDY_COLUMNS = ("level", "n_vertices", "h_max", "time", "l2_bulk", "l2_surface")

#: Acceptance bounds applied by the Dirichlet-to-Neumann self-check.
DTN_BOUNDS = {
    "symmetry": 1e-10,
    "load_identity": 1e-8,
    "trace_diff": 1e-8,
    "flux_rel": 2e-2,
}


class ConfigError(ValueError):
    """A configuration document failed validation."""


# --------------------------------------------------------------------------
# section validators


def _require(section: dict, key: str, path: str):
    if key not in section:
        raise ConfigError(f"{path}.{key}: missing required key")
    return section[key]


def _check_keys(section: dict, allowed, path: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"{path}.{unknown[0]}: unknown key")


def _object(value, path: str) -> dict:
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    return value


def _number(value, path: str, minimum=None, exclusive=False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a number, got {value!r}")
    v = float(value)
    if minimum is not None:
        if exclusive and v <= minimum:
            raise ConfigError(f"{path}: must be > {minimum}")
        if not exclusive and v < minimum:
            raise ConfigError(f"{path}: must be >= {minimum}")
    return v


def _integer(value, path: str, minimum=None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{path}: expected an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(f"{path}: must be >= {minimum}")
    return value


def _string(value, path: str, choices=None) -> str:
    if not isinstance(value, str):
        raise ConfigError(f"{path}: expected a string, got {value!r}")
    if choices is not None and value not in choices:
        raise ConfigError(f"{path}: must be one of {', '.join(choices)}")
    return value


def _times(value, path: str, minimum=0.0) -> tuple[float, ...]:
    if not isinstance(value, list) or not value:
        raise ConfigError(f"{path}: expected a non-empty array of times")
    out = tuple(
        _number(v, f"{path}[{i}]", minimum, exclusive=True) for i, v in enumerate(value)
    )
    if any(b <= a for a, b in zip(out, out[1:])):
        raise ConfigError(f"{path}: times must be strictly increasing")
    return out


_MESH_KEYS = (
    "kind",
    "r_inner",
    "r_outer",
    "n_angular",
    "n_radial",
    "grading",
    "path",
    "refine",
    "project_boundary",
)


def mesh_from_config(section, path: str = "mesh") -> Mesh:
    """Build the mesh a config section describes.

    ``kind: annulus`` generates one, ``kind: file`` imports the native
    text format; either may be refined in place with ``refine`` levels
    and ``project_boundary``.
    """
    section = _object(section, path)
    _check_keys(section, _MESH_KEYS, path)
    kind = _string(_require(section, "kind", path), f"{path}.kind", ("annulus", "file"))
    if kind == "annulus":
        try:
            spec = AnnulusSpec(
                r_inner=_number(_require(section, "r_inner", path), f"{path}.r_inner", 0.0, True),
                r_outer=_number(_require(section, "r_outer", path), f"{path}.r_outer", 0.0, True),
                n_angular=_integer(_require(section, "n_angular", path), f"{path}.n_angular", 1),
                n_radial=_integer(_require(section, "n_radial", path), f"{path}.n_radial", 1),
                grading=_number(section.get("grading", 1.0), f"{path}.grading", 0.0, True),
            )
            mesh = generate_annulus(spec)
        except MeshError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    else:
        source = _string(_require(section, "path", path), f"{path}.path")
        try:
            mesh = read_mesh(source)
        except (OSError, MeshError) as exc:
            raise ConfigError(f"{path}.path: {exc}") from exc
    levels = _integer(section.get("refine", 0), f"{path}.refine", 0)
    project = section.get("project_boundary", False)
    if not isinstance(project, bool):
        raise ConfigError(f"{path}.project_boundary: expected true or false")
    try:
        for _ in range(levels):
            mesh = refine_uniform(mesh, project_boundary=project)
    except MeshError as exc:
        raise ConfigError(f"{path}.project_boundary: {exc}") from exc
    return mesh


INITIAL_KINDS = ("constant", "trig-bump")


def initial_from_config(section, points: np.ndarray, path: str) -> np.ndarray:
    """Evaluate an initial-datum descriptor at the given coordinates.

    ``constant`` fills with a non-negative value; ``trig-bump`` is the
    clipped trigonometric profile ``max(0, cos(pi y) + sin(pi x))``.
    """
    section = _object(section, path)
    _check_keys(section, ("kind", "value"), path)
    kind = _string(_require(section, "kind", path), f"{path}.kind", INITIAL_KINDS)
    if kind == "constant":
        value = _number(_require(section, "value", path), f"{path}.value", 0.0)
        return np.full(points.shape[0], value)
    x, y = points[:, 0], points[:, 1]
    return np.maximum(0.0, np.cos(np.pi * y) + np.sin(np.pi * x))


_PARAM_KEYS = ("delta_omega", "delta_gamma", "delta_k", "mu", "u_dirichlet", "outer_bc")


def params_from_config(section, path: str = "params") -> ModelParams:
    section = _object(section, path)
    _check_keys(section, _PARAM_KEYS, path)
    try:
        return ModelParams(
            delta_omega=_number(_require(section, "delta_omega", path), f"{path}.delta_omega", 0.0, True),
            delta_gamma=_number(_require(section, "delta_gamma", path), f"{path}.delta_gamma", 0.0),
            delta_k=_number(_require(section, "delta_k", path), f"{path}.delta_k", 0.0, True),
            mu=_number(section.get("mu", 1.0), f"{path}.mu", 0.0),
            u_dirichlet=_number(section.get("u_dirichlet", 1.0), f"{path}.u_dirichlet", 0.0),
            outer_bc=_string(
                section.get("outer_bc", DIRICHLET), f"{path}.outer_bc", (DIRICHLET, FLUX_FREE)
            ),
        )
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"{path}: {exc}") from exc


_CG_KEYS = ("rel_tol", "abs_tol", "max_iter", "preconditioner")
_PSOR_KEYS = ("omega", "update_tol", "comp_tol", "max_sweeps")


def solver_from_config(section, path: str = "solver"):
    """Optional solver overrides: returns ``(CgConfig | None, PsorConfig | None)``."""
    if section is None:
        return None, None
    section = _object(section, path)
    _check_keys(section, ("cg", "psor"), path)
    cg = psor = None
    if "cg" in section:
        sub = _object(section["cg"], f"{path}.cg")
        _check_keys(sub, _CG_KEYS, f"{path}.cg")
        try:
            cg = CgConfig(**sub)
        except ValueError as exc:
            raise ConfigError(f"{path}.cg: {exc}") from exc
    if "psor" in section:
        sub = _object(section["psor"], f"{path}.psor")
        _check_keys(sub, _PSOR_KEYS, f"{path}.psor")
        try:
            psor = PsorConfig(**sub)
        except ValueError as exc:
            raise ConfigError(f"{path}.psor: {exc}") from exc
    return cg, psor


_TIME_KEYS = ("t_end", "tau", "snapshots")


def time_from_config(section, path: str = "time"):
    """Returns ``(t_end, tau_request, snapshot_times)``."""
    section = _object(section, path)
    _check_keys(section, _TIME_KEYS, path)
    t_end = _number(_require(section, "t_end", path), f"{path}.t_end", 0.0, True)
    tau = section.get("tau", "auto")
    if tau != "auto":
        tau = _number(tau, f"{path}.tau", 0.0, True)
    snapshots: tuple[float, ...] = ()
    if "snapshots" in section:
        snapshots = _times(section["snapshots"], f"{path}.snapshots")
        if snapshots[-1] > t_end + 1e-12:
            raise ConfigError(f"{path}.snapshots: last entry exceeds t_end")
    return t_end, tau, snapshots


_TOP_KEYS = {
    "coupled": ("schema", "kind", "mesh", "params", "initial", "time", "solver"),
    "evi": ("schema", "kind", "mesh", "u_dirichlet", "w0", "times", "tau_post", "contact_threshold", "solver"),
    "pvi": (
        "schema",
        "kind",
        "mesh",
        "delta_omega",
        "tau",
        "t_end",
        "u_dirichlet",
        "u0",
        "w0",
        "times",
        "contact_threshold",
        "solver",
    ),
    "eps-sweep": ("schema", "kind", "mesh", "eps", "u_dirichlet", "initial", "time", "tau_post", "solver"),
    "refine-study": ("schema", "kind", "mesh", "levels", "eps", "u_dirichlet", "initial", "time", "solver"),
    "dtn-check": ("schema", "kind", "mesh", "refinements", "u_dirichlet", "w0", "times", "solver"),
}


def validate_config(config) -> dict:
    """Check the envelope (schema version, kind, allowed top-level keys).

    A ``resolved`` block is tolerated and ignored so that the config
    echo written into a run directory can be fed back in unchanged.
    """
    config = _object(config, "config")
    schema = _require(config, "schema", "config")
    if schema != SCHEMA_VERSION:
        raise ConfigError(f"schema: unsupported value {schema!r}, this build reads schema 1")
    kind = _string(_require(config, "kind", "config"), "kind", CONFIG_KINDS)
    _check_keys(config, _TOP_KEYS[kind] + ("resolved",), "config")
    _require(config, "mesh", "config")
    return config


def load_config(path) -> dict:
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    return validate_config(raw)


# --------------------------------------------------------------------------
# presets


def _annulus_section(n_angular: int, n_radial: int) -> dict:
    return {
        "kind": "annulus",
        "r_inner": 1.0,
        "r_outer": 2.0,
        "n_angular": n_angular,
        "n_radial": n_radial,
        "grading": 1.0,
    }


def _coupled_preset(delta_omega: float, delta_gamma: float, delta_k: float) -> dict:
    return {
        "schema": 1,
        "kind": "coupled",
        "mesh": _annulus_section(32, 4),
        "params": {
            "delta_omega": delta_omega,
            "delta_gamma": delta_gamma,
            "delta_k": delta_k,
            "mu": 1.0,
            "u_dirichlet": 1.0,
            "outer_bc": "dirichlet",
        },
        "initial": {
            "u0": {"kind": "constant", "value": 1.0},
            "w0": {"kind": "trig-bump"},
        },
        "time": {"t_end": 0.7, "tau": "auto", "snapshots": [0.2, 0.4, 0.7]},
    }


PRESETS: dict[str, dict] = {
    "coupled-eps-1e-1": _coupled_preset(0.1, 0.1, 0.1),
    "coupled-eps-1e-2": _coupled_preset(0.01, 0.01, 0.01),
    "physical-elliptic": _coupled_preset(0.057, 0.018, 0.057),
    "physical-parabolic": _coupled_preset(1.0, 0.001, 0.057),
    "neumann-conservation": {
        "schema": 1,
        "kind": "coupled",
        "mesh": _annulus_section(16, 3),
        "params": {
            "delta_omega": 1.0,
            "delta_gamma": 0.001,
            "delta_k": 0.057,
            "mu": 1.0,
            "outer_bc": "flux-free",
        },
        "initial": {
            "u0": {"kind": "constant", "value": 1.0},
            "w0": {"kind": "trig-bump"},
        },
        "time": {"t_end": 0.15, "tau": "auto", "snapshots": [0.15]},
        "solver": {"cg": {"rel_tol": 1e-14, "abs_tol": 0.0, "preconditioner": "jacobi"}},
    },
    "radial-oracle": {
        "schema": 1,
        "kind": "evi",
        "mesh": _annulus_section(64, 8),
        "u_dirichlet": 1.0,
        "w0": {"kind": "constant", "value": 1.0},
        "times": [0.3, 0.5, 1.0],
        "tau_post": 0.01,
        "solver": {"psor": {"omega": 1.8}},
    },
    "pvi-radial": {
        "schema": 1,
        "kind": "pvi",
        "mesh": _annulus_section(32, 4),
        "delta_omega": 0.01,
        "tau": 0.05,
        "t_end": 0.5,
        "u_dirichlet": 1.0,
        "u0": {"kind": "constant", "value": 1.0},
        "w0": {"kind": "constant", "value": 1.0},
        "times": [0.25, 0.5],
        "solver": {"psor": {"omega": 1.8}},
    },
    "eps-sweep": {
        "schema": 1,
        "kind": "eps-sweep",
        "mesh": _annulus_section(32, 4),
        "eps": [0.1, 0.01],
        "u_dirichlet": 1.0,
        "initial": {
            "u0": {"kind": "constant", "value": 1.0},
            "w0": {"kind": "trig-bump"},
        },
        "time": {"t_end": 0.7, "tau": "auto", "snapshots": [0.2, 0.4, 0.7]},
        "tau_post": 0.01,
        "solver": {"psor": {"omega": 1.8}},
    },
    "refine-study": {
        "schema": 1,
        "kind": "refine-study",
        "mesh": _annulus_section(16, 2),
        "levels": 3,
        "eps": 0.01,
        "u_dirichlet": 1.0,
        "initial": {
            "u0": {"kind": "constant", "value": 1.0},
            "w0": {"kind": "trig-bump"},
        },
        "time": {"t_end": 0.2, "tau": "auto", "snapshots": [0.05, 0.1, 0.2]},
    },
    "dtn-check": {
        "schema": 1,
        "kind": "dtn-check",
        "mesh": _annulus_section(32, 4),
        "refinements": 1,
        "u_dirichlet": 1.0,
        "w0": {"kind": "constant", "value": 1.0},
        "times": [0.3, 1.0],
        "solver": {"psor": {"omega": 1.8, "update_tol": 1e-12}},
    },
}


def list_presets() -> list[str]:
    return sorted(PRESETS)


def preset(name: str) -> dict:
    """A fresh copy of a named built-in configuration."""
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {', '.join(list_presets())}")
    return json.loads(json.dumps(PRESETS[name]))


# --------------------------------------------------------------------------
# field transfer between meshes


def interpolate_p1(
    mesh_from: Mesh, values: np.ndarray, points: np.ndarray, tol: float = 0.05
) -> np.ndarray:
    """Evaluate a piecewise linear field at arbitrary points.

    Each point is assigned the triangle where its smallest barycentric
    coordinate is largest; points may fall outside the source mesh by a
    barycentric deficit up to ``tol`` (boundary vertices of a finer
    companion mesh sit marginally outside the coarse polygon), beyond
    which the meshes are considered non-nested.
    """
    values = np.asarray(values, dtype=float)
    tris = mesh_from.triangles
    verts = mesh_from.vertices
    p0 = verts[tris[:, 0]]
    d1 = verts[tris[:, 1]] - p0
    d2 = verts[tris[:, 2]] - p0
    det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]

    points = np.asarray(points, dtype=float)
    out = np.empty(points.shape[0])
    block = 256
    for start in range(0, points.shape[0], block):
        chunk = points[start : start + block]
        rx = chunk[:, None, 0] - p0[None, :, 0]
        ry = chunk[:, None, 1] - p0[None, :, 1]
        l1 = (rx * d2[None, :, 1] - ry * d2[None, :, 0]) / det
        l2 = (d1[None, :, 0] * ry - d1[None, :, 1] * rx) / det
        l0 = 1.0 - l1 - l2
        score = np.minimum(l0, np.minimum(l1, l2))
        best = score.argmax(axis=1)
        rows = np.arange(chunk.shape[0])
        deficit = score[rows, best]
        if deficit.min() < -tol:
            worst = int(deficit.argmin())
            x, y = chunk[worst]
            raise ValueError(
                f"point ({x:.6g}, {y:.6g}) lies outside the source mesh; "
                "fields can only be transferred between nested meshes"
            )
        tri = tris[best]
        out[start : start + block] = (
            l0[rows, best] * values[tri[:, 0]]
            + l1[rows, best] * values[tri[:, 1]]
            + l2[rows, best] * values[tri[:, 2]]
        )
    return out


def interpolate_surface(mesh_from: Mesh, w_from: np.ndarray, mesh_to: Mesh) -> np.ndarray:
    """Transfer a surface field between meshes whose loops correspond.

    Loops are paired in order and interpolated linearly in the angle
    around the loop centroid, which is exact for nodes of a refined
    companion loop.
    """
    if len(mesh_from.surface_loops) != len(mesh_to.surface_loops):
        raise ValueError("surface loop structure differs between meshes")
    w_from = np.asarray(w_from, dtype=float)
    out = np.empty(mesh_to.n_surface)
    for (a0, a1), (b0, b1) in zip(mesh_from.surface_loops, mesh_to.surface_loops):
        coarse = mesh_from.vertices[mesh_from.surface_nodes[a0:a1]]
        fine = mesh_to.vertices[mesh_to.surface_nodes[b0:b1]]
        center = coarse.mean(axis=0)
        theta_c = np.mod(np.arctan2(coarse[:, 1] - center[1], coarse[:, 0] - center[0]), 2 * np.pi)
        theta_f = np.mod(np.arctan2(fine[:, 1] - center[1], fine[:, 0] - center[0]), 2 * np.pi)
        order = np.argsort(theta_c)
        out[b0:b1] = np.interp(theta_f, theta_c[order], w_from[a0:a1][order], period=2 * np.pi)
    return out


def compare_fields(
    mesh_a: Mesh,
    U_a: np.ndarray,
    W_a: np.ndarray,
    mesh_b: Mesh,
    U_b: np.ndarray,
    W_b: np.ndarray,
) -> tuple[float, float]:
    """Mass-weighted L2 distances between two discrete states.

    The coarser mesh's fields are prolonged onto the finer mesh, so the
    pair must be nested (or equal); the returned pair is the bulk and
    the surface distance.
    """
    same_size = mesh_a.n_vertices == mesh_b.n_vertices
    if same_size and np.array_equal(mesh_a.vertices, mesh_b.vertices):
        fine = mesh_a
        dU = np.asarray(U_a, float) - U_b
        dW = np.asarray(W_a, float) - W_b
    elif same_size:
        raise ValueError("meshes have equal size but different vertices")
    else:
        if mesh_a.n_vertices > mesh_b.n_vertices:
            mesh_a, U_a, W_a, mesh_b, U_b, W_b = mesh_b, U_b, W_b, mesh_a, U_a, W_a
        fine = mesh_b
        dU = interpolate_p1(mesh_a, U_a, mesh_b.vertices) - U_b
        dW = interpolate_surface(mesh_a, W_a, mesh_b) - W_b
    m_bulk = bulk_mass(fine, lumped=True).diagonal()
    m_surf = surface_mass(fine, lumped=True).diagonal()
    return float(np.sqrt(m_bulk @ dU**2)), float(np.sqrt(m_surf @ dW**2))


def overlap_functional(mesh: Mesh, U: np.ndarray, W: np.ndarray) -> float:
    """Surface integral of the product of the two concentrations.

    Decays to zero at the instantaneous-reaction limit, where the bulk
    and surface species cannot coexist.
    """
    m_surf = surface_mass(mesh, lumped=True).diagonal()
    return float(m_surf @ (np.asarray(U, float)[mesh.surface_nodes] * W))


# --------------------------------------------------------------------------
# runners


def _echo(config: dict, **resolved) -> dict:
    copy = json.loads(json.dumps(config))
    copy["resolved"] = {"package_version": __version__, **resolved}
    return copy


def _write_dir(out_dir, mesh: Mesh, echo: dict) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_mesh(out / "mesh.txt", mesh)
    (out / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return out


def _write_csv(path, columns, rows) -> None:
    lines = [",".join(columns)]
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, str):
                cells.append(cell)
            elif isinstance(cell, (int, np.integer)):
                cells.append(str(int(cell)))
            else:
                cells.append(repr(float(cell)))
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _coupled_pieces(config: dict):
    mesh = mesh_from_config(config["mesh"])
    params = params_from_config(_require(config, "params", "config"))
    initial = _object(_require(config, "initial", "config"), "initial")
    _check_keys(initial, ("u0", "w0"), "initial")
    u0 = initial_from_config(_require(initial, "u0", "initial"), mesh.vertices, "initial.u0")
    w0 = initial_from_config(
        _require(initial, "w0", "initial"), mesh.vertices[mesh.surface_nodes], "initial.w0"
    )
    t_end, tau, snapshots = time_from_config(_require(config, "time", "config"))
    cg, _ = solver_from_config(config.get("solver"))
    return mesh, params, u0, w0, t_end, tau, snapshots, cg


def _write_coupled_artifacts(out: Path, mesh: Mesh, run: CoupledRun) -> None:
    write_diagnostics_csv(out / "diagnostics.csv", run.diagnostics)
    for i, snap in enumerate(run.snapshots):
        write_snapshot_csv(out / f"snapshot_{i:03d}.csv", mesh, snap.time, snap.U, snap.W)
        write_vtk(out / f"snapshot_{i:03d}.vtk", mesh, snap.U, snap.W)


def run_coupled_experiment(config: dict, out_dir, extra_resolved: dict | None = None):
    """Evolve the coupled system per config and write the artifact set."""
    config = validate_config(config)
    if config["kind"] != "coupled":
        raise ConfigError(f"kind: expected coupled, got {config['kind']!r}")
    mesh, params, u0, w0, t_end, tau, snapshots, cg = _coupled_pieces(config)
    run = run_coupled(mesh, params, u0, w0, t_end, tau=tau, snapshot_times=snapshots, cg_config=cg)
    echo = _echo(
        config,
        tau=run.tau,
        stable_tau=run.stable_tau,
        n_steps=run.n_steps,
        n_vertices=mesh.n_vertices,
        n_triangles=mesh.n_triangles,
        n_surface=mesh.n_surface,
        **(extra_resolved or {}),
    )
    out = _write_dir(out_dir, mesh, echo)
    _write_coupled_artifacts(out, mesh, run)
    return mesh, run


def run_evi_experiment(config: dict, out_dir, extra_resolved: dict | None = None):
    """Solve the stationary obstacle problem at each requested time."""
    config = validate_config(config)
    if config["kind"] != "evi":
        raise ConfigError(f"kind: expected evi, got {config['kind']!r}")
    mesh = mesh_from_config(config["mesh"])
    u_dirichlet = _number(_require(config, "u_dirichlet", "config"), "u_dirichlet", 0.0)
    w0 = initial_from_config(
        _require(config, "w0", "config"), mesh.vertices[mesh.surface_nodes], "w0"
    )
    times = _times(_require(config, "times", "config"), "times")
    tau_post = _number(config.get("tau_post", 0.01), "tau_post", 0.0, True)
    if times[0] <= tau_post:
        raise ConfigError("times[0]: must exceed tau_post for field recovery")
    threshold = _number(
        config.get("contact_threshold", DEFAULT_CONTACT_THRESHOLD), "contact_threshold", 0.0, True
    )
    _, psor = solver_from_config(config.get("solver"))
    psor = psor or PsorConfig()

    out = _write_dir(
        out_dir,
        mesh,
        _echo(
            config,
            tau_post=tau_post,
            contact_threshold=threshold,
            n_vertices=mesh.n_vertices,
            n_surface=mesh.n_surface,
            **(extra_resolved or {}),
        ),
    )
    v0 = -w0
    warm = None
    results = []
    for i, t in enumerate(times):
        earlier = solve_evi(mesh, t - tau_post, u_dirichlet, v0, x0=warm, psor_config=psor)
        result = solve_evi(mesh, t, u_dirichlet, v0, x0=earlier.z, psor_config=psor)
        warm = result.z
        U, W = recover_fields(mesh, result.z, earlier.z, tau_post, w0)
        write_vi_csv(out / f"vi_{i:03d}.csv", mesh, result)
        write_snapshot_csv(out / f"snapshot_{i:03d}.csv", mesh, t, U, W)
        write_vtk(out / f"snapshot_{i:03d}.vtk", mesh, U, W)
        write_free_boundary_csv(
            out / f"freeboundary_{i:03d}.csv", extract_free_boundary(mesh, result.z, threshold)
        )
        results.append((t, result, U, W))
    return mesh, results


def run_pvi_experiment(config: dict, out_dir, extra_resolved: dict | None = None):
    """March the parabolic obstacle problem, writing fields at the output times."""
    config = validate_config(config)
    if config["kind"] != "pvi":
        raise ConfigError(f"kind: expected pvi, got {config['kind']!r}")
    mesh = mesh_from_config(config["mesh"])
    delta_omega = _number(_require(config, "delta_omega", "config"), "delta_omega", 0.0)
    tau = _number(_require(config, "tau", "config"), "tau", 0.0, True)
    t_end = _number(_require(config, "t_end", "config"), "t_end", 0.0, True)
    u_dirichlet = _number(_require(config, "u_dirichlet", "config"), "u_dirichlet", 0.0)
    u0 = initial_from_config(_require(config, "u0", "config"), mesh.vertices, "u0")
    w0 = initial_from_config(
        _require(config, "w0", "config"), mesh.vertices[mesh.surface_nodes], "w0"
    )
    times = _times(_require(config, "times", "config"), "times")
    if times[-1] > t_end + 1e-12:
        raise ConfigError("times: last entry exceeds t_end")
    threshold = _number(
        config.get("contact_threshold", DEFAULT_CONTACT_THRESHOLD), "contact_threshold", 0.0, True
    )
    _, psor = solver_from_config(config.get("solver"))
    psor = psor or PsorConfig()

    n_steps = max(1, math.ceil(t_end / tau - 1e-9))
    output_steps = {max(1, round(t / tau)): i for i, t in enumerate(times)}
    out = _write_dir(
        out_dir,
        mesh,
        _echo(
            config,
            n_steps=n_steps,
            n_vertices=mesh.n_vertices,
            n_surface=mesh.n_surface,
            **(extra_resolved or {}),
        ),
    )

    problem = PviProblem(mesh, tau, delta_omega, u0, -w0, u_dirichlet, psor)
    z_prev = np.zeros(mesh.n_vertices)
    results = []
    for k in range(1, n_steps + 1):
        result = problem.step(z_prev, k * tau)
        if k in output_steps:
            i = output_steps[k]
            U, W = recover_fields(mesh, result.z, z_prev, tau, w0)
            write_vi_csv(out / f"vi_{i:03d}.csv", mesh, result)
            write_snapshot_csv(out / f"snapshot_{i:03d}.csv", mesh, k * tau, U, W)
            write_vtk(out / f"snapshot_{i:03d}.vtk", mesh, U, W)
            write_free_boundary_csv(
                out / f"freeboundary_{i:03d}.csv",
                extract_free_boundary(mesh, result.z, threshold),
            )
            results.append((k * tau, result, U, W))
        z_prev = result.z
    return mesh, results


def _sweep_worker(payload: dict):
    """Run one evolution of an eps sweep; safe to call in a subprocess."""
    eps = payload["eps"]
    sub = {
        "schema": 1,
        "kind": "coupled",
        "mesh": payload["mesh"],
        "params": {
            "delta_omega": eps,
            "delta_gamma": eps,
            "delta_k": eps,
            "mu": 1.0,
            "u_dirichlet": payload["u_dirichlet"],
            "outer_bc": "dirichlet",
        },
        "initial": payload["initial"],
        "time": payload["time"],
    }
    if payload.get("cg") is not None:
        sub["solver"] = {"cg": payload["cg"]}
    mesh, run = run_coupled_experiment(sub, payload["out"], {"eps": eps})
    reacted = float(run.diagnostics[-1, DIAGNOSTIC_COLUMNS.index("R_cum")])
    return eps, run.tau, run.n_steps, reacted, [(s.time, s.U, s.W) for s in run.snapshots]


def run_eps_sweep(config: dict, out_dir, threads: int = 1, extra_resolved: dict | None = None):
    """Evolutions for each eps plus the instantaneous-reaction reference.

    The report row for ``(eps, t)`` holds the bulk and surface L2
    distances between the evolved state nearest ``t`` and the obstacle
    -problem reference at exactly ``t``, plus the evolved overlap
    integral.  Workers run in separate processes when ``threads > 1``;
    the report is identical either way.
    """
    config = validate_config(config)
    if config["kind"] != "eps-sweep":
        raise ConfigError(f"kind: expected eps-sweep, got {config['kind']!r}")
    mesh = mesh_from_config(config["mesh"])
    eps_raw = _require(config, "eps", "config")
    if not isinstance(eps_raw, list) or not eps_raw:
        raise ConfigError("eps: expected a non-empty array")
    eps_list = [_number(e, f"eps[{i}]", 0.0, True) for i, e in enumerate(eps_raw)]
    u_dirichlet = _number(_require(config, "u_dirichlet", "config"), "u_dirichlet", 0.0)
    initial = _object(_require(config, "initial", "config"), "initial")
    _check_keys(initial, ("u0", "w0"), "initial")
    t_end, tau, snapshots = time_from_config(_require(config, "time", "config"))
    if not snapshots:
        raise ConfigError("time.snapshots: an eps sweep needs comparison times")
    tau_post = _number(config.get("tau_post", 0.01), "tau_post", 0.0, True)
    if snapshots[0] <= tau_post:
        raise ConfigError("time.snapshots[0]: must exceed tau_post for field recovery")
    cg, psor = solver_from_config(config.get("solver"))
    psor = psor or PsorConfig()

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    payloads = []
    for eps in eps_list:
        payloads.append(
            {
                "eps": eps,
                "mesh": config["mesh"],
                "u_dirichlet": u_dirichlet,
                "initial": initial,
                "time": {"t_end": t_end, "tau": tau, "snapshots": list(snapshots)},
                "cg": (config.get("solver") or {}).get("cg"),
                "out": str(out / f"eps_{eps:g}"),
            }
        )
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(_sweep_worker, payloads))
    else:
        results = [_sweep_worker(p) for p in payloads]

    w0 = initial_from_config(initial["w0"], mesh.vertices[mesh.surface_nodes], "initial.w0")
    v0 = -w0
    references = []
    warm = None
    for t in snapshots:
        earlier = solve_evi(mesh, t - tau_post, u_dirichlet, v0, x0=warm, psor_config=psor)
        result = solve_evi(mesh, t, u_dirichlet, v0, x0=earlier.z, psor_config=psor)
        warm = result.z
        references.append(recover_fields(mesh, result.z, earlier.z, tau_post, w0))

    surface_content = float(surface_mass(mesh, lumped=True).diagonal() @ w0)
    rows = []
    resolved_runs = {}
    for eps, run_tau, n_steps, reacted, snaps in results:
        # the reaction identity turns the cumulative reacted amount into
        # the time integral of the overlap functional
        resolved_runs[f"eps_{eps:g}"] = {
            "tau": run_tau,
            "n_steps": n_steps,
            "integrated_overlap": eps * reacted,
            "overlap_bound": eps * surface_content * 1.1,
        }
        for (t_req, (U_ref, W_ref)), (_, U, W) in zip(zip(snapshots, references), snaps):
            l2_bulk, l2_surface = compare_fields(mesh, U, W, mesh, U_ref, W_ref)
            rows.append((eps, t_req, l2_bulk, l2_surface, overlap_functional(mesh, U, W)))
    _write_csv(out / "sweep_report.csv", SWEEP_COLUMNS, rows)
    echo = _echo(
        config,
        runs=resolved_runs,
        n_vertices=mesh.n_vertices,
        n_surface=mesh.n_surface,
        **(extra_resolved or {}),
    )
    (out / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return rows


def run_refine_study(config: dict, out_dir, extra_resolved: dict | None = None):
    """Self-convergence of the evolution on a nested mesh hierarchy.

    Each level is the red refinement of the previous one (boundary kept
    polygonal so the hierarchy is exactly nested) and the finest level
    serves as the reference; distances are reported per level and
    snapshot time.
    """
    config = validate_config(config)
    if config["kind"] != "refine-study":
        raise ConfigError(f"kind: expected refine-study, got {config['kind']!r}")
    base = mesh_from_config(config["mesh"])
    levels = _integer(_require(config, "levels", "config"), "levels", 2)
    eps = _number(_require(config, "eps", "config"), "eps", 0.0, True)
    u_dirichlet = _number(config.get("u_dirichlet", 1.0), "u_dirichlet", 0.0)
    initial = _object(_require(config, "initial", "config"), "initial")
    _check_keys(initial, ("u0", "w0"), "initial")
    t_end, tau, snapshots = time_from_config(_require(config, "time", "config"))
    if not snapshots:
        raise ConfigError("time.snapshots: a refinement study needs comparison times")
    cg, _ = solver_from_config(config.get("solver"))
    params = ModelParams(
        delta_omega=eps, delta_gamma=eps, delta_k=eps, mu=1.0,
        u_dirichlet=u_dirichlet, outer_bc=DIRICHLET,
    )

    meshes = [base]
    for _ in range(levels - 1):
        meshes.append(refine_uniform(meshes[-1]))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    runs = []
    resolved_levels = {}
    for k, mesh in enumerate(meshes):
        u0 = initial_from_config(initial["u0"], mesh.vertices, "initial.u0")
        w0 = initial_from_config(initial["w0"], mesh.vertices[mesh.surface_nodes], "initial.w0")
        run = run_coupled(
            mesh, params, u0, w0, t_end, tau=tau, snapshot_times=snapshots, cg_config=cg
        )
        level_dir = _write_dir(
            out / f"level_{k}",
            mesh,
            _echo(
                config,
                level=k,
                tau=run.tau,
                stable_tau=run.stable_tau,
                n_steps=run.n_steps,
                n_vertices=mesh.n_vertices,
            ),
        )
        _write_coupled_artifacts(level_dir, mesh, run)
        runs.append(run)
        resolved_levels[f"level_{k}"] = {"tau": run.tau, "n_vertices": mesh.n_vertices}

    fine_mesh, fine_run = meshes[-1], runs[-1]
    rows = []
    for k in range(levels - 1):
        for i, t_req in enumerate(snapshots):
            coarse_snap = runs[k].snapshots[i]
            fine_snap = fine_run.snapshots[i]
            l2_bulk, l2_surface = compare_fields(
                meshes[k], coarse_snap.U, coarse_snap.W, fine_mesh, fine_snap.U, fine_snap.W
            )
            rows.append((k, meshes[k].n_vertices, mesh_size(meshes[k]), t_req, l2_bulk, l2_surface))
    _write_csv(out / "study_report.csv", STUDY_COLUMNS, rows)
    echo = _echo(config, levels=resolved_levels, **(extra_resolved or {}))
    (out / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return rows


def run_dtn_check(config: dict, out_dir, extra_resolved: dict | None = None):
    """Cross-validate the surface-only route against the full solve.

    For the configured mesh and each projected refinement the check
    compares the obstacle solution's trace between both routes, and
    verifies symmetry of the reduced operator, consistency of the rim
    load with the action on constants, and (when circle radii are
    known) the total flux against the radial closed form.  Bounds come
    from :data:`DTN_BOUNDS`; the report records measured values next to
    a pass flag per mesh.
    """
    config = validate_config(config)
    if config["kind"] != "dtn-check":
        raise ConfigError(f"kind: expected dtn-check, got {config['kind']!r}")
    mesh = mesh_from_config(config["mesh"])
    refinements = _integer(config.get("refinements", 1), "refinements", 0)
    u_dirichlet = _number(_require(config, "u_dirichlet", "config"), "u_dirichlet", 0.0, True)
    times = _times(_require(config, "times", "config"), "times")
    _, psor = solver_from_config(config.get("solver"))
    psor = psor or PsorConfig(update_tol=1e-12)

    meshes = [mesh]
    for _ in range(refinements):
        meshes.append(refine_uniform(meshes[-1], project_boundary=True))

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    report = {"bounds": DTN_BOUNDS, "meshes": []}
    for k, m in enumerate(meshes):
        w0 = initial_from_config(
            _require(config, "w0", "config"), m.vertices[m.surface_nodes], "w0"
        )
        v0 = -w0
        A0 = dtn_matrix(m)
        g = dtn_load(m, u_dirichlet)
        ones = np.ones(m.n_surface)
        scale = np.abs(A0).max()
        symmetry = float(np.abs(A0 - A0.T).max() / scale)
        load_identity = float(np.abs(g + u_dirichlet * (A0 @ ones)).max())
        entry = {
            "name": f"level_{k}",
            "n_surface": m.n_surface,
            "h": mesh_size(m),
            "symmetry": symmetry,
            "load_identity": load_identity,
        }
        if m.r_inner is not None and m.r_outer is not None:
            m_surf = surface_mass(m, lumped=True).diagonal()
            target = m_surf / (m.r_inner * math.log(m.r_outer / m.r_inner))
            entry["flux_rel"] = float(np.abs(A0 @ ones - target).max() / target.max())
        trace_diff = 0.0
        warm = None
        for t in times:
            full = solve_evi(m, t, u_dirichlet, v0, x0=warm, psor_config=psor)
            warm = full.z
            z_surface, _, _ = solve_evi_via_dtn(m, t, u_dirichlet, v0, psor_config=psor)
            trace_diff = max(
                trace_diff, float(np.abs(full.z[m.surface_nodes] - z_surface).max())
            )
        entry["trace_diff"] = trace_diff
        entry["pass"] = {
            key: entry[key] <= bound for key, bound in DTN_BOUNDS.items() if key in entry
        }
        report["meshes"].append(entry)
        write_matrix_market(out / f"dtn_level_{k}.mtx", A0)
    report["pass"] = all(all(e["pass"].values()) for e in report["meshes"])
    (out / "dtn_report.json").write_text(
        json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    echo = _echo(config, refinements=refinements, **(extra_resolved or {}))
    (out / "config.json").write_text(
        json.dumps(echo, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    return report


def run_experiment(config: dict, out_dir, threads: int = 1):
    """Dispatch a validated config to its runner."""
    config = validate_config(config)
    kind = config["kind"]
    if kind == "coupled":
        return run_coupled_experiment(config, out_dir)
    if kind == "evi":
        return run_evi_experiment(config, out_dir)
    if kind == "pvi":
        return run_pvi_experiment(config, out_dir)
    if kind == "eps-sweep":
        return run_eps_sweep(config, out_dir, threads=threads)
    if kind == "refine-study":
        return run_refine_study(config, out_dir)
    return run_dtn_check(config, out_dir)


# --------------------------------------------------------------------------
# comparing finished runs


def _load_run_snapshots(run_dir) -> tuple[Mesh, list[dict]]:
    run_dir = Path(run_dir)
    mesh_path = run_dir / "mesh.txt"
    if not mesh_path.exists():
        raise ValueError(f"{run_dir}: not a run directory (no mesh.txt)")
    mesh = read_mesh(mesh_path)
    snapshots = [read_snapshot_csv(p) for p in sorted(run_dir.glob("snapshot_*.csv"))]
    if not snapshots:
        raise ValueError(f"{run_dir}: no snapshots to compare")
    # snapshot rows are ordered by node id while the mesh lists surface
    # nodes in loop order; permute W accordingly before comparing fields
    for snap in snapshots:
        if snap["U"].shape[0] != mesh.n_vertices or not np.array_equal(
            np.sort(snap["surface_nodes"]), np.sort(mesh.surface_nodes)
        ):
            raise ValueError(f"{run_dir}: snapshot does not match mesh.txt")
        position = np.empty(mesh.n_vertices, dtype=np.int64)
        position[snap["surface_nodes"]] = np.arange(len(snap["surface_nodes"]))
        perm = position[mesh.surface_nodes]
        snap["surface_nodes"] = snap["surface_nodes"][perm]
        snap["W"] = snap["W"][perm]
    return mesh, snapshots


def compare_runs(dir_a, dir_b, times=None, out_path=None) -> list[tuple]:
    """Comparison table between the snapshot sets of two run directories.

    Rows follow :data:`COMPARISON_COLUMNS`.  Without explicit times
    every snapshot of the first run is paired with the nearest-in-time
    snapshot of the second.
    """
    mesh_a, snaps_a = _load_run_snapshots(dir_a)
    mesh_b, snaps_b = _load_run_snapshots(dir_b)
    times_b = np.array([s["time"] for s in snaps_b])
    rows = []
    if times is None:
        pairs = [(a, snaps_b[int(np.abs(times_b - a["time"]).argmin())]) for a in snaps_a]
    else:
        times_a = np.array([s["time"] for s in snaps_a])
        pairs = [
            (
                snaps_a[int(np.abs(times_a - t).argmin())],
                snaps_b[int(np.abs(times_b - t).argmin())],
            )
            for t in times
        ]
    for snap_a, snap_b in pairs:
        l2_bulk, l2_surface = compare_fields(
            mesh_a, snap_a["U"], snap_a["W"], mesh_b, snap_b["U"], snap_b["W"]
        )
        rows.append(
            (
                snap_a["time"],
                l2_bulk,
                l2_surface,
                overlap_functional(mesh_a, snap_a["U"], snap_a["W"]),
                overlap_functional(mesh_b, snap_b["U"], snap_b["W"]),
            )
        )
    if out_path is not None:
        _write_csv(out_path, COMPARISON_COLUMNS, rows)
    return rows
