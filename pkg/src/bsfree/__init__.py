"""Coupled bulk-surface finite elements and free-boundary limit solvers."""

__version__ = "0.1.0"

from .mesh import (
    AnnulusSpec,
    Mesh,
    MeshError,
    MeshFormatError,
    generate_annulus,
    import_mesh,
    export_mesh,
    read_mesh,
    write_mesh,
    refine_uniform,
)
from .linalg import CgConfig, PsorConfig, SolverError, cg_solve, psor_solve
from .coupled import ModelParams, CoupledRun, run_coupled, stable_timestep
from .freeboundary import (
    VIResult,
    FreeBoundaryArc,
    solve_evi,
    PviProblem,
    recover_fields,
    dtn_matrix,
    solve_evi_via_dtn,
    extract_free_boundary,
)
from .experiments import (
    ConfigError,
    compare_fields,
    compare_runs,
    list_presets,
    load_config,
    preset,
    run_experiment,
)

__all__ = [
    "AnnulusSpec",
    "Mesh",
    "MeshError",
    "MeshFormatError",
    "generate_annulus",
    "import_mesh",
    "export_mesh",
    "read_mesh",
    "write_mesh",
    "refine_uniform",
    "CgConfig",
    "PsorConfig",
    "SolverError",
    "cg_solve",
    "psor_solve",
    "ModelParams",
    "CoupledRun",
    "run_coupled",
    "stable_timestep",
    "VIResult",
    "FreeBoundaryArc",
    "solve_evi",
    "PviProblem",
    "recover_fields",
    "dtn_matrix",
    "solve_evi_via_dtn",
    "extract_free_boundary",
    "ConfigError",
    "compare_fields",
    "compare_runs",
    "list_presets",
    "load_config",
    "preset",
    "run_experiment",
    "__version__",
]
