"""Deterministic iterative solvers: conjugate gradients and projected SOR.

Both solvers are plain loops over numpy/scipy primitives with fixed
sweep order, so repeated runs on the same inputs produce bit-identical
iterates.  CG handles the symmetric positive definite time-step and
Schur systems; projected SOR solves the unilateral obstacle systems.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse


class SolverError(RuntimeError):
    """Raised when a solver meets a matrix outside its contract."""


@dataclass(frozen=True)
class CgConfig:
    rel_tol: float = 1e-10
    abs_tol: float = 1e-14
    max_iter: int | None = None  # defaults to 10 * n
    preconditioner: str = "none"  # "none" or "jacobi"

    def __post_init__(self) -> None:
        if self.preconditioner not in ("none", "jacobi"):
            raise ValueError(f"unknown preconditioner {self.preconditioner!r}")
        if self.rel_tol < 0.0 or self.abs_tol < 0.0:
            raise ValueError("tolerances must be non-negative")


@dataclass(frozen=True)
class SolveInfo:
    converged: bool
    iterations: int
    residual_norm: float


def _diagonal_of(A) -> np.ndarray:
    if sparse.issparse(A):
        return np.asarray(A.diagonal(), dtype=float)
    if isinstance(A, np.ndarray):
        return np.ascontiguousarray(np.diag(A), dtype=float)
    diag = getattr(A, "diagonal", None)
    if diag is None:
        raise SolverError("jacobi preconditioning needs a matrix with a diagonal")
    return np.asarray(diag(), dtype=float)


def cg_solve(
    A,
    b: np.ndarray,
    x0: np.ndarray | None = None,
    config: CgConfig = CgConfig(),
) -> tuple[np.ndarray, SolveInfo]:
    """Preconditioned conjugate gradients for symmetric positive definite A.

    Stops once ``||r|| <= rel_tol * ||b|| + abs_tol``.  ``A`` is anything
    supporting ``A @ x``; with ``preconditioner="jacobi"`` it must also
    expose its diagonal.

    Returns the iterate and a :class:`SolveInfo`; a breakdown caused by
    an indefinite operator raises :class:`SolverError`.
    """
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    max_iter = config.max_iter if config.max_iter is not None else 10 * n

    if config.preconditioner == "jacobi":
        diag = _diagonal_of(A)
        if np.any(diag <= 0.0):
            raise SolverError("jacobi preconditioning needs a positive diagonal")
        inv_diag = 1.0 / diag
    else:
        inv_diag = None

    target = config.rel_tol * float(np.linalg.norm(b)) + config.abs_tol
    r = b - A @ x
    res = float(np.linalg.norm(r))
    if res <= target:
        return x, SolveInfo(True, 0, res)

    z = r * inv_diag if inv_diag is not None else r
    p = z.copy()
    rho = float(r @ z)
    for k in range(1, max_iter + 1):
        Ap = A @ p
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise SolverError("operator is not positive definite")
        alpha = rho / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        res = float(np.linalg.norm(r))
        if res <= target:
            return x, SolveInfo(True, k, res)
        z = r * inv_diag if inv_diag is not None else r
        rho_next = float(r @ z)
        if rho_next == 0.0:
            return x, SolveInfo(True, k, res)
        p = z + (rho_next / rho) * p
        rho = rho_next
    return x, SolveInfo(False, max_iter, res)


def dense_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """LU solve for the small dense systems used in tests and cross-checks."""
    return np.linalg.solve(np.asarray(A, dtype=float), np.asarray(b, dtype=float))


@dataclass(frozen=True)
class PsorConfig:
    omega: float = 1.5
    update_tol: float = 1e-10
    comp_tol: float = 1e-8
    max_sweeps: int | None = None  # defaults to 50 * n

    def __post_init__(self) -> None:
        if not 0.0 < self.omega < 2.0:
            raise ValueError("psor relaxation must lie in (0, 2)")


@dataclass(frozen=True)
class PsorInfo:
    converged: bool
    sweeps: int
    max_update: float
    comp_residual: float


def complementarity_residual(
    A, b: np.ndarray, x: np.ndarray, constrained: np.ndarray
) -> float:
    """Natural residual of the KKT system for min 1/2 x'Ax - b'x, x_C >= 0.

    Unconstrained rows must vanish; constrained rows must satisfy
    x >= 0, Ax - b >= 0 with at least one of the pair zero, which the
    min of the two measures in a single number.
    """
    rho = A @ x - b
    mask = np.zeros(x.shape[0], dtype=bool)
    mask[constrained] = True
    worst = 0.0
    if np.any(~mask):
        worst = float(np.max(np.abs(rho[~mask])))
    if np.any(mask):
        worst = max(worst, float(np.max(np.abs(np.minimum(x[mask], rho[mask])))))
    return worst


def psor_solve(
    A: sparse.spmatrix,
    b: np.ndarray,
    constrained: np.ndarray,
    x0: np.ndarray | None = None,
    config: PsorConfig = PsorConfig(),
) -> tuple[np.ndarray, PsorInfo]:
    """Projected SOR for min 1/2 x'Ax - b'x subject to x >= 0 on a node set.

    Sweeps rows in ascending order; constrained rows project onto the
    non-negative half-line after each relaxation.  Convergence requires
    both a small largest nodal update and a small complementarity
    residual, so a stalled sweep cannot masquerade as a solution.

    Parameters
    ----------
    A : sparse matrix, symmetric with positive diagonal
    b : load vector
    constrained : int array
        Row indices subject to the unilateral bound.
    x0 : optional warm start (projected onto the feasible set)
    config : PsorConfig

    Returns
    -------
    (x, PsorInfo)
    """
    A = A.tocsr()
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    diag = A.diagonal()
    if np.any(diag <= 0.0):
        raise SolverError("psor needs a positive diagonal")
    is_constrained = np.zeros(n, dtype=bool)
    is_constrained[constrained] = True

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    x[is_constrained] = np.maximum(x[is_constrained], 0.0)

    indptr, indices, data = A.indptr, A.indices, A.data
    omega = config.omega
    max_sweeps = config.max_sweeps if config.max_sweeps is not None else 50 * n

    sweeps = 0
    max_update = np.inf
    comp = np.inf
    for sweeps in range(1, max_sweeps + 1):
        max_update = 0.0
        for i in range(n):
            lo, hi = indptr[i], indptr[i + 1]
            row_dot = np.dot(data[lo:hi], x[indices[lo:hi]])
            xi = x[i] + omega * (b[i] - row_dot) / diag[i]
            if is_constrained[i] and xi < 0.0:
                xi = 0.0
            delta = abs(xi - x[i])
            if delta > max_update:
                max_update = delta
            x[i] = xi
        comp = complementarity_residual(A, b, x, constrained)
        if max_update < config.update_tol and comp < config.comp_tol:
            return x, PsorInfo(True, sweeps, max_update, comp)
    return x, PsorInfo(False, sweeps, max_update, comp)
