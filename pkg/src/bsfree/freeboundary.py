"""Free-boundary limit solvers for the fast-reaction regime.

In the limit of instantaneous surface reaction the cumulative bulk
concentration ``z(t) = integral of u over [0, t]`` solves an obstacle
problem: ``z`` is harmonic off the surface, pinned to ``t * u_D`` on the
outer rim, and on the surface satisfies ``z >= 0`` together with a
complementarity condition against the remaining surface density.  This
module solves the stationary (elliptic) and time-stepped (parabolic)
inequalities, recovers the physical fields from ``z``, reduces the
problem to the surface through a Dirichlet-to-Neumann map, and reports
the contact arcs whose endpoints form the free boundary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .assembly import (
    bulk_mass,
    bulk_stiffness,
    dirichlet_lift,
    eliminate,
    outer_nodes,
    surface_mass,
    trace_coupling,
)
from .linalg import CgConfig, PsorConfig, SolverError, cg_solve, psor_solve
from .mesh import Mesh

DEFAULT_CONTACT_THRESHOLD = 5e-3


@dataclass(frozen=True)
class VIResult:
    """Solution of one variational inequality solve.

    Attributes
    ----------
    z : (n_vertices,) array
        Cumulative concentration, boundary values included.
    multiplier : (n_surface,) array
        Mass-scaled surface multiplier; non-positive, and zero wherever
        ``z > 0`` (complementarity).  Physically the limit of the
        negated remaining surface density rate.
    active : (n_surface,) bool array
        True where the constraint ``z >= 0`` binds.
    sweeps : int
        Projected SOR sweeps spent.
    comp_residual : float
        Final complementarity residual of the KKT system.
    """

    z: np.ndarray
    multiplier: np.ndarray
    active: np.ndarray
    sweeps: int
    comp_residual: float


@dataclass(frozen=True)
class FreeBoundaryArc:
    """One contact arc on a surface loop, angles in [0, 2*pi)."""

    loop_id: int
    theta_start: float
    theta_end: float
    arclength: float


def _surface_load(mesh: Mesh, v0: np.ndarray) -> np.ndarray:
    v0 = np.asarray(v0, dtype=float)
    if v0.shape != (mesh.n_surface,):
        raise ValueError("v0 must carry one value per surface node")
    return trace_coupling(mesh) @ v0


def _finish(
    mesh: Mesh,
    A: sparse.csr_matrix,
    rhs: np.ndarray,
    z: np.ndarray,
    info,
) -> VIResult:
    if not info.converged:
        raise SolverError(
            f"projected SOR stalled after {info.sweeps} sweeps "
            f"(complementarity residual {info.comp_residual:.3e})"
        )
    surface = mesh.surface_nodes
    m_surf = surface_mass(mesh, lumped=True).diagonal()
    lam = (rhs - A @ z)[surface]
    return VIResult(
        z=z,
        multiplier=lam / m_surf,
        active=z[surface] == 0.0,
        sweeps=info.sweeps,
        comp_residual=info.comp_residual,
    )


def solve_evi(
    mesh: Mesh,
    t: float,
    u_dirichlet: float,
    v0: np.ndarray,
    x0: np.ndarray | None = None,
    psor_config: PsorConfig = PsorConfig(),
) -> VIResult:
    """Stationary obstacle problem for the cumulative concentration.

    Minimizes ``1/2 z'Kz - z'(T v0)`` over ``z = t * u_dirichlet`` on the
    outer rim and ``z >= 0`` on the surface.  ``v0`` is the (non-positive)
    initial surface datum, one value per surface node.

    Parameters
    ----------
    mesh : Mesh
    t : float
        Time at which the cumulative concentration is sought.
    u_dirichlet : float
        Outer boundary value of the concentration.
    v0 : (n_surface,) array
    x0 : optional warm start for the sweep iteration
    psor_config : PsorConfig

    Returns
    -------
    VIResult
    """
    if t < 0.0:
        raise ValueError("time must be non-negative")
    K = bulk_stiffness(mesh)
    rim = outer_nodes(mesh)
    b = _surface_load(mesh, v0)
    A = eliminate(K, rim)
    rhs = b - dirichlet_lift(K, rim, t * u_dirichlet)
    rhs[rim] = t * u_dirichlet
    z, info = psor_solve(A, rhs, mesh.surface_nodes, x0=x0, config=psor_config)
    return _finish(mesh, A, rhs, z, info)


class PviProblem:
    """Implicit Euler stepping of the parabolic obstacle problem.

    Holds the assembled step matrix so repeated :meth:`step` calls only
    pay for the inequality solve.  With ``delta_omega = 0`` each step
    reduces to the stationary problem.
    """

    def __init__(
        self,
        mesh: Mesh,
        tau: float,
        delta_omega: float,
        u0: np.ndarray,
        v0: np.ndarray,
        u_dirichlet: float,
        psor_config: PsorConfig = PsorConfig(),
    ) -> None:
        if tau <= 0.0:
            raise ValueError("step size must be positive")
        if delta_omega < 0.0:
            raise ValueError("bulk time-scale coefficient must be non-negative")
        self.mesh = mesh
        self.tau = tau
        self.delta_omega = delta_omega
        self.u_dirichlet = u_dirichlet
        self.psor_config = psor_config

        u0 = np.asarray(u0, dtype=float)
        if u0.shape != (mesh.n_vertices,):
            raise ValueError("u0 must carry one value per vertex")
        K = bulk_stiffness(mesh)
        self._mass_diag = bulk_mass(mesh, lumped=True).diagonal()
        self._rim = outer_nodes(mesh)
        scale = delta_omega / tau
        A_full = (
            sparse.diags(scale * self._mass_diag) + K if delta_omega > 0.0 else K
        )
        self.A = eliminate(A_full, self._rim)
        self._lift_unit = dirichlet_lift(A_full, self._rim, 1.0)
        self._load = _surface_load(mesh, v0) + delta_omega * self._mass_diag * u0

    def step(self, z_prev: np.ndarray, t: float) -> VIResult:
        """Advance the cumulative concentration to time ``t``."""
        scale = self.delta_omega / self.tau
        rhs = self._load + scale * self._mass_diag * z_prev
        boundary_value = t * self.u_dirichlet
        rhs = rhs - boundary_value * self._lift_unit
        rhs[self._rim] = boundary_value
        z, info = psor_solve(
            self.A, rhs, self.mesh.surface_nodes, x0=z_prev, config=self.psor_config
        )
        return _finish(self.mesh, self.A, rhs, z, info)


def solve_pvi_step(
    mesh: Mesh,
    z_prev: np.ndarray,
    tau: float,
    t: float,
    delta_omega: float,
    u0: np.ndarray,
    v0: np.ndarray,
    u_dirichlet: float,
    psor_config: PsorConfig = PsorConfig(),
) -> VIResult:
    """One implicit Euler step of the parabolic obstacle problem."""
    problem = PviProblem(mesh, tau, delta_omega, u0, v0, u_dirichlet, psor_config)
    return problem.step(z_prev, t)


def recover_fields(
    mesh: Mesh,
    z: np.ndarray,
    z_earlier: np.ndarray,
    tau: float,
    w0: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Physical fields from the cumulative concentration.

    The concentration is the backward difference ``(z - z_earlier)/tau``;
    the surface density adds the weak surface flux of ``z`` to the
    initial density, which complementarity keeps non-negative and pins
    to zero on the non-contact set.

    Returns
    -------
    (U, W) : bulk concentration per vertex, surface density per surface node
    """
    if tau <= 0.0:
        raise ValueError("difference interval must be positive")
    U = (np.asarray(z, dtype=float) - np.asarray(z_earlier, dtype=float)) / tau
    K = bulk_stiffness(mesh)
    m_surf = surface_mass(mesh, lumped=True).diagonal()
    flux = (K @ z)[mesh.surface_nodes] / m_surf
    W = np.asarray(w0, dtype=float) + flux
    return U, W


def _split_indices(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    surface = mesh.surface_nodes
    rim = outer_nodes(mesh)
    interior = np.setdiff1d(np.arange(mesh.n_vertices), np.concatenate([surface, rim]))
    return surface, rim, interior


DENSE_DTN_LIMIT = 2000


def dtn_matrix(mesh: Mesh, cg_config: CgConfig | None = None) -> np.ndarray:
    """Dense Dirichlet-to-Neumann matrix on the surface nodes.

    Entry (i, j): weak surface flux at node i of the discrete harmonic
    extension that is 1 at surface node j, 0 at the other surface nodes
    and 0 on the outer rim.  Symmetric positive definite by
    construction; assembled column by column via interior CG solves, so
    only meshes with at most :data:`DENSE_DTN_LIMIT` surface nodes are
    accepted (use :class:`DtnOperator` beyond that).
    """
    ns = mesh.n_surface
    if ns > DENSE_DTN_LIMIT:
        raise ValueError(
            f"{ns} surface nodes exceed the dense limit {DENSE_DTN_LIMIT}; "
            "use DtnOperator"
        )
    cfg = cg_config or CgConfig(rel_tol=1e-14, abs_tol=1e-15, preconditioner="jacobi")
    K = bulk_stiffness(mesh).tocsr()
    surface, _, interior = _split_indices(mesh)
    K_ss = K[surface][:, surface].toarray()
    K_si = K[surface][:, interior].tocsr()
    K_is = K[interior][:, surface].tocsr()
    K_ii = K[interior][:, interior].tocsr()
    A0 = np.array(K_ss)
    x = None
    for j in range(ns):
        col = np.asarray(K_is[:, j].todense()).ravel()
        x, info = cg_solve(K_ii, col, x0=x, config=cfg)
        if not info.converged:
            raise SolverError("interior solve for the surface reduction stalled")
        A0[:, j] -= K_si @ x
    return A0


class DtnOperator:
    """Matrix-free Dirichlet-to-Neumann application for large surfaces."""

    def __init__(self, mesh: Mesh, cg_config: CgConfig | None = None) -> None:
        self.mesh = mesh
        self.cfg = cg_config or CgConfig(
            rel_tol=1e-14, abs_tol=1e-15, preconditioner="jacobi"
        )
        K = bulk_stiffness(mesh).tocsr()
        surface, _, interior = _split_indices(mesh)
        self._K_ss = K[surface][:, surface].tocsr()
        self._K_si = K[surface][:, interior].tocsr()
        self._K_is = K[interior][:, surface].tocsr()
        self._K_ii = K[interior][:, interior].tocsr()
        self.shape = (surface.size, surface.size)

    def __matmul__(self, v: np.ndarray) -> np.ndarray:
        x, info = cg_solve(self._K_ii, self._K_is @ v, config=self.cfg)
        if not info.converged:
            raise SolverError("interior solve for the surface reduction stalled")
        return self._K_ss @ v - self._K_si @ x


def dtn_load(mesh: Mesh, u_dirichlet: float, cg_config: CgConfig | None = None) -> np.ndarray:
    """Per-unit-time surface flux of the outer-rim Dirichlet lift.

    With the surface clamped to zero and the outer rim at ``u_dirichlet``,
    the discrete harmonic fill-in drives a negative flux onto the
    surface; the stationary inequality sees it scaled by time.
    """
    cfg = cg_config or CgConfig(rel_tol=1e-14, abs_tol=1e-15, preconditioner="jacobi")
    K = bulk_stiffness(mesh).tocsr()
    surface, rim, interior = _split_indices(mesh)
    ones = np.full(rim.size, u_dirichlet)
    rhs = -(K[interior][:, rim] @ ones)
    y, info = cg_solve(K[interior][:, interior].tocsr(), rhs, config=cfg)
    if not info.converged:
        raise SolverError("interior solve for the surface load stalled")
    return K[surface][:, interior] @ y + K[surface][:, rim] @ ones


def solve_evi_via_dtn(
    mesh: Mesh,
    t: float,
    u_dirichlet: float,
    v0: np.ndarray,
    psor_config: PsorConfig = PsorConfig(),
    cg_config: CgConfig | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Surface-only obstacle solve through the Dirichlet-to-Neumann map.

    Independent route to the surface values of :func:`solve_evi`: the
    interior is eliminated exactly, leaving a dense complementarity
    system on the surface nodes alone.

    Returns
    -------
    (z_surface, dtn, load) : the surface solution, the dense map, and
    the per-unit-time rim load used on the right-hand side.
    """
    A0 = dtn_matrix(mesh, cg_config)
    g = dtn_load(mesh, u_dirichlet, cg_config)
    m_surf = surface_mass(mesh, lumped=True).diagonal()
    b = m_surf * np.asarray(v0, dtype=float) - t * g
    z_s, info = psor_solve(
        sparse.csr_matrix(A0), b, np.arange(mesh.n_surface), config=psor_config
    )
    if not info.converged:
        raise SolverError("surface obstacle solve stalled")
    return z_s, A0, g


def extract_free_boundary(
    mesh: Mesh,
    z: np.ndarray,
    threshold: float = DEFAULT_CONTACT_THRESHOLD,
) -> list[FreeBoundaryArc]:
    """Contact arcs of the surface, one row per maximal arc.

    A surface node is in contact while its cumulative concentration
    stays at or below ``threshold``.  Arc endpoints are placed halfway
    between the last contact node and its first non-contact neighbour,
    so they converge with the surface resolution.  Angles come from
    ``atan2`` on the node coordinates, normalized to [0, 2*pi); a loop
    entirely in contact reports the full circle.
    """
    z = np.asarray(z, dtype=float)
    values = z[mesh.surface_nodes]
    arcs: list[FreeBoundaryArc] = []
    for loop_id, (begin, end) in enumerate(mesh.surface_loops):
        nodes = mesh.surface_nodes[begin:end]
        local = values[begin:end]
        contact = local <= threshold
        pts = mesh.vertices[nodes]
        theta = np.mod(np.arctan2(pts[:, 1], pts[:, 0]), 2.0 * np.pi)
        nloop = nodes.size
        seg_len = np.linalg.norm(pts[(np.arange(nloop) + 1) % nloop] - pts, axis=1)
        if not np.any(contact):
            continue
        if np.all(contact):
            arcs.append(FreeBoundaryArc(loop_id, 0.0, 2.0 * np.pi, float(seg_len.sum())))
            continue
        # Walk maximal circular runs of contact nodes.
        starts = [
            i for i in range(nloop) if contact[i] and not contact[(i - 1) % nloop]
        ]
        for i0 in starts:
            run = [i0]
            while contact[(run[-1] + 1) % nloop]:
                run.append((run[-1] + 1) % nloop)
            i1 = run[-1]
            prev = (i0 - 1) % nloop
            nxt = (i1 + 1) % nloop
            gap_in = np.mod(theta[i0] - theta[prev], 2.0 * np.pi)
            gap_out = np.mod(theta[nxt] - theta[i1], 2.0 * np.pi)
            theta_start = float(np.mod(theta[prev] + 0.5 * gap_in, 2.0 * np.pi))
            theta_end = float(np.mod(theta[i1] + 0.5 * gap_out, 2.0 * np.pi))
            inner = sum(float(seg_len[run[k]]) for k in range(len(run) - 1))
            length = 0.5 * float(seg_len[prev]) + inner + 0.5 * float(seg_len[i1])
            arcs.append(FreeBoundaryArc(loop_id, theta_start, theta_end, length))
    return arcs
