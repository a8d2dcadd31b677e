"""P1 finite element operators on the bulk mesh and its surface loop.

Bulk operators live on all mesh vertices; surface operators live on the
surface nodes in ``mesh.surface_nodes`` order and treat each loop as a
closed polygonal curve.  Mass matrices lump by default, which is what
keeps the coupled time stepping monotone; pass ``lumped=False`` for the
consistent Galerkin mass.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .mesh import Mesh, OUTER, signed_areas


def triangle_stiffness(points: np.ndarray) -> np.ndarray:
    """Element stiffness of one P1 triangle given its (3, 2) vertex array."""
    x, y = points[:, 0], points[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    area = 0.5 * (b[0] * c[1] - b[1] * c[0])
    if area <= 0.0:
        raise ValueError("triangle is degenerate or clockwise")
    return (np.outer(b, b) + np.outer(c, c)) / (4.0 * area)


def triangle_mass(points: np.ndarray, lumped: bool = True) -> np.ndarray:
    """Element mass of one P1 triangle; lumped collapses rows to the diagonal."""
    x, y = points[:, 0], points[:, 1]
    area = 0.5 * ((x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0]))
    if lumped:
        return np.eye(3) * (area / 3.0)
    return (area / 12.0) * np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]])


def segment_stiffness(length: float) -> np.ndarray:
    return np.array([[1.0, -1.0], [-1.0, 1.0]]) / length


def segment_mass(length: float, lumped: bool = True) -> np.ndarray:
    if lumped:
        return np.eye(2) * (length / 2.0)
    return (length / 6.0) * np.array([[2.0, 1.0], [1.0, 2.0]])


def _bulk_geometry(mesh: Mesh) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    tri = mesh.triangles
    p = mesh.vertices
    x = p[tri, 0]
    y = p[tri, 1]
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1)
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1)
    areas = signed_areas(p, tri)
    return b, c, areas


def bulk_stiffness(mesh: Mesh) -> sparse.csr_matrix:
    """Assemble the P1 stiffness matrix of the Laplacian on the bulk mesh."""
    b, c, areas = _bulk_geometry(mesh)
    local = (b[:, :, None] * b[:, None, :] + c[:, :, None] * c[:, None, :]) / (
        4.0 * areas[:, None, None]
    )
    tri = mesh.triangles
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    n = mesh.n_vertices
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def bulk_mass(mesh: Mesh, lumped: bool = True) -> sparse.csr_matrix:
    """Assemble the bulk mass matrix (lumped: diagonal of vertex areas / 3)."""
    tri = mesh.triangles
    areas = signed_areas(mesh.vertices, tri)
    n = mesh.n_vertices
    if lumped:
        diag = np.zeros(n)
        np.add.at(diag, tri.ravel(), np.repeat(areas / 3.0, 3))
        return sparse.diags(diag, format="csr")
    base = np.array([[2.0, 1.0, 1.0], [1.0, 2.0, 1.0], [1.0, 1.0, 2.0]]) / 12.0
    local = areas[:, None, None] * base[None, :, :]
    rows = np.repeat(tri, 3, axis=1).ravel()
    cols = np.tile(tri, (1, 3)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def _segment_lengths(mesh: Mesh) -> np.ndarray:
    seg = mesh.vertices[mesh.surface_segments]
    return np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1)


def surface_stiffness(mesh: Mesh) -> sparse.csr_matrix:
    """Laplace-Beltrami stiffness on the surface loops, local indexing."""
    idx = mesh.surface_index()
    seg = idx[mesh.surface_segments]
    lengths = _segment_lengths(mesh)
    w = 1.0 / lengths
    rows = np.concatenate([seg[:, 0], seg[:, 1], seg[:, 0], seg[:, 1]])
    cols = np.concatenate([seg[:, 0], seg[:, 1], seg[:, 1], seg[:, 0]])
    data = np.concatenate([w, w, -w, -w])
    ns = mesh.n_surface
    return sparse.coo_matrix((data, (rows, cols)), shape=(ns, ns)).tocsr()


def surface_mass(mesh: Mesh, lumped: bool = True) -> sparse.csr_matrix:
    """Mass matrix of the surface loops, local indexing."""
    idx = mesh.surface_index()
    seg = idx[mesh.surface_segments]
    lengths = _segment_lengths(mesh)
    ns = mesh.n_surface
    if lumped:
        diag = np.zeros(ns)
        np.add.at(diag, seg.ravel(), np.repeat(lengths / 2.0, 2))
        return sparse.diags(diag, format="csr")
    rows = np.concatenate([seg[:, 0], seg[:, 1], seg[:, 0], seg[:, 1]])
    cols = np.concatenate([seg[:, 0], seg[:, 1], seg[:, 1], seg[:, 0]])
    data = np.concatenate(
        [lengths / 3.0, lengths / 3.0, lengths / 6.0, lengths / 6.0]
    )
    return sparse.coo_matrix((data, (rows, cols)), shape=(ns, ns)).tocsr()


def trace_coupling(mesh: Mesh) -> sparse.csr_matrix:
    """Injection of surface nodal loads into the bulk vector.

    Column j holds the lumped surface mass of surface node j at its
    global vertex row, so column sums equal the lumped surface mass and
    discrete bulk/surface bookkeeping balances exactly.
    """
    m_surf = surface_mass(mesh, lumped=True).diagonal()
    ns = mesh.n_surface
    return sparse.coo_matrix(
        (m_surf, (mesh.surface_nodes, np.arange(ns))),
        shape=(mesh.n_vertices, ns),
    ).tocsr()


def outer_nodes(mesh: Mesh) -> np.ndarray:
    """Sorted vertex ids on the outer boundary (Dirichlet candidates)."""
    on_outer = mesh.boundary_edges[np.asarray(mesh.boundary_markers) == OUTER]
    return np.unique(on_outer)


def apply_dirichlet(
    A: sparse.spmatrix,
    b: np.ndarray,
    nodes: np.ndarray,
    values: float | np.ndarray,
) -> tuple[sparse.csr_matrix, np.ndarray]:
    """Eliminate Dirichlet rows and columns symmetrically.

    Constrained rows and columns are zeroed, the diagonal set to one,
    and the right-hand side receives the lifted column contribution so
    the reduced system stays symmetric positive definite and the
    constrained entries solve to exactly their prescribed values.
    """
    A = A.tocsr()
    n = A.shape[0]
    lift = np.zeros(n)
    lift[nodes] = values
    free = np.ones(n)
    free[nodes] = 0.0
    b_out = free * (b - A @ lift)
    b_out[nodes] = lift[nodes]
    P = sparse.diags(free)
    A_out = (P @ A @ P).tolil()
    for i in nodes:
        A_out[i, i] = 1.0
    return A_out.tocsr(), b_out


def dirichlet_lift(A: sparse.spmatrix, nodes: np.ndarray, values: float | np.ndarray) -> np.ndarray:
    """Column contribution A[:, nodes] @ values, reusable across time steps."""
    n = A.shape[0]
    lift = np.zeros(n)
    lift[nodes] = values
    out = np.asarray(A @ lift)
    out[nodes] = 0.0
    return out


def eliminate(A: sparse.spmatrix, nodes: np.ndarray) -> sparse.csr_matrix:
    """Matrix part of :func:`apply_dirichlet` when the load changes per step."""
    n = A.shape[0]
    free = np.ones(n)
    free[nodes] = 0.0
    P = sparse.diags(free)
    out = (P @ A.tocsr() @ P).tolil()
    for i in nodes:
        out[i, i] = 1.0
    return out.tocsr()
