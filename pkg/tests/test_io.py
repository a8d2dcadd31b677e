"""Round trips and format pins for the artifact writers."""

import numpy as np
import pytest
from scipy import io as spio
from scipy import sparse

from bsfree.assembly import surface_mass
from bsfree.freeboundary import FreeBoundaryArc, solve_evi
from bsfree.io import (
    FREE_BOUNDARY_COLUMNS,
    SNAPSHOT_COLUMNS,
    VI_COLUMNS,
    read_diagnostics_csv,
    read_snapshot_csv,
    read_vi_csv,
    write_diagnostics_csv,
    write_free_boundary_csv,
    write_matrix_market,
    write_snapshot_csv,
    write_vi_csv,
    write_vtk,
)
from bsfree.linalg import PsorConfig
from bsfree.mesh import AnnulusSpec, generate_annulus


@pytest.fixture(scope="module")
def mesh():
    return generate_annulus(AnnulusSpec(1.0, 2.0, 12, 2, 1.0))


def _fields(mesh):
    rng = np.random.default_rng(7)
    U = rng.uniform(0.0, 1.0, mesh.n_vertices)
    W = rng.uniform(0.0, 2.0, mesh.n_surface)
    return U, W


def test_snapshot_roundtrip_is_exact(mesh, tmp_path) -> None:
    U, W = _fields(mesh)
    path = tmp_path / "snap.csv"
    write_snapshot_csv(path, mesh, 0.125, U, W)

    back = read_snapshot_csv(path)
    assert back["time"] == 0.125
    assert np.array_equal(back["U"], U)
    assert np.array_equal(back["W"], W)
    assert np.array_equal(back["xy"], mesh.vertices)
    assert np.array_equal(back["surface_nodes"], mesh.surface_nodes)
    kinds = back["node_kind"]
    assert all(kinds[n] == "surface" for n in mesh.surface_nodes)
    assert sum(k == "surface" for k in kinds) == mesh.n_surface


def test_snapshot_header_and_empty_bulk_w(mesh, tmp_path) -> None:
    U, W = _fields(mesh)
    path = tmp_path / "snap.csv"
    write_snapshot_csv(path, mesh, 0.5, U, W)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(SNAPSHOT_COLUMNS)
    # surface nodes come first in the generated ordering; the last row is
    # a pure bulk node and must leave value_w empty
    assert lines[-1].endswith(",")
    surface_row = lines[1 + mesh.surface_nodes[0]]
    assert ",surface," in surface_row and not surface_row.endswith(",")


def test_snapshot_reader_rejects_foreign_header(tmp_path) -> None:
    path = tmp_path / "bad.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="unexpected snapshot header"):
        read_snapshot_csv(path)


def test_diagnostics_roundtrip(tmp_path) -> None:
    rows = np.array(
        [
            [0, 0.0, 0.1, 1.0, 0.0, 2.0, 3.5, 0.0],
            [1, 1e-4, 0.09999, 1.0, 0.0, 1.99, 3.5 - 1e-13, 1.7e-5],
        ]
    )
    path = tmp_path / "diag.csv"
    write_diagnostics_csv(path, rows)
    assert np.array_equal(read_diagnostics_csv(path), rows)
    first = path.read_text().splitlines()[1]
    assert first.startswith("0,0.0,")


def test_vi_roundtrip_and_summary(mesh, tmp_path) -> None:
    w0 = np.ones(mesh.n_surface)
    result = solve_evi(mesh, 0.4, 1.0, -w0, psor_config=PsorConfig(omega=1.8))
    path = tmp_path / "vi.csv"
    write_vi_csv(path, mesh, result)

    text = path.read_text()
    assert text.splitlines()[0] == ",".join(VI_COLUMNS)
    assert "# summary: sweeps=" in text

    back = read_vi_csv(path)
    assert np.array_equal(back["node_id"], mesh.surface_nodes)
    assert np.array_equal(back["z"], result.z[mesh.surface_nodes])
    assert np.array_equal(back["active"], result.active)
    assert np.array_equal(back["multiplier"], result.multiplier)


def test_free_boundary_csv(tmp_path) -> None:
    arcs = [FreeBoundaryArc(0, 0.5, 1.25, 0.75), FreeBoundaryArc(0, 3.0, 0.1, 3.3)]
    path = tmp_path / "fb.csv"
    write_free_boundary_csv(path, arcs)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(FREE_BOUNDARY_COLUMNS)
    assert lines[1] == "0,0.5,1.25,0.75"
    assert len(lines) == 3


def test_vtk_layout(mesh, tmp_path) -> None:
    U, W = _fields(mesh)
    path = tmp_path / "snap.vtk"
    write_vtk(path, mesh, U, W)
    lines = path.read_text().splitlines()
    assert lines[0] == "# vtk DataFile Version 3.0"
    assert lines[2] == "ASCII"
    assert lines[3] == "DATASET UNSTRUCTURED_GRID"
    assert lines[4] == f"POINTS {mesh.n_vertices} double"

    cells_at = lines.index(f"CELLS {mesh.n_triangles} {4 * mesh.n_triangles}")
    assert lines[cells_at + 1].startswith("3 ")
    assert f"POINT_DATA {mesh.n_vertices}" in lines
    u_at = lines.index("SCALARS U double 1")
    assert lines[u_at + 1] == "LOOKUP_TABLE default"
    w_at = lines.index("SCALARS W double 1")

    # W is padded with zeros away from the surface
    values = np.array([float(v) for v in lines[w_at + 2 : w_at + 2 + mesh.n_vertices]])
    padded = np.zeros(mesh.n_vertices)
    padded[mesh.surface_nodes] = W
    assert np.array_equal(values, padded)


def test_matrix_market_roundtrip(mesh, tmp_path) -> None:
    M = surface_mass(mesh, lumped=False)
    path = tmp_path / "m.mtx"
    write_matrix_market(path, M)
    back = spio.mmread(path)
    assert np.allclose(sparse.csr_matrix(back).toarray(), M.toarray(), rtol=0, atol=0)


def test_writers_are_deterministic(mesh, tmp_path) -> None:
    U, W = _fields(mesh)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    write_snapshot_csv(a, mesh, 1 / 3, U, W)
    write_snapshot_csv(b, mesh, 1 / 3, U, W)
    assert a.read_bytes() == b.read_bytes()
