"""Mesh generation, refinement, and interchange-format tests."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bsfree.mesh import (
    INNER,
    OUTER,
    AnnulusSpec,
    MeshError,
    MeshFormatError,
    build_mesh,
    export_mesh,
    generate_annulus,
    import_mesh,
    mesh_size,
    min_angle,
    refine_uniform,
    triangle_areas,
)


def _edge_count(mesh) -> int:
    edges = set()
    for a, b, c in mesh.triangles:
        edges.update({(min(a, b), max(a, b)), (min(b, c), max(b, c)), (min(c, a), max(c, a))})
    return len(edges)


def _polygon_annulus_area(spec: AnnulusSpec) -> float:
    # The triangulation fills the region between two inscribed n-gons.
    n = spec.n_angular
    return 0.5 * n * math.sin(2.0 * math.pi / n) * (spec.r_outer**2 - spec.r_inner**2)


def test_coarse_annulus_counts() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    assert mesh.n_vertices == 24
    assert mesh.n_triangles == 32
    assert mesh.boundary_edges.shape[0] == 16
    assert mesh.n_surface == 8
    assert list(mesh.surface_nodes) == list(range(8))


def test_octagon_surface_perimeter() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    seg = mesh.vertices[mesh.surface_segments]
    perimeter = float(np.linalg.norm(seg[:, 1] - seg[:, 0], axis=1).sum())
    assert perimeter == pytest.approx(16.0 * math.sin(math.pi / 8.0), abs=1e-12)
    assert perimeter == pytest.approx(6.122934917841436, abs=1e-12)


def test_fine_annulus_area_close_to_continuum() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 256, 32, 1.2))
    area = float(triangle_areas(mesh).sum())
    assert abs(area - 3.0 * math.pi) / (3.0 * math.pi) < 1e-3


def test_annulus_euler_characteristic_zero() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 16, 3, 1.5))
    chi = mesh.n_vertices - _edge_count(mesh) + mesh.n_triangles
    assert chi == 0


def test_grading_concentrates_layers_at_surface() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 4, 2.0))
    radii = np.unique(np.round(np.linalg.norm(mesh.vertices, axis=1), 12))
    widths = np.diff(radii)
    assert np.all(np.diff(widths) > 0.0)
    assert widths[0] == pytest.approx(1.0 / 15.0, rel=1e-12)
    assert radii[0] == 1.0 and radii[-1] == 2.0


@given(
    n_angular=st.integers(min_value=8, max_value=40),
    n_radial=st.integers(min_value=2, max_value=6),
    r_inner=st.floats(min_value=0.3, max_value=2.0),
    span=st.floats(min_value=0.2, max_value=3.0),
    grading=st.floats(min_value=1.0, max_value=4.0),
)
@settings(max_examples=30, deadline=None)
def test_generated_annulus_invariants(
    n_angular: int, n_radial: int, r_inner: float, span: float, grading: float
) -> None:
    spec = AnnulusSpec(r_inner, r_inner + span, n_angular, n_radial, grading)
    mesh = generate_annulus(spec)
    areas = triangle_areas(mesh)
    assert np.all(areas > 0.0)
    assert float(areas.sum()) == pytest.approx(_polygon_annulus_area(spec), rel=1e-10)
    assert mesh.n_vertices - _edge_count(mesh) + mesh.n_triangles == 0
    assert mesh.n_surface == n_angular
    assert min_angle(mesh) > 0.0
    markers = set(mesh.boundary_markers)
    assert markers == {INNER, OUTER}


def test_refine_counts_and_area() -> None:
    coarse = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    fine = refine_uniform(coarse)
    assert fine.n_triangles == 4 * coarse.n_triangles
    assert fine.n_vertices == coarse.n_vertices + _edge_count(coarse)
    assert fine.boundary_edges.shape[0] == 2 * coarse.boundary_edges.shape[0]
    # Chord midpoints leave the polygonal domain unchanged.
    assert float(triangle_areas(fine).sum()) == pytest.approx(
        float(triangle_areas(coarse).sum()), rel=1e-13
    )
    assert np.array_equal(fine.vertices[: coarse.n_vertices], coarse.vertices)


def test_refine_preserves_min_angle_and_halves_h() -> None:
    coarse = generate_annulus(AnnulusSpec(1.0, 2.0, 12, 3, 1.4))
    fine = refine_uniform(coarse)
    assert min_angle(fine) == pytest.approx(min_angle(coarse), abs=1e-12)
    assert mesh_size(fine) == pytest.approx(0.5 * mesh_size(coarse), rel=1e-13)


def test_refine_surface_order_interleaves_midpoints() -> None:
    coarse = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    fine = refine_uniform(coarse)
    assert fine.n_surface == 16
    assert fine.surface_nodes[0] == 0
    angles = np.arctan2(*fine.vertices[fine.surface_nodes, ::-1].T)
    assert np.all(np.diff(np.unwrap(angles)) > 0.0)
    # Parents alternate with new midpoints around the loop.
    assert set(fine.surface_nodes[::2]) == set(coarse.surface_nodes)


def test_refine_projection_restores_circle() -> None:
    coarse = generate_annulus(AnnulusSpec(1.0, 2.0, 16, 2, 1.0))
    flat = refine_uniform(coarse)
    projected = refine_uniform(coarse, project_boundary=True)
    r_flat = np.linalg.norm(flat.vertices[flat.surface_nodes], axis=1)
    r_proj = np.linalg.norm(projected.vertices[projected.surface_nodes], axis=1)
    assert r_flat.min() < 1.0 - 1e-4
    assert np.allclose(r_proj, 1.0, atol=1e-14)
    assert float(triangle_areas(projected).sum()) > float(triangle_areas(flat).sum())


def test_projection_requires_recorded_radii() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    text = export_mesh(mesh)
    assert import_mesh(text).r_inner == 1.0
    assert import_mesh(text).r_outer == 2.0

    stripped = "\n".join(l for l in text.splitlines() if not l.startswith("radii")) + "\n"
    imported = import_mesh(stripped)
    assert imported.r_inner is None
    with pytest.raises(MeshError, match="radii"):
        refine_uniform(imported, project_boundary=True)


def test_spec_validation() -> None:
    with pytest.raises(MeshError, match="r_inner < r_outer"):
        AnnulusSpec(2.0, 1.0, 8, 2)
    with pytest.raises(MeshError, match="n_angular"):
        AnnulusSpec(1.0, 2.0, 7, 2)
    with pytest.raises(MeshError, match="n_radial"):
        AnnulusSpec(1.0, 2.0, 8, 1)
    with pytest.raises(MeshError, match="grading"):
        AnnulusSpec(1.0, 2.0, 8, 2, 4.5)
    with pytest.raises(MeshError, match="grading"):
        AnnulusSpec(1.0, 2.0, 8, 2, 0.9)


def test_roundtrip_is_exact() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.5, 12, 3, 1.7))
    again = import_mesh(export_mesh(mesh))
    assert np.array_equal(again.vertices, mesh.vertices)
    assert np.array_equal(again.triangles, mesh.triangles)
    assert np.array_equal(again.boundary_edges, mesh.boundary_edges)
    assert list(again.boundary_markers) == list(mesh.boundary_markers)
    assert np.array_equal(again.surface_nodes, mesh.surface_nodes)


@given(
    n_angular=st.integers(min_value=8, max_value=24),
    n_radial=st.integers(min_value=2, max_value=4),
)
@settings(max_examples=15, deadline=None)
def test_roundtrip_property(n_angular: int, n_radial: int) -> None:
    mesh = generate_annulus(AnnulusSpec(0.7, 1.9, n_angular, n_radial, 1.3))
    again = import_mesh(export_mesh(mesh))
    assert np.array_equal(again.vertices, mesh.vertices)
    assert np.array_equal(again.surface_segments, mesh.surface_segments)


def _square_strip() -> tuple[np.ndarray, np.ndarray]:
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    triangles = np.array([[0, 1, 2], [0, 2, 3]])
    return vertices, triangles


def test_clockwise_triangle_rejected() -> None:
    vertices, triangles = _square_strip()
    triangles = triangles[:, ::-1]
    with pytest.raises(MeshError, match="counterclockwise"):
        build_mesh(vertices, triangles, np.empty((0, 2), dtype=int), np.empty(0, dtype=object))


def test_missing_boundary_edge_rejected() -> None:
    vertices, triangles = _square_strip()
    edges = np.array([[0, 1], [1, 2], [2, 3]])
    markers = np.array([INNER, OUTER, OUTER], dtype=object)
    with pytest.raises(MeshError, match="not declared"):
        build_mesh(vertices, triangles, edges, markers)


def test_interior_edge_rejected_as_boundary() -> None:
    vertices, triangles = _square_strip()
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0], [0, 2]])
    markers = np.array([INNER, OUTER, OUTER, OUTER, OUTER], dtype=object)
    with pytest.raises(MeshError, match="interior"):
        build_mesh(vertices, triangles, edges, markers)


def test_vertex_with_both_markers_rejected() -> None:
    vertices, triangles = _square_strip()
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0]])
    markers = np.array([INNER, OUTER, OUTER, OUTER], dtype=object)
    with pytest.raises(MeshError, match="both boundary markers"):
        build_mesh(vertices, triangles, edges, markers)


def test_triangle_with_two_surface_edges_rejected() -> None:
    # A notched hole: the triangle filling the notch owns two edges of
    # the inner loop while every other invariant holds.
    vertices = np.array(
        [
            [1.0, -1.0],   # 0: hole corner
            [0.3, 0.0],    # 1: notch tip (hole is reflex here)
            [1.0, 1.0],    # 2: hole corner
            [-1.0, 0.0],   # 3: hole corner
            [2.0, -2.0],   # 4..7: outer square
            [2.0, 2.0],
            [-2.0, 2.0],
            [-2.0, -2.0],
        ]
    )
    triangles = np.array(
        [
            [2, 1, 0],  # fills the notch: edges (0,1) and (1,2) are on the hole
            [0, 4, 2],
            [4, 5, 2],
            [2, 5, 6],
            [2, 6, 3],
            [3, 6, 7],
            [3, 7, 0],
            [0, 7, 4],
        ]
    )
    edges = np.array([[0, 1], [1, 2], [2, 3], [3, 0], [4, 5], [5, 6], [6, 7], [7, 4]])
    markers = np.array([INNER] * 4 + [OUTER] * 4, dtype=object)
    with pytest.raises(MeshError, match="edges on the inner boundary"):
        build_mesh(vertices, triangles, edges, markers)


def test_format_errors_carry_line_numbers() -> None:
    good = export_mesh(generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0)))
    with pytest.raises(MeshFormatError, match="line 1"):
        import_mesh("not-a-mesh 9\n" + good.split("\n", 1)[1])
    lines = good.splitlines()
    lines[1] = "vertices twenty"
    with pytest.raises(MeshFormatError, match="line 2"):
        import_mesh("\n".join(lines))
    lines = good.splitlines()
    lines[5] = "0.1 not-a-number"
    with pytest.raises(MeshFormatError, match="line 6"):
        import_mesh("\n".join(lines))
    with pytest.raises(MeshFormatError, match="unexpected end"):
        import_mesh("\n".join(good.splitlines()[:10]))
    with pytest.raises(MeshFormatError, match="trailing"):
        import_mesh(good + "surplus row\n")
    with pytest.raises(MeshFormatError, match="marker"):
        bad = good.replace(" inner", " inside", 1)
        import_mesh(bad)


def test_comments_and_blank_lines_ignored() -> None:
    mesh = generate_annulus(AnnulusSpec(1.0, 2.0, 8, 2, 1.0))
    text = export_mesh(mesh)
    lines = text.splitlines()
    decorated = [lines[0], "# a comment", ""] + [f"{ln}  # inline" for ln in lines[1:]]
    again = import_mesh("\n".join(decorated) + "\n")
    assert np.array_equal(again.triangles, mesh.triangles)
