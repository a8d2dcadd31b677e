"""Triangulated annular meshes with a marked interior boundary.

The domain is a planar region whose interior boundary (the "surface",
marked ``inner``) carries its own one-dimensional mesh made of the
boundary edges of the triangulation.  Meshes are generated structured on
an annulus, imported from a small ASCII format, or derived by uniform
red refinement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

INNER = "inner"
OUTER = "outer"

MESH_FORMAT_HEADER = "bsfree-mesh 1"


class MeshError(ValueError):
    """Raised when mesh data violates a structural invariant."""


class MeshFormatError(MeshError):
    """Raised on malformed mesh files; message carries the line number."""


@dataclass(frozen=True)
class AnnulusSpec:
    """Parameters for a structured annulus triangulation.

    Layers are spaced geometrically: with ``grading > 1`` consecutive
    layer widths grow by that factor moving outward, so the thinnest
    layers sit against the inner circle.
    """

    r_inner: float
    r_outer: float
    n_angular: int
    n_radial: int
    grading: float = 1.0

    def __post_init__(self) -> None:
        if not self.r_inner < self.r_outer:
            raise MeshError("annulus requires r_inner < r_outer")
        if self.n_angular < 8:
            raise MeshError("annulus requires n_angular >= 8")
        if self.n_radial < 2:
            raise MeshError("annulus requires n_radial >= 2")
        if not 1.0 <= self.grading <= 4.0:
            raise MeshError("annulus grading must lie in [1, 4]")


@dataclass(frozen=True)
class Mesh:
    """Immutable triangle mesh with marked boundary edges.

    Attributes
    ----------
    vertices : (n_vertices, 2) float array
    triangles : (n_triangles, 3) int array
        Counterclockwise vertex triples.
    boundary_edges : (n_boundary, 2) int array
    boundary_markers : (n_boundary,) array of str, ``inner`` or ``outer``
    surface_nodes : (n_surface,) int array
        Vertices on the inner boundary, ordered loop by loop; each loop
        starts at its smallest vertex index and runs counterclockwise.
    surface_segments : (n_surface, 2) int array
        Consecutive surface edges following ``surface_nodes`` order.
    surface_loops : tuple of (start, stop) slices into ``surface_nodes``
    r_inner, r_outer : float or None
        Circle radii when the mesh came from :func:`generate_annulus`
        (kept through refinement); ``None`` for imported meshes.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    boundary_markers: np.ndarray
    surface_nodes: np.ndarray = field(repr=False)
    surface_segments: np.ndarray = field(repr=False)
    surface_loops: tuple[tuple[int, int], ...] = field(repr=False)
    r_inner: float | None = None
    r_outer: float | None = None

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_surface(self) -> int:
        return self.surface_nodes.shape[0]

    def surface_index(self) -> np.ndarray:
        """Map global vertex id -> local surface index (-1 off the surface)."""
        idx = np.full(self.n_vertices, -1, dtype=np.int64)
        idx[self.surface_nodes] = np.arange(self.n_surface)
        return idx


def build_mesh(
    vertices: np.ndarray,
    triangles: np.ndarray,
    boundary_edges: np.ndarray,
    boundary_markers: np.ndarray,
    r_inner: float | None = None,
    r_outer: float | None = None,
) -> Mesh:
    """Assemble a :class:`Mesh`, deriving surface data and validating.

    Raises :class:`MeshError` naming the first violated invariant.
    """
    vertices = np.ascontiguousarray(vertices, dtype=np.float64)
    triangles = np.ascontiguousarray(triangles, dtype=np.int64)
    boundary_edges = np.ascontiguousarray(boundary_edges, dtype=np.int64)
    boundary_markers = np.asarray(boundary_markers, dtype=object)

    if vertices.ndim != 2 or vertices.shape[1] != 2:
        raise MeshError("vertices must be an (n, 2) array")
    if triangles.ndim != 2 or triangles.shape[1] != 3:
        raise MeshError("triangles must be an (m, 3) array")
    if boundary_edges.shape[0] != boundary_markers.shape[0]:
        raise MeshError("boundary edge and marker counts differ")

    n = vertices.shape[0]
    if triangles.size and (triangles.min() < 0 or triangles.max() >= n):
        raise MeshError("triangle references vertex out of range")
    if boundary_edges.size and (boundary_edges.min() < 0 or boundary_edges.max() >= n):
        raise MeshError("boundary edge references vertex out of range")
    for m in boundary_markers:
        if m not in (INNER, OUTER):
            raise MeshError(f"unknown boundary marker {m!r}")

    areas = signed_areas(vertices, triangles)
    if np.any(areas <= 0.0):
        bad = int(np.argmin(areas))
        raise MeshError(
            f"triangle {bad} has non-positive area {areas[bad]:.3e}; "
            "vertices must be listed counterclockwise"
        )

    # Boundary edges must be exactly the edges owned by one triangle.
    edge_count: dict[tuple[int, int], int] = {}
    for tri in triangles:
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            key = (int(min(a, b)), int(max(a, b)))
            edge_count[key] = edge_count.get(key, 0) + 1
    if any(c > 2 for c in edge_count.values()):
        raise MeshError("an edge is shared by more than two triangles")
    topological = {e for e, c in edge_count.items() if c == 1}
    declared = {(int(min(a, b)), int(max(a, b))) for a, b in boundary_edges}
    if len(declared) != boundary_edges.shape[0]:
        raise MeshError("duplicate boundary edge")
    if declared != topological:
        missing = topological - declared
        extra = declared - topological
        if missing:
            raise MeshError(f"boundary edge {sorted(missing)[0]} not declared")
        raise MeshError(f"declared boundary edge {sorted(extra)[0]} is interior")

    marker_of: dict[tuple[int, int], str] = {}
    for (a, b), m in zip(boundary_edges, boundary_markers):
        marker_of[(int(min(a, b)), int(max(a, b)))] = str(m)

    inner_vertices: set[int] = set()
    outer_vertices: set[int] = set()
    for (a, b), m in marker_of.items():
        target = inner_vertices if m == INNER else outer_vertices
        target.add(a)
        target.add(b)
    both = inner_vertices & outer_vertices
    if both:
        raise MeshError(f"vertex {sorted(both)[0]} carries both boundary markers")

    # No triangle may contribute more than one edge to the surface.
    inner_edges = {e for e, m in marker_of.items() if m == INNER}
    for t, tri in enumerate(triangles):
        owned = 0
        for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
            if (int(min(a, b)), int(max(a, b))) in inner_edges:
                owned += 1
        if owned > 1:
            raise MeshError(f"triangle {t} has {owned} edges on the inner boundary")

    surface_nodes, surface_segments, loops = _trace_surface_loops(vertices, inner_edges)

    for arr in (vertices, triangles, boundary_edges, surface_nodes, surface_segments):
        arr.setflags(write=False)
    boundary_markers.setflags(write=False)

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=boundary_edges,
        boundary_markers=boundary_markers,
        surface_nodes=surface_nodes,
        surface_segments=surface_segments,
        surface_loops=loops,
        r_inner=r_inner,
        r_outer=r_outer,
    )


def _trace_surface_loops(
    vertices: np.ndarray, inner_edges: set[tuple[int, int]]
) -> tuple[np.ndarray, np.ndarray, tuple[tuple[int, int], ...]]:
    """Order the inner boundary into closed counterclockwise loops."""
    if not inner_edges:
        raise MeshError("mesh has no inner boundary")
    neighbors: dict[int, list[int]] = {}
    for a, b in inner_edges:
        neighbors.setdefault(a, []).append(b)
        neighbors.setdefault(b, []).append(a)
    for v, nbs in neighbors.items():
        if len(nbs) != 2:
            raise MeshError(f"surface vertex {v} has degree {len(nbs)}, expected 2")

    nodes: list[int] = []
    segments: list[tuple[int, int]] = []
    loops: list[tuple[int, int]] = []
    unvisited = set(neighbors)
    while unvisited:
        start = min(unvisited)
        loop = [start]
        prev, cur = -1, start
        while True:
            a, b = neighbors[cur]
            nxt = b if a == prev else a
            if nxt == start:
                break
            if nxt not in unvisited:
                raise MeshError("inner boundary loops intersect")
            loop.append(nxt)
            prev, cur = cur, nxt
        # Shoelace over the loop polygon; reverse clockwise traversals.
        pts = vertices[loop]
        area2 = float(np.sum(pts[:, 0] * np.roll(pts[:, 1], -1) - np.roll(pts[:, 0], -1) * pts[:, 1]))
        if area2 < 0.0:
            loop = [loop[0]] + loop[:0:-1]
        begin = len(nodes)
        nodes.extend(loop)
        segments.extend((loop[i], loop[(i + 1) % len(loop)]) for i in range(len(loop)))
        loops.append((begin, len(nodes)))
        unvisited.difference_update(loop)

    return (
        np.asarray(nodes, dtype=np.int64),
        np.asarray(segments, dtype=np.int64),
        tuple(loops),
    )


def signed_areas(vertices: np.ndarray, triangles: np.ndarray) -> np.ndarray:
    """Signed triangle areas (positive for counterclockwise triples)."""
    p0 = vertices[triangles[:, 0]]
    u = vertices[triangles[:, 1]] - p0
    v = vertices[triangles[:, 2]] - p0
    return 0.5 * (u[:, 0] * v[:, 1] - u[:, 1] * v[:, 0])


def triangle_areas(mesh: Mesh) -> np.ndarray:
    return signed_areas(mesh.vertices, mesh.triangles)


def mesh_size(mesh: Mesh) -> float:
    """Longest edge length, the h in convergence statements."""
    tri = mesh.triangles
    h = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = mesh.vertices[tri[:, i]] - mesh.vertices[tri[:, j]]
        h = max(h, float(np.sqrt((d * d).sum(axis=1)).max()))
    return h


def min_angle(mesh: Mesh) -> float:
    """Smallest interior angle over all triangles, in radians."""
    p = [mesh.vertices[mesh.triangles[:, k]] for k in range(3)]
    smallest = math.pi
    for k in range(3):
        a = p[(k + 1) % 3] - p[k]
        b = p[(k + 2) % 3] - p[k]
        cosang = (a * b).sum(axis=1) / (
            np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1)
        )
        ang = np.arccos(np.clip(cosang, -1.0, 1.0))
        smallest = min(smallest, float(ang.min()))
    return smallest


def generate_annulus(spec: AnnulusSpec) -> Mesh:
    """Structured triangulation of the annulus r_inner <= |x| <= r_outer.

    Vertices are laid out ring by ring, innermost first, so the surface
    nodes are exactly ``0 .. n_angular-1``.  Each quadrilateral cell is
    split along the diagonal from the outer vertex at one angle to the
    inner vertex at the next; for ring trapezoids either diagonal choice
    keeps the triangulation Delaunay, which is what makes lumped-mass
    operators on these meshes monotone.

    Parameters
    ----------
    spec : AnnulusSpec
        Validated geometry and resolution parameters.

    Returns
    -------
    Mesh
        Annulus with ``inner``/``outer`` boundary markers and circle
        radii recorded for later boundary projection.
    """
    na, nr = spec.n_angular, spec.n_radial
    span = spec.r_outer - spec.r_inner
    if spec.grading == 1.0:
        widths = np.full(nr, span / nr)
    else:
        g = spec.grading
        w0 = span * (g - 1.0) / (g**nr - 1.0)
        widths = w0 * g ** np.arange(nr)
    radii = spec.r_inner + np.concatenate(([0.0], np.cumsum(widths)))
    radii[-1] = spec.r_outer

    theta = 2.0 * np.pi * np.arange(na) / na
    ct, st = np.cos(theta), np.sin(theta)
    vertices = np.empty(((nr + 1) * na, 2))
    for j, r in enumerate(radii):
        vertices[j * na : (j + 1) * na, 0] = r * ct
        vertices[j * na : (j + 1) * na, 1] = r * st

    triangles = np.empty((2 * na * nr, 3), dtype=np.int64)
    k = 0
    for j in range(nr):
        base = j * na
        for i in range(na):
            a = base + i
            b = a + na
            c = base + (i + 1) % na
            d = c + na
            triangles[k] = (a, b, c)
            triangles[k + 1] = (b, d, c)
            k += 2

    inner = [(i, (i + 1) % na) for i in range(na)]
    top = nr * na
    outer = [(top + i, top + (i + 1) % na) for i in range(na)]
    boundary_edges = np.asarray(inner + outer, dtype=np.int64)
    boundary_markers = np.asarray([INNER] * na + [OUTER] * na, dtype=object)

    return build_mesh(
        vertices,
        triangles,
        boundary_edges,
        boundary_markers,
        r_inner=spec.r_inner,
        r_outer=spec.r_outer,
    )


def refine_uniform(mesh: Mesh, project_boundary: bool = False) -> Mesh:
    """Red refinement: every triangle splits into four via edge midpoints.

    The parent vertices keep their indices and coordinates, so piecewise
    linear fields on the parent interpolate exactly onto the child.

    Parameters
    ----------
    mesh : Mesh
    project_boundary : bool
        If True, push new boundary midpoints out to the recorded circle
        radii instead of leaving them on the chord.  Requires a mesh
        carrying radii (a generated annulus or its refinements); plain
        chord midpoints keep the polygonal domain fixed, which is what
        mesh-convergence comparisons between refinement levels need.
    """
    if project_boundary and (mesh.r_inner is None or mesh.r_outer is None):
        raise MeshError("project_boundary needs a mesh with recorded circle radii")

    verts = [mesh.vertices]
    midpoint: dict[tuple[int, int], int] = {}
    next_id = mesh.n_vertices
    new_points: list[np.ndarray] = []

    def mid(a: int, b: int) -> int:
        nonlocal next_id
        key = (min(a, b), max(a, b))
        idx = midpoint.get(key)
        if idx is None:
            new_points.append(0.5 * (mesh.vertices[key[0]] + mesh.vertices[key[1]]))
            idx = next_id
            midpoint[key] = idx
            next_id += 1
        return idx

    triangles = np.empty((4 * mesh.n_triangles, 3), dtype=np.int64)
    k = 0
    for v0, v1, v2 in mesh.triangles:
        m01 = mid(v0, v1)
        m12 = mid(v1, v2)
        m20 = mid(v2, v0)
        triangles[k] = (v0, m01, m20)
        triangles[k + 1] = (v1, m12, m01)
        triangles[k + 2] = (v2, m20, m12)
        triangles[k + 3] = (m01, m12, m20)
        k += 4

    vertices = np.vstack(verts + [np.asarray(new_points)]) if new_points else mesh.vertices.copy()

    edges: list[tuple[int, int]] = []
    markers: list[str] = []
    for (a, b), m in zip(mesh.boundary_edges, mesh.boundary_markers):
        mab = midpoint[(int(min(a, b)), int(max(a, b)))]
        if project_boundary:
            radius = mesh.r_inner if m == INNER else mesh.r_outer
            p = vertices[mab]
            norm = math.hypot(p[0], p[1])
            vertices[mab] = p * (radius / norm)
        edges.extend([(int(a), mab), (mab, int(b))])
        markers.extend([str(m), str(m)])

    return build_mesh(
        vertices,
        triangles,
        np.asarray(edges, dtype=np.int64),
        np.asarray(markers, dtype=object),
        r_inner=mesh.r_inner,
        r_outer=mesh.r_outer,
    )


def export_mesh(mesh: Mesh) -> str:
    """Serialize to the ASCII interchange format.

    Layout: a ``bsfree-mesh 1`` header, then ``vertices N`` with one
    ``x y`` pair per line, ``triangles M`` with zero-based index rows,
    and ``boundary B`` with ``i j marker`` rows, optionally followed by
    a ``radii r_inner r_outer`` line recording the circle geometry of a
    generated annulus.  ``#`` starts a comment.
    """
    out = [MESH_FORMAT_HEADER]
    out.append(f"vertices {mesh.n_vertices}")
    for x, y in mesh.vertices:
        out.append(f"{float(x)!r} {float(y)!r}")
    out.append(f"triangles {mesh.n_triangles}")
    for a, b, c in mesh.triangles:
        out.append(f"{a} {b} {c}")
    out.append(f"boundary {mesh.boundary_edges.shape[0]}")
    for (a, b), m in zip(mesh.boundary_edges, mesh.boundary_markers):
        out.append(f"{a} {b} {m}")
    if mesh.r_inner is not None and mesh.r_outer is not None:
        out.append(f"radii {float(mesh.r_inner)!r} {float(mesh.r_outer)!r}")
    return "\n".join(out) + "\n"


def import_mesh(text: str) -> Mesh:
    """Parse the ASCII interchange format; inverse of :func:`export_mesh`.

    Malformed input raises :class:`MeshFormatError` with the offending
    line number; structurally invalid meshes raise :class:`MeshError`
    naming the first violated invariant.
    """
    lines = text.splitlines()

    def significant() -> list[tuple[int, str]]:
        rows = []
        for n, raw in enumerate(lines, start=1):
            stripped = raw.split("#", 1)[0].strip()
            if stripped:
                rows.append((n, stripped))
        return rows

    rows = significant()
    if not rows:
        raise MeshFormatError("line 1: empty mesh file")
    pos = 0

    def take(what: str) -> tuple[int, str]:
        nonlocal pos
        if pos >= len(rows):
            raise MeshFormatError(f"line {len(lines)}: unexpected end of file, expected {what}")
        row = rows[pos]
        pos += 1
        return row

    n, header = take("header")
    if header != MESH_FORMAT_HEADER:
        raise MeshFormatError(f"line {n}: expected '{MESH_FORMAT_HEADER}' header, got {header!r}")

    def section(name: str) -> int:
        n, row = take(f"'{name} N'")
        parts = row.split()
        if len(parts) != 2 or parts[0] != name:
            raise MeshFormatError(f"line {n}: expected '{name} N', got {row!r}")
        try:
            count = int(parts[1])
        except ValueError:
            raise MeshFormatError(f"line {n}: bad count {parts[1]!r}") from None
        if count < 0:
            raise MeshFormatError(f"line {n}: negative count")
        return count

    nv = section("vertices")
    vertices = np.empty((nv, 2))
    for i in range(nv):
        n, row = take("vertex coordinates")
        parts = row.split()
        if len(parts) != 2:
            raise MeshFormatError(f"line {n}: expected 'x y', got {row!r}")
        try:
            vertices[i] = (float(parts[0]), float(parts[1]))
        except ValueError:
            raise MeshFormatError(f"line {n}: bad coordinate in {row!r}") from None

    nt = section("triangles")
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i in range(nt):
        n, row = take("triangle indices")
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError(f"line {n}: expected three vertex indices, got {row!r}")
        try:
            triangles[i] = [int(p) for p in parts]
        except ValueError:
            raise MeshFormatError(f"line {n}: bad vertex index in {row!r}") from None

    nb = section("boundary")
    edges = np.empty((nb, 2), dtype=np.int64)
    markers = np.empty(nb, dtype=object)
    for i in range(nb):
        n, row = take("boundary edge")
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError(f"line {n}: expected 'i j marker', got {row!r}")
        try:
            edges[i] = (int(parts[0]), int(parts[1]))
        except ValueError:
            raise MeshFormatError(f"line {n}: bad vertex index in {row!r}") from None
        if parts[2] not in (INNER, OUTER):
            raise MeshFormatError(f"line {n}: unknown marker {parts[2]!r}")
        markers[i] = parts[2]

    r_inner = r_outer = None
    if pos < len(rows) and rows[pos][1].split()[0] == "radii":
        n, row = take("radii")
        parts = row.split()
        if len(parts) != 3:
            raise MeshFormatError(f"line {n}: expected 'radii r_inner r_outer', got {row!r}")
        try:
            r_inner, r_outer = float(parts[1]), float(parts[2])
        except ValueError:
            raise MeshFormatError(f"line {n}: bad radius in {row!r}") from None
        if not 0.0 < r_inner < r_outer:
            raise MeshFormatError(f"line {n}: radii must satisfy 0 < r_inner < r_outer")

    if pos != len(rows):
        n, row = rows[pos]
        raise MeshFormatError(f"line {n}: trailing content {row!r}")

    return build_mesh(vertices, triangles, edges, markers, r_inner=r_inner, r_outer=r_outer)


def read_mesh(path) -> Mesh:
    with open(path, "r", encoding="utf-8") as f:
        return import_mesh(f.read())


def write_mesh(path, mesh: Mesh) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(export_mesh(mesh))
