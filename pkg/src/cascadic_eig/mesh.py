"""Triangular meshes, regular refinement and nested mesh hierarchies."""

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MeshError",
    "MeshFormatError",
    "Triangulation",
    "RefinementMap",
    "MeshHierarchy",
    "structured_unit_square",
    "load_mesh",
    "save_mesh",
    "refine_regular",
    "build_hierarchy",
    "mesh_size",
    "edges",
]


class MeshError(ValueError):
    """A triangulation violates one of its structural invariants."""


class MeshFormatError(MeshError):
    """A mesh file could not be parsed."""

    def __init__(self, msg, lineno=None):
        if lineno is not None:
            msg = f"line {lineno}: {msg}"
        super().__init__(msg)
        self.lineno = lineno


def _signed_areas(vertices, triangles):
    p0 = vertices[triangles[:, 0]]
    p1 = vertices[triangles[:, 1]]
    p2 = vertices[triangles[:, 2]]
    return 0.5 * ((p1[:, 0] - p0[:, 0]) * (p2[:, 1] - p0[:, 1])
                  - (p2[:, 0] - p0[:, 0]) * (p1[:, 1] - p0[:, 1]))


def edges(triangles):
    """Unique undirected edges of a triangle list.

    Returns
    -------
    edge_vertices : (E, 2) int array
        Sorted vertex pairs, one row per edge.
    count : (E,) int array
        Number of triangles sharing each edge.
    tri_edges : (T, 3) int array
        Edge index of the edge opposite local vertex 0, 1, 2 of each triangle.
    """
    triangles = np.asarray(triangles)
    local = triangles[:, [[1, 2], [2, 0], [0, 1]]].reshape(-1, 2)
    local = np.sort(local, axis=1)
    uniq, inverse, count = np.unique(local, axis=0, return_inverse=True,
                                     return_counts=True)
    return uniq, count, inverse.reshape(-1, 3)


@dataclass(frozen=True, eq=False)
class Triangulation:
    """One level of a conforming triangular mesh.

    Attributes
    ----------
    vertices : (V, 2) float array
    triangles : (T, 3) int array, counterclockwise
    boundary : (V,) bool array, True on the domain boundary
    level_id : int
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary: np.ndarray
    level_id: int = 1

    def __post_init__(self):
        for name in ("vertices", "triangles", "boundary"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    @property
    def n_vertices(self):
        return self.vertices.shape[0]

    @property
    def n_triangles(self):
        return self.triangles.shape[0]

    def areas(self):
        return _signed_areas(self.vertices, self.triangles)

    def validate(self):
        """Raise :class:`MeshError` naming the first violated invariant."""
        nv = self.n_vertices
        t = self.triangles
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 2:
            raise MeshError("vertices must be an (nv, 2) array")
        if t.ndim != 2 or t.shape[1] != 3:
            raise MeshError("triangles must be an (nt, 3) array")
        if self.boundary.shape != (nv,):
            raise MeshError("boundary flags must have one entry per vertex")
        if t.size and (t.min() < 0 or t.max() >= nv):
            bad = int(np.nonzero((t < 0) | (t >= nv))[0][0])
            raise MeshError(f"triangle {bad} references a vertex index out of range")
        used = np.zeros(nv, dtype=bool)
        used[t.ravel()] = True
        if not used.all():
            raise MeshError(f"dangling vertex {int(np.argmin(used))} belongs to no triangle")
        area = self.areas()
        if (area <= 0).any():
            raise MeshError(f"inverted or degenerate triangle {int(np.argmax(area <= 0))}")
        ev, count, _ = edges(t)
        if (count > 2).any():
            raise MeshError("non-manifold edge shared by more than two triangles")
        on_bnd = np.zeros(nv, dtype=bool)
        on_bnd[ev[count == 1].ravel()] = True
        if not np.array_equal(on_bnd, self.boundary):
            bad = int(np.argmax(on_bnd != self.boundary))
            raise MeshError(f"boundary flag of vertex {bad} disagrees with boundary edges")
        return self


@dataclass(frozen=True, eq=False)
class RefinementMap:
    """Parent information produced by one quadrisection step.

    ``vertex_origin[i]`` is ``(a, a)`` for a fine vertex inherited from coarse
    vertex ``a`` and ``(a, b)`` with ``a < b`` for the midpoint of coarse edge
    ``(a, b)``.
    """

    parent_triangle: np.ndarray
    vertex_origin: np.ndarray
    n_coarse_vertices: int

    def is_inherited(self):
        return self.vertex_origin[:, 0] == self.vertex_origin[:, 1]


@dataclass(frozen=True, eq=False)
class MeshHierarchy:
    """Nested meshes ``levels[0]`` (coarsest) to ``levels[-1]`` (finest)."""

    levels: list
    maps: list = field(default_factory=list)
    coarse_space_level: int = 1

    @property
    def n_levels(self):
        return len(self.levels)

    @property
    def coarse_is_level1(self):
        return self.coarse_space_level == 1

    def __getitem__(self, k):
        """1-based level access, matching the level numbering of the method."""
        if not 1 <= k <= self.n_levels:
            raise IndexError(f"level {k} outside 1..{self.n_levels}")
        return self.levels[k - 1]


def structured_unit_square(cells_per_side):
    """Uniform right-triangle mesh of the unit square.

    Every cell is split along its lower-left to upper-right diagonal.
    """
    n = int(cells_per_side)
    if n < 1:
        raise ValueError("cells_per_side must be >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(x, x)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    idx = np.arange((n + 1) ** 2).reshape(n + 1, n + 1)
    v00 = idx[:-1, :-1].ravel()
    v10 = idx[:-1, 1:].ravel()
    v01 = idx[1:, :-1].ravel()
    v11 = idx[1:, 1:].ravel()
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = np.column_stack([v00, v10, v11])
    triangles[1::2] = np.column_stack([v00, v11, v01])
    i, j = np.divmod(np.arange((n + 1) ** 2), n + 1)
    boundary = (i == 0) | (i == n) | (j == 0) | (j == n)
    return Triangulation(vertices, triangles, boundary, level_id=1)


def _strip(line):
    return line.split("#", 1)[0].split()


def load_mesh(path):
    """Read the ASCII mesh format written by :func:`save_mesh`.

    Clockwise triangles are reoriented; the result is validated.
    """
    with open(path) as fh:
        rows = [(no, _strip(line)) for no, line in enumerate(fh, start=1)]
    rows = [(no, tok) for no, tok in rows if tok]
    if not rows:
        raise MeshFormatError("empty mesh file", 1)
    no, head = rows[0]
    try:
        nv, nt = (int(s) for s in head)
    except ValueError:
        raise MeshFormatError("expected header 'nv nt'", no) from None
    if len(rows) - 1 < nv + nt:
        raise MeshFormatError(f"expected {nv} vertex and {nt} triangle lines",
                              rows[-1][0])
    vertices = np.empty((nv, 2))
    boundary = np.empty(nv, dtype=bool)
    for i, (no, tok) in enumerate(rows[1:1 + nv]):
        if len(tok) != 3:
            raise MeshFormatError("expected vertex line 'x y b'", no)
        try:
            vertices[i] = float(tok[0]), float(tok[1])
            flag = int(tok[2])
        except ValueError:
            raise MeshFormatError("malformed vertex line", no) from None
        if flag not in (0, 1):
            raise MeshFormatError("boundary flag must be 0 or 1", no)
        boundary[i] = bool(flag)
    triangles = np.empty((nt, 3), dtype=np.int64)
    for i, (no, tok) in enumerate(rows[1 + nv:1 + nv + nt]):
        if len(tok) != 3:
            raise MeshFormatError("expected triangle line 'i j k'", no)
        try:
            triangles[i] = [int(s) for s in tok]
        except ValueError:
            raise MeshFormatError("malformed triangle line", no) from None
    if len(rows) > 1 + nv + nt:
        raise MeshFormatError("trailing data after triangle list", rows[1 + nv + nt][0])
    if nt and (triangles.min() < 0 or triangles.max() >= nv):
        bad = int(np.nonzero((triangles < 0) | (triangles >= nv))[0][0])
        raise MeshError(f"triangle {bad} references a vertex index out of range")
    cw = _signed_areas(vertices, triangles) < 0
    triangles[cw] = triangles[cw][:, [0, 2, 1]]
    return Triangulation(vertices, triangles, boundary).validate()


def save_mesh(t, path):
    with open(path, "w") as fh:
        fh.write(f"{t.n_vertices} {t.n_triangles}\n")
        for (x, y), b in zip(t.vertices, t.boundary):
            fh.write(f"{float(x)!r} {float(y)!r} {int(b)}\n")
        for i, j, k in t.triangles:
            fh.write(f"{i} {j} {k}\n")


def refine_regular(t):
    """Split every triangle into four by joining its edge midpoints.

    Midpoints are keyed by coarse edge, so shared edges produce one vertex.
    Child ``4*c + 0..2`` is the corner triangle at local vertex 0..2 of coarse
    triangle ``c`` and child ``4*c + 3`` the central one; all stay
    counterclockwise.
    """
    nv = t.n_vertices
    ev, count, tri_edges = edges(t.triangles)
    mid = nv + tri_edges  # (T, 3): midpoint opposite local vertex i
    vertices = np.vstack([t.vertices, 0.5 * (t.vertices[ev[:, 0]] + t.vertices[ev[:, 1]])])
    boundary = np.concatenate([t.boundary, count == 1])
    a, b, c = t.triangles.T
    ma, mb, mc = mid.T  # opposite a, b, c
    children = np.stack([
        np.column_stack([a, mc, mb]),
        np.column_stack([mc, b, ma]),
        np.column_stack([mb, ma, c]),
        np.column_stack([ma, mb, mc]),
    ], axis=1).reshape(-1, 3)
    parent = np.repeat(np.arange(t.n_triangles), 4)
    origin = np.vstack([np.column_stack([np.arange(nv), np.arange(nv)]), ev])
    fine = Triangulation(vertices, children, boundary, level_id=t.level_id + 1)
    return fine, RefinementMap(parent, origin, nv)


def build_hierarchy(coarse, n, max_vertices=None, coarse_space_level=1):
    """Refine ``coarse`` ``n - 1`` times.

    ``max_vertices`` caps the size of the finest level; exceeding it raises
    :class:`MemoryError` before any work is done.
    """
    if n < 1:
        raise ValueError("need at least one level")
    if not 1 <= coarse_space_level <= n:
        raise ValueError("coarse_space_level must name an existing level")
    if max_vertices is not None:
        nv, ne = coarse.n_vertices, edges(coarse.triangles)[0].shape[0]
        nt = coarse.n_triangles
        for _ in range(n - 1):
            nv, ne, nt = nv + ne, 2 * ne + 3 * nt, 4 * nt
        if nv > max_vertices:
            raise MemoryError(f"finest level would have {nv} vertices "
                              f"(budget {max_vertices})")
    levels, maps = [coarse], []
    for _ in range(n - 1):
        fine, rmap = refine_regular(levels[-1])
        levels.append(fine)
        maps.append(rmap)
    return MeshHierarchy(levels, maps, coarse_space_level)


def mesh_size(t):
    """Longest edge over all triangles."""
    ev, _, _ = edges(t.triangles)
    d = t.vertices[ev[:, 0]] - t.vertices[ev[:, 1]]
    return float(np.sqrt((d * d).sum(axis=1)).max())
