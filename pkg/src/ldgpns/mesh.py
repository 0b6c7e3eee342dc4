"""Simplicial meshes of the unit square / cube with red refinement.

Vertices are kept as exact dyadic integers internally (coordinates times
``2**(level+1)``) so that refinement never needs a floating point tolerance
to merge midpoints.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import combinations, permutations
from math import factorial

import numpy as np

__all__ = [
    "Mesh",
    "FaceTopology",
    "unit_square_initial",
    "unit_cube_kuhn",
    "red_refine",
    "build_faces",
    "mesh_chain",
]


@dataclass(frozen=True)
class FaceTopology:
    """Faces of a simplicial mesh.

    ``cells[f, 0]`` is always a valid cell; ``cells[f, 1]`` is ``-1`` on the
    boundary. ``normals[f]`` is the unit normal pointing out of
    ``cells[f, 0]`` (hence outward on the boundary), so the normal jump of a
    field ``w`` reads ``(w|cells[f,0] - w|cells[f,1]) (x) n``.
    """

    vertices: np.ndarray      # (nf, d) vertex indices, sorted
    cells: np.ndarray         # (nf, 2)
    local_index: np.ndarray   # (nf, 2) local face number (= opposite local vertex)
    normals: np.ndarray       # (nf, d)
    measure: np.ndarray       # (nf,)
    h: np.ndarray             # (nf,) face diameter
    cell_faces: np.ndarray    # (nc, d+1) face opposite local vertex j

    @property
    def n_faces(self) -> int:
        return len(self.cells)

    @property
    def is_boundary(self) -> np.ndarray:
        return self.cells[:, 1] < 0

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.is_boundary)

    @property
    def boundary(self) -> np.ndarray:
        return np.flatnonzero(self.is_boundary)

    def patch(self, face: int) -> np.ndarray:
        """Cells making up the patch of ``face`` (one or two)."""
        c = self.cells[face]
        return c[c >= 0]


class Mesh:
    """Conforming simplicial mesh.

    Parameters
    ----------
    int_vertices : ndarray of int, shape (nv, d)
        Vertex coordinates multiplied by ``scale``.
    cells : ndarray of int, shape (nc, d+1)
        Vertex indices. The ordering inside a cell is kept as produced by the
        refinement rule (it matters for the 3D rule), volumes use ``|det|``.
    scale : int
        Common denominator of the coordinates.
    level : int
        Number of red refinements applied to the initial mesh.
    parent : ndarray of int, optional
        For refined meshes, index of the parent cell of every cell.
    """

    def __init__(self, int_vertices, cells, scale, level=0, parent=None):
        self.int_vertices = np.asarray(int_vertices, dtype=np.int64)
        self.cells = np.asarray(cells, dtype=np.int64)
        self.scale = int(scale)
        self.level = int(level)
        self.parent = None if parent is None else np.asarray(parent, dtype=np.int64)
        nv, d = self.int_vertices.shape
        if d not in (2, 3):
            raise ValueError(f"only 2D and 3D meshes are supported, got d={d}")
        if self.cells.ndim != 2 or self.cells.shape[1] != d + 1:
            raise ValueError("cells must have d+1 vertices each")
        if self.cells.min() < 0 or self.cells.max() >= nv:
            raise ValueError("cell references a vertex that does not exist")

    # -- geometry -----------------------------------------------------------
    @property
    def dim(self) -> int:
        return self.int_vertices.shape[1]

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    @property
    def n_vertices(self) -> int:
        return len(self.int_vertices)

    @cached_property
    def vertices(self) -> np.ndarray:
        return self.int_vertices / float(self.scale)

    @cached_property
    def jacobians(self) -> np.ndarray:
        """Affine maps ``x = x0 + J xi`` from the reference simplex, (nc, d, d)."""
        X = self.vertices[self.cells]
        return np.swapaxes(X[:, 1:, :] - X[:, :1, :], 1, 2)

    @cached_property
    def signed_det(self) -> np.ndarray:
        return np.linalg.det(self.jacobians)

    @cached_property
    def det(self) -> np.ndarray:
        return np.abs(self.signed_det)

    @cached_property
    def inverse_jacobians(self) -> np.ndarray:
        return np.linalg.inv(self.jacobians)

    @cached_property
    def volumes(self) -> np.ndarray:
        return self.det / factorial(self.dim)

    @cached_property
    def diameters(self) -> np.ndarray:
        X = self.vertices[self.cells]
        best = np.zeros(self.n_cells)
        for a, b in combinations(range(self.dim + 1), 2):
            best = np.maximum(best, np.linalg.norm(X[:, a] - X[:, b], axis=1))
        return best

    @property
    def h(self) -> float:
        """Maximal cell diameter."""
        return float(self.diameters.max())

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    def oriented_cells(self) -> np.ndarray:
        """Cells with two vertices swapped where needed so every det is positive."""
        cells = self.cells.copy()
        neg = self.signed_det < 0
        cells[neg, 0], cells[neg, 1] = self.cells[neg, 1], self.cells[neg, 0]
        return cells

    def min_angles(self) -> np.ndarray:
        """Smallest interior angle per triangle (2D only)."""
        if self.dim != 2:
            raise ValueError("min_angles is defined for triangles only")
        X = self.vertices[self.cells]
        angles = []
        for i in range(3):
            a = X[:, (i + 1) % 3] - X[:, i]
            b = X[:, (i + 2) % 3] - X[:, i]
            cosang = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cosang, -1.0, 1.0)))
        return np.min(angles, axis=0)

    @cached_property
    def faces(self) -> FaceTopology:
        return build_faces(self)

    def locate(self, points, tol=1e-12):
        """Cell index containing each point (first match), -1 if outside."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.full(len(pts), -1, dtype=np.int64)
        x0 = self.vertices[self.cells[:, 0]]
        Jinv = self.inverse_jacobians
        # chunk to bound memory at n_points * n_cells
        chunk = max(1, 2_000_000 // max(self.n_cells, 1))
        for s in range(0, len(pts), chunk):
            P = pts[s:s + chunk]
            xi = np.einsum("cij,pcj->pci", Jinv, P[:, None, :] - x0[None])
            lam0 = 1.0 - xi.sum(axis=2)
            inside = (xi >= -tol).all(axis=2) & (lam0 >= -tol)
            hit = inside.any(axis=1)
            out[s:s + chunk][hit] = inside[hit].argmax(axis=1)
        return out

    def dump(self) -> str:
        """Plain-text dump: dim / #vertices / coords / #cells / indices."""
        lines = [str(self.dim), str(self.n_vertices)]
        lines += [" ".join(repr(float(c)) for c in v) for v in self.vertices]
        lines.append(str(self.n_cells))
        lines += [" ".join(str(int(i)) for i in c) for c in self.cells]
        return "\n".join(lines) + "\n"

    def __repr__(self):
        return f"Mesh(dim={self.dim}, level={self.level}, n_cells={self.n_cells}, n_vertices={self.n_vertices})"


def unit_square_initial() -> Mesh:
    """Unit square split into four triangles along its diagonals."""
    # scale 2: corners at 0/2, centre at 1
    verts = np.array([[0, 0], [2, 0], [2, 2], [0, 2], [1, 1]])
    cells = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
    return Mesh(verts, cells, scale=2, level=0)


def unit_cube_kuhn() -> Mesh:
    """Kuhn triangulation of the unit cube into six tetrahedra.

    Every tetrahedron is the path ``0, e_a, e_a + e_b, (1,1,1)`` for a
    permutation ``(a, b, c)``; the first one is ``conv{0, e1, e1+e2, e1+e2+e3}``.
    """
    corners = np.array([[x, y, z] for z in (0, 1) for y in (0, 1) for x in (0, 1)])
    index = {tuple(c): i for i, c in enumerate(corners)}
    cells = []
    for perm in permutations(range(3)):
        pt = np.zeros(3, dtype=int)
        path = [index[tuple(pt)]]
        for axis in perm:
            pt = pt.copy()
            pt[axis] = 1
            path.append(index[tuple(pt)])
        cells.append(path)
    # scale 2 so that the first refinement stays integral like in 2D
    return Mesh(2 * corners, np.array(cells), scale=2, level=0)


def _children_2d(c):
    v0, v1, v2, m01, m02, m12 = c
    return [(v0, m01, m02), (m01, v1, m12), (m02, m12, v2), (m01, m12, m02)]


def _children_3d(c):
    # Bey's rule with the x02-x13 interior diagonal; keeps Kuhn-ordered
    # tetrahedra in three congruence classes under repeated refinement.
    x0, x1, x2, x3, x01, x02, x03, x12, x13, x23 = c
    return [
        (x0, x01, x02, x03),
        (x01, x1, x12, x13),
        (x02, x12, x2, x23),
        (x03, x13, x23, x3),
        (x01, x02, x03, x13),
        (x01, x02, x12, x13),
        (x02, x03, x13, x23),
        (x02, x12, x13, x23),
    ]


def red_refine(m: Mesh) -> Mesh:
    """Uniform red refinement: 4 children per triangle, 8 per tetrahedron."""
    d = m.dim
    V = 2 * m.int_vertices
    pairs = list(combinations(range(d + 1), 2))
    mids = np.stack([m.int_vertices[m.cells[:, a]] + m.int_vertices[m.cells[:, b]] for a, b in pairs], axis=1)
    allv = np.concatenate([V, mids.reshape(-1, d)])
    uniq, inv = np.unique(allv, axis=0, return_inverse=True)
    inv = inv.ravel()
    old_ids = inv[: m.n_vertices]
    mid_ids = inv[m.n_vertices:].reshape(m.n_cells, len(pairs))
    local = np.concatenate([old_ids[m.cells], mid_ids], axis=1)
    rule = _children_2d if d == 2 else _children_3d
    # symbolic child table on local indices 0..(d+1+len(pairs)-1)
    table = np.array(rule(list(range(local.shape[1]))))
    children = local[:, table].reshape(-1, d + 1)
    parent = np.repeat(np.arange(m.n_cells), len(table))
    return Mesh(uniq, children, scale=2 * m.scale, level=m.level + 1, parent=parent)


def mesh_chain(dim: int, levels: int) -> list[Mesh]:
    """Initial mesh followed by ``levels`` red refinements."""
    if dim == 2:
        m = unit_square_initial()
    elif dim == 3:
        m = unit_cube_kuhn()
    else:
        raise ValueError(f"dim must be 2 or 3, got {dim}")
    chain = [m]
    for _ in range(levels):
        chain.append(red_refine(chain[-1]))
    return chain


def _face_normals(X, opposite):
    """Unit normals of faces with vertex coordinates ``X`` (nf, d, d), oriented
    away from the point ``opposite`` (nf, d)."""
    d = X.shape[2]
    if d == 2:
        t = X[:, 1] - X[:, 0]
        n = np.stack([t[:, 1], -t[:, 0]], axis=1)
        meas = np.linalg.norm(t, axis=1)
    else:
        n = np.cross(X[:, 1] - X[:, 0], X[:, 2] - X[:, 0])
        meas = 0.5 * np.linalg.norm(n, axis=1)
    n = n / np.linalg.norm(n, axis=1)[:, None]
    flip = np.einsum("ij,ij->i", n, opposite - X[:, 0]) > 0
    n[flip] *= -1.0
    return n, meas


def build_faces(m: Mesh) -> FaceTopology:
    """Classify all faces, attach adjacent cells, normals, measures and sizes."""
    d = m.dim
    nc = m.n_cells
    # local face j is opposite local vertex j
    loc = np.array([[k for k in range(d + 1) if k != j] for j in range(d + 1)])
    fv = np.sort(m.cells[:, loc], axis=2).reshape(-1, d)
    uniq, inv, counts = np.unique(fv, axis=0, return_inverse=True, return_counts=True)
    inv = inv.ravel()
    if counts.max() > 2:
        raise ValueError("non-manifold mesh: a face has more than two cells")
    nf = len(uniq)
    owner = np.repeat(np.arange(nc), d + 1)
    lidx = np.tile(np.arange(d + 1), nc)
    order = np.argsort(inv, kind="stable")
    cells = np.full((nf, 2), -1, dtype=np.int64)
    local_index = np.full((nf, 2), -1, dtype=np.int64)
    sorted_inv = inv[order]
    start = np.searchsorted(sorted_inv, np.arange(nf))
    cells[:, 0] = owner[order[start]]
    local_index[:, 0] = lidx[order[start]]
    two = counts == 2
    cells[two, 1] = owner[order[start[two] + 1]]
    local_index[two, 1] = lidx[order[start[two] + 1]]

    X = m.vertices[uniq]
    opp = m.vertices[m.cells[cells[:, 0], local_index[:, 0]]]
    normals, measure = _face_normals(X, opp)
    h = np.zeros(nf)
    for a, b in combinations(range(d), 2):
        h = np.maximum(h, np.linalg.norm(X[:, a] - X[:, b], axis=1))
    cell_faces = inv.reshape(nc, d + 1)
    return FaceTopology(uniq, cells, local_index, normals, measure, h, cell_faces)
