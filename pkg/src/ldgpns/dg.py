"""Broken polynomial spaces and the LDG operators built on them.

A :class:`DGSpace` bundles a mesh with a local Lagrange basis of degree k and
precomputed quadrature data on cells and faces. Fields are stored as
:class:`BrokenField` objects whose coefficient array has shape
``(n_cells, *value_shape, n_basis)``; flattening it in C order gives the
global DOF vector (cell blocks first, then component, then basis).

Boundary data enters through data-shifted jumps: on a boundary face the jump
of ``w`` is ``(w - g) (x) n`` whenever a boundary function ``g`` is passed.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from itertools import product

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .orlicz import NFunctionSpec, conjugate_value, frobenius, phi_value, sym
from .quadrature import QuadRule, cell_rule, face_rule

__all__ = [
    "LagrangeBasis",
    "DGSpace",
    "BrokenField",
    "l2_project",
    "cell_means",
    "jump_normal",
    "average",
    "lifting",
    "dg_gradient",
    "dg_sym_gradient",
    "dg_divergence",
    "dg_norms",
    "face_shift",
    "modular_domain",
    "modular_jump",
    "modular_full",
    "continuous_p1_field",
]


class LagrangeBasis:
    """Nodal P_k basis on the reference simplex with equispaced lattice nodes.

    For ``k = 1`` the basis functions are the barycentric coordinates.
    """

    def __init__(self, dim: int, k: int):
        if k < 0:
            raise ValueError("degree must be >= 0")
        self.dim, self.k = dim, k
        self.exponents = [a for a in product(range(k + 1), repeat=dim) if sum(a) <= k]
        if k == 0:
            self.nodes = np.full((1, dim), 1.0 / (dim + 1))
        else:
            lattice = [a for a in product(range(k + 1), repeat=dim) if sum(a) <= k]
            nodes = np.array(lattice, dtype=float) / k
            # order: vertices first (origin, e_1, ..., e_d), then the rest
            verts = [np.zeros(dim)] + [np.eye(dim)[i] for i in range(dim)]
            order = []
            for v in verts:
                order.append(int(np.argmin(np.abs(nodes - v).sum(axis=1))))
            order += [i for i in range(len(nodes)) if i not in order]
            self.nodes = nodes[order]
        V = self._monomials(self.nodes)
        self._coef = np.linalg.inv(V)

    @property
    def size(self) -> int:
        return len(self.exponents)

    def _monomials(self, xi):
        xi = np.atleast_2d(xi)
        return np.stack([np.prod(xi ** np.array(a), axis=1) for a in self.exponents], axis=1)

    def _monomial_gradients(self, xi):
        xi = np.atleast_2d(xi)
        out = np.zeros((len(xi), len(self.exponents), self.dim))
        for m, a in enumerate(self.exponents):
            for j in range(self.dim):
                if a[j] == 0:
                    continue
                b = list(a)
                b[j] -= 1
                out[:, m, j] = a[j] * np.prod(xi ** np.array(b), axis=1)
        return out

    def values(self, xi) -> np.ndarray:
        """Basis values at reference points, shape (n, nb)."""
        return self._monomials(xi) @ self._coef

    def gradients(self, xi) -> np.ndarray:
        """Reference gradients, shape (n, nb, dim)."""
        return np.einsum("nmj,mb->nbj", self._monomial_gradients(xi), self._coef)


class DGSpace:
    """Broken P_k space on ``mesh`` with cell and face quadrature tables.

    Parameters
    ----------
    mesh : Mesh
    k : int
        Polynomial degree.
    quad : QuadRule, optional
        Cell rule; defaults to :func:`cell_rule` of the mesh dimension.
    fquad : QuadRule, optional
        Face rule; defaults to :func:`face_rule` of dimension ``d - 1``.
    """

    def __init__(self, mesh: Mesh, k: int = 1, quad: QuadRule | None = None, fquad: QuadRule | None = None):
        self.mesh = mesh
        self.k = int(k)
        self.dim = mesh.dim
        self.basis = LagrangeBasis(self.dim, self.k)
        self.quad = quad or cell_rule(self.dim)
        self.fquad = fquad or face_rule(self.dim - 1)

    @property
    def nb(self) -> int:
        return self.basis.size

    @property
    def n_cells(self) -> int:
        return self.mesh.n_cells

    def n_dofs(self, shape=()) -> int:
        return self.n_cells * int(np.prod(shape, dtype=int)) * self.nb

    # -- cell tables --------------------------------------------------------
    @cached_property
    def phi(self) -> np.ndarray:
        """Basis values at reference cell quadrature points, (nq, nb)."""
        return self.basis.values(self.quad.points)

    @cached_property
    def dphi(self) -> np.ndarray:
        """Physical basis gradients at cell points, (nc, nq, nb, d)."""
        ref = self.basis.gradients(self.quad.points)
        return np.einsum("qbk,ckj->cqbj", ref, self.mesh.inverse_jacobians)

    @cached_property
    def qp(self) -> np.ndarray:
        """Physical cell quadrature points, (nc, nq, d)."""
        X = self.mesh.vertices[self.mesh.cells]
        return np.einsum("qa,cad->cqd", self.quad.barycentric, X)

    @cached_property
    def w(self) -> np.ndarray:
        """Physical cell quadrature weights, (nc, nq)."""
        return self.mesh.det[:, None] * self.quad.weights[None, :]

    @cached_property
    def ref_mass(self) -> np.ndarray:
        return np.einsum("q,qa,qb->ab", self.quad.weights, self.phi, self.phi)

    @cached_property
    def ref_mass_inv(self) -> np.ndarray:
        return np.linalg.inv(self.ref_mass)

    def mass_inv(self) -> np.ndarray:
        """Inverse local mass matrices, (nc, nb, nb)."""
        return self.ref_mass_inv[None] / self.mesh.det[:, None, None]

    # -- face tables --------------------------------------------------------
    @cached_property
    def fqp(self) -> np.ndarray:
        """Physical face quadrature points, (nf, nfq, d)."""
        X = self.mesh.vertices[self.mesh.faces.vertices]
        return np.einsum("qa,fad->fqd", self.fquad.barycentric, X)

    @cached_property
    def fw(self) -> np.ndarray:
        """Physical face quadrature weights, (nf, nfq)."""
        scale = self.mesh.faces.measure / self.fquad.reference_measure
        return scale[:, None] * self.fquad.weights[None, :]

    @cached_property
    def fphi(self) -> np.ndarray:
        """Traces of the basis of both adjacent cells at face points,
        (nf, 2, nfq, nb); zero for the missing side of boundary faces."""
        F = self.mesh.faces
        out = np.zeros((F.n_faces, 2, self.fquad.n_points, self.nb))
        for s in (0, 1):
            valid = F.cells[:, s] >= 0
            cells = F.cells[valid, s]
            x0 = self.mesh.vertices[self.mesh.cells[cells, 0]]
            xi = np.einsum("cij,cqj->cqi", self.mesh.inverse_jacobians[cells], self.fqp[valid] - x0[:, None, :])
            out[valid, s] = self.basis.values(xi.reshape(-1, self.dim)).reshape(len(cells), -1, self.nb)
        return out

    @cached_property
    def face_weight(self) -> np.ndarray:
        """Average weights: 1/2 on interior faces, 1 on boundary faces."""
        return np.where(self.mesh.faces.is_boundary, 1.0, 0.5)

    # -- fields -------------------------------------------------------------
    def zeros(self, shape=()) -> "BrokenField":
        return BrokenField(self, np.zeros((self.n_cells, *shape, self.nb)))

    def from_vector(self, vec, shape=()) -> "BrokenField":
        return BrokenField(self, np.asarray(vec, dtype=float).reshape(self.n_cells, *shape, self.nb))

    def interpolate(self, func, shape=()) -> "BrokenField":
        """Nodal interpolation of ``func(x) -> (n, *shape)`` in every cell."""
        X = self.mesh.vertices[self.mesh.cells]
        lam = np.concatenate([1.0 - self.basis.nodes.sum(axis=1, keepdims=True), self.basis.nodes], axis=1)
        pts = np.einsum("na,cad->cnd", lam, X)
        vals = np.asarray(func(pts.reshape(-1, self.dim)), dtype=float)
        vals = vals.reshape(self.n_cells, self.nb, *shape)
        return BrokenField(self, np.moveaxis(vals, 1, -1))

    # -- sparse operators ---------------------------------------------------
    @cached_property
    def _lifting_parts(self):
        return _assemble_lifting(self)

    @property
    def lifting_matrix(self) -> sp.csr_matrix:
        """Linear part of the lifting: vector coefficients -> tensor coefficients."""
        return self._lifting_parts

    @cached_property
    def value_operator(self) -> sp.csr_matrix:
        """Vector field coefficients -> values at cell points, rows (c, q, i)."""
        nc, nq, nb, d = self.n_cells, self.quad.n_points, self.nb, self.dim
        c, q, i, b = np.meshgrid(np.arange(nc), np.arange(nq), np.arange(d), np.arange(nb), indexing="ij")
        rows = (c * nq + q) * d + i
        cols = (c * d + i) * nb + b
        vals = np.broadcast_to(self.phi[None, :, None, :], c.shape)
        return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(nc * nq * d, nc * d * nb))

    @cached_property
    def scalar_value_operator(self) -> sp.csr_matrix:
        nc, nq, nb = self.n_cells, self.quad.n_points, self.nb
        c, q, b = np.meshgrid(np.arange(nc), np.arange(nq), np.arange(nb), indexing="ij")
        vals = np.broadcast_to(self.phi[None], c.shape)
        return sp.csr_matrix((vals.ravel(), ((c * nq + q).ravel(), (c * nb + b).ravel())), shape=(nc * nq, nc * nb))

    @cached_property
    def broken_gradient_operator(self) -> sp.csr_matrix:
        """Vector coefficients -> elementwise gradient at cell points, rows (c, q, i, j)."""
        nc, nq, nb, d = self.n_cells, self.quad.n_points, self.nb, self.dim
        c, q, i, j, b = np.meshgrid(*(np.arange(n) for n in (nc, nq, d, d, nb)), indexing="ij")
        rows = ((c * nq + q) * d + i) * d + j
        cols = (c * d + i) * nb + b
        vals = self.dphi[c, q, b, j]
        return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(nc * nq * d * d, nc * d * nb))

    @cached_property
    def tensor_value_operator(self) -> sp.csr_matrix:
        """Tensor coefficients -> values at cell points, rows (c, q, i, j)."""
        nc, nq, nb, d = self.n_cells, self.quad.n_points, self.nb, self.dim
        c, q, i, j, b = np.meshgrid(*(np.arange(n) for n in (nc, nq, d, d, nb)), indexing="ij")
        rows = ((c * nq + q) * d + i) * d + j
        cols = ((c * d + i) * d + j) * nb + b
        vals = self.phi[q, b]
        return sp.csr_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(nc * nq * d * d, nc * d * d * nb))

    @cached_property
    def dg_gradient_operator(self) -> sp.csr_matrix:
        """Linear part of the DG gradient at cell points, rows (c, q, i, j)."""
        return (self.broken_gradient_operator - self.tensor_value_operator @ self.lifting_matrix).tocsr()

    @cached_property
    def jump_operator(self) -> sp.csr_matrix:
        """Vector coefficients -> ``w|K0 - w|K1`` at face points, rows (f, q, i)."""
        F = self.mesh.faces
        nf, nfq, nb, d = F.n_faces, self.fquad.n_points, self.nb, self.dim
        rows, cols, vals = [], [], []
        for s, sign in ((0, 1.0), (1, -1.0)):
            valid = np.flatnonzero(F.cells[:, s] >= 0)
            f, q, i, b = np.meshgrid(valid, np.arange(nfq), np.arange(d), np.arange(nb), indexing="ij")
            cell = F.cells[f, s]
            rows.append(((f * nfq + q) * d + i).ravel())
            cols.append(((cell * d + i) * nb + b).ravel())
            vals.append((sign * self.fphi[f, s, q, b]).ravel())
        return sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(nf * nfq * d, self.n_cells * d * nb),
        )

    def boundary_values(self, g) -> np.ndarray:
        """``g`` at face points, zero on interior faces; shape (nf, nfq, d)."""
        out = np.zeros((self.mesh.faces.n_faces, self.fquad.n_points, self.dim))
        if g is None:
            return out
        bnd = self.mesh.faces.boundary
        pts = self.fqp[bnd].reshape(-1, self.dim)
        out[bnd] = np.asarray(g(pts), dtype=float).reshape(len(bnd), -1, self.dim)
        return out

    def lifting_of_data(self, g) -> np.ndarray:
        """Tensor coefficients of the lifting of ``g (x) n`` on boundary faces."""
        F = self.mesh.faces
        G = self.boundary_values(g)
        bnd = F.boundary
        cell = F.cells[bnd, 0]
        # rhs[c, i, j, b] = int_f g_i n_j phi_b
        rhs = np.einsum("fq,fqi,fj,fqb->fijb", self.fw[bnd], G[bnd], F.normals[bnd], self.fphi[bnd, 0])
        out = np.zeros((self.n_cells, self.dim, self.dim, self.nb))
        np.add.at(out, cell, rhs)
        Minv = self.mass_inv()
        return np.einsum("cab,cijb->cija", Minv, out)


def _assemble_lifting(space: DGSpace) -> sp.csr_matrix:
    F = space.mesh.faces
    nb, d = space.nb, space.dim
    Minv = space.mass_inv()
    rows, cols, vals = [], [], []
    eye = np.eye(d)
    for s in (0, 1):
        for s2, sign in ((0, 1.0), (1, -1.0)):
            valid = np.flatnonzero((F.cells[:, s] >= 0) & (F.cells[:, s2] >= 0))
            if len(valid) == 0:
                continue
            K = F.cells[valid, s]
            K2 = F.cells[valid, s2]
            # face mass between the two traces: (nfv, nb, nb)
            fm = np.einsum("fq,fqb,fqc->fbc", space.fw[valid], space.fphi[valid, s], space.fphi[valid, s2])
            blk = np.einsum("fab,fbc->fac", Minv[K], fm) * (sign * space.face_weight[valid])[:, None, None]
            # entry (K, i, j, a) <- (K2, i, c): blk[a, c] * n_j
            f_, i_, j_, a_, c_ = np.meshgrid(np.arange(len(valid)), np.arange(d), np.arange(d),
                                             np.arange(nb), np.arange(nb), indexing="ij")
            rows.append((((K[f_] * d + i_) * d + j_) * nb + a_).ravel())
            cols.append(((K2[f_] * d + i_) * nb + c_).ravel())
            vals.append((blk[f_, a_, c_] * F.normals[valid][f_, j_]).ravel())
    del eye
    nc = space.n_cells
    return sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(nc * d * d * nb, nc * d * nb),
    )


@dataclass
class BrokenField:
    """Elementwise polynomial field on a :class:`DGSpace`.

    ``coeffs`` has shape ``(n_cells, *value_shape, nb)``.
    """

    space: DGSpace
    coeffs: np.ndarray

    @property
    def shape(self) -> tuple:
        return self.coeffs.shape[1:-1]

    @property
    def rank(self) -> int:
        return len(self.shape)

    @property
    def degree(self) -> int:
        return self.space.k

    def vector(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    def at_qp(self) -> np.ndarray:
        """Values at cell quadrature points, (nc, nq, *shape)."""
        return np.einsum("c...b,qb->cq...", self.coeffs, self.space.phi)

    def on_faces(self, side: int) -> np.ndarray:
        """Traces from ``side`` (0 or 1) at face points, (nf, nfq, *shape)."""
        F = self.space.mesh.faces
        cells = np.where(F.cells[:, side] >= 0, F.cells[:, side], 0)
        return np.einsum("f...b,fqb->fq...", self.coeffs[cells], self.space.fphi[:, side])

    def broken_gradient_at_qp(self) -> np.ndarray:
        """Elementwise gradient at cell points, (nc, nq, *shape, d)."""
        return np.einsum("c...b,cqbj->cq...j", self.coeffs, self.space.dphi)

    def evaluate(self, points, cells=None) -> np.ndarray:
        """Evaluate at arbitrary physical points (located if ``cells`` is None)."""
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        m = self.space.mesh
        if cells is None:
            cells = m.locate(pts)
            if np.any(cells < 0):
                raise ValueError("some points lie outside the mesh")
        x0 = m.vertices[m.cells[cells, 0]]
        xi = np.einsum("nij,nj->ni", m.inverse_jacobians[cells], pts - x0)
        phi = self.space.basis.values(xi)
        return np.einsum("n...b,nb->n...", self.coeffs[cells], phi)

    def __add__(self, other):
        return BrokenField(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return BrokenField(self.space, self.coeffs - other.coeffs)

    def __mul__(self, a):
        return BrokenField(self.space, a * self.coeffs)

    __rmul__ = __mul__


# -- projections ------------------------------------------------------------

def l2_project(space: DGSpace, source, shape=None) -> BrokenField:
    """Local L2 projection onto ``space``.

    ``source`` is either a callable ``f(x) -> (n, *shape)`` or an array of
    values at the cell quadrature points of ``space`` with shape
    ``(nc, nq, *shape)``.
    """
    if callable(source):
        vals = np.asarray(source(space.qp.reshape(-1, space.dim)), dtype=float)
        vals = vals.reshape(space.n_cells, space.quad.n_points, *vals.shape[1:])
    else:
        vals = np.asarray(source, dtype=float)
    if shape is not None and vals.shape[2:] != tuple(shape):
        raise ValueError("source values do not match the requested shape")
    rhs = np.einsum("cq,cq...,qb->c...b", space.w, vals, space.phi)
    Minv = space.mass_inv()
    coeffs = np.einsum("cab,c...b->c...a", Minv, rhs)
    return BrokenField(space, coeffs)


def cell_means(space: DGSpace, values) -> np.ndarray:
    """Cellwise means of values given at cell points, (nc, *shape)."""
    vals = np.asarray(values, dtype=float)
    vol = space.w.sum(axis=1)
    return np.einsum("cq,cq...->c...", space.w, vals) / vol.reshape(-1, *([1] * (vals.ndim - 2)))


# -- jumps, averages, lifting -----------------------------------------------

def jump_normal(w: BrokenField, boundary_data=None) -> np.ndarray:
    """Normal jump ``[[w (x) n]]`` at face points, shape (nf, nfq, *shape, d).

    Interior faces: ``(w|K0 - w|K1) (x) n``; boundary faces ``(w - g) (x) n``.
    """
    space = w.space
    F = space.mesh.faces
    tr0 = w.on_faces(0)
    tr1 = w.on_faces(1)
    bnd = F.is_boundary
    tr1[bnd] = 0.0
    diff = tr0 - tr1
    if boundary_data is not None:
        if w.rank != 1:
            raise ValueError("boundary data is only supported for vector fields")
        diff = diff - space.boundary_values(boundary_data)
    n = F.normals[:, None, :]
    return np.einsum("fq...,fqj->fq...j", diff, np.broadcast_to(n, diff.shape[:2] + (space.dim,)))


def average(w: BrokenField) -> np.ndarray:
    """Average ``{w}`` at face points; one-sided trace on boundary faces."""
    F = w.space.mesh.faces
    tr0 = w.on_faces(0)
    tr1 = w.on_faces(1)
    out = 0.5 * (tr0 + tr1)
    bnd = F.is_boundary
    out[bnd] = tr0[bnd]
    return out


def lifting(w: BrokenField, boundary_data=None) -> BrokenField:
    """Lifting ``R w`` in the tensor space of the same degree.

    Defined by ``(R w, X) = <[[w (x) n]], {X}>`` for all broken tensor
    fields ``X`` of degree k, with data-shifted boundary jumps.
    """
    if w.rank != 1:
        raise ValueError("lifting acts on vector fields")
    space = w.space
    vec = space.lifting_matrix @ w.vector()
    coeffs = vec.reshape(space.n_cells, space.dim, space.dim, space.nb)
    if boundary_data is not None:
        coeffs = coeffs - space.lifting_of_data(boundary_data)
    return BrokenField(space, coeffs)


def _upgrade_gradient(w: BrokenField) -> BrokenField:
    """Elementwise gradient as a degree-k broken tensor field."""
    return l2_project(w.space, w.broken_gradient_at_qp())


def dg_gradient(w: BrokenField, boundary_data=None) -> BrokenField:
    """DG gradient ``grad_h w - R w``."""
    return _upgrade_gradient(w) - lifting(w, boundary_data)


def dg_sym_gradient(w: BrokenField, boundary_data=None) -> BrokenField:
    G = dg_gradient(w, boundary_data)
    return BrokenField(w.space, 0.5 * (G.coeffs + np.swapaxes(G.coeffs, 1, 2)))


def dg_divergence(w: BrokenField, boundary_data=None) -> BrokenField:
    G = dg_gradient(w, boundary_data)
    return BrokenField(w.space, np.einsum("ciib->cb", G.coeffs))


# -- norms and modulars -----------------------------------------------------

def _face_jump_term(space, jumps, p):
    # sum_f h_f^(1-p) int_f |jump|^p
    F = space.mesh.faces
    mag = frobenius(jumps) if jumps.ndim == 4 else np.linalg.norm(jumps, axis=-1)
    return np.sum(F.h ** (1.0 - p) * np.einsum("fq,fq->f", space.fw, mag**p))


def dg_norms(w: BrokenField, p: float, boundary_data=None) -> tuple[float, float]:
    """``(||w||_{grad,p,h}, ||w||_{D,p,h})`` with face-local ``h_f``."""
    space = w.space
    grad = w.broken_gradient_at_qp()
    jumps = jump_normal(w, boundary_data)
    jt = _face_jump_term(space, jumps, p) ** (1.0 / p)
    g = np.sum(space.w * frobenius(grad) ** p) ** (1.0 / p)
    D = dg_sym_gradient(w, boundary_data).at_qp()
    s = np.sum(space.w * frobenius(D) ** p) ** (1.0 / p)
    return float(g + jt), float(s + jt)


def face_shift(space: DGSpace, D_values) -> np.ndarray:
    """Face average of ``|Pi^0 D|`` given D at cell points, shape (nf,)."""
    F = space.mesh.faces
    cm = frobenius(cell_means(space, D_values))
    a0 = cm[F.cells[:, 0]]
    a1 = np.where(F.is_boundary, a0, cm[np.where(F.cells[:, 1] >= 0, F.cells[:, 1], 0)])
    return 0.5 * (a0 + a1)


def _magnitude(vals, rank):
    vals = np.asarray(vals, dtype=float)
    if rank == 0:
        return np.abs(vals)
    axes = tuple(range(vals.ndim - rank, vals.ndim))
    return np.sqrt(np.sum(vals * vals, axis=axes))


def modular_domain(spec: NFunctionSpec, space: DGSpace, values, rank=None, shift=None, conjugate=False) -> float:
    """``int psi_{a(x)}(|w(x)|) dx`` by cell quadrature.

    ``values`` are given at cell points with shape ``(nc, nq, *shape)`` or as a
    :class:`BrokenField`. ``shift`` is a scalar or an array of shape (nc, nq).
    With ``conjugate=True`` the conjugate N-function is integrated instead.
    """
    if isinstance(values, BrokenField):
        rank = values.rank
        values = values.at_qp()
    elif rank is None:
        rank = np.asarray(values).ndim - 2
    mag = _magnitude(values, rank)
    fn = conjugate_value if conjugate else phi_value
    a = None if shift is None else np.broadcast_to(np.asarray(shift, dtype=float), mag.shape)
    return float(np.sum(space.w * fn(spec, mag, shift=a)))


def modular_jump(spec: NFunctionSpec, w: BrokenField, shift=None, boundary_data=None, jumps=None) -> float:
    """``sum_f h_f int_f psi_{a_f}(|[[w (x) n]]| / h_f) ds``.

    ``shift`` is per face, shape (nf,), or scalar. Precomputed ``jumps`` of
    shape (nf, nfq, d, d) may be passed instead of ``w``'s own jumps.
    """
    space = w.space
    F = space.mesh.faces
    if jumps is None:
        jumps = jump_normal(w, boundary_data)
    mag = frobenius(jumps) / F.h[:, None]
    a = None if shift is None else np.broadcast_to(np.asarray(shift, dtype=float).reshape(-1, 1) if np.ndim(shift) else shift, mag.shape)
    vals = phi_value(spec, mag, shift=a)
    return float(np.sum(F.h[:, None] * space.fw * vals))


def modular_full(spec: NFunctionSpec, w: BrokenField, shift=None, face_shift_values=None, boundary_data=None) -> float:
    """Broken-gradient modular plus :func:`modular_jump`."""
    grad = w.broken_gradient_at_qp()
    return modular_domain(spec, w.space, grad, rank=2, shift=shift) + modular_jump(
        spec, w, shift=face_shift_values, boundary_data=boundary_data
    )


def continuous_p1_field(space: DGSpace, rng=None, values=None) -> BrokenField:
    """Continuous piecewise-linear vector field vanishing on the boundary.

    Vertex values are drawn from ``rng`` (or taken from ``values``) and set to
    zero on boundary vertices. Requires ``space.k == 1``.
    """
    if space.k != 1:
        raise ValueError("continuous_p1_field needs k = 1")
    m = space.mesh
    if values is None:
        rng = np.random.default_rng(rng)
        values = rng.standard_normal((m.n_vertices, space.dim))
    values = np.array(values, dtype=float)
    F = m.faces
    values[np.unique(F.vertices[F.boundary])] = 0.0
    return BrokenField(space, np.moveaxis(values[m.cells], 1, 2))
