"""Newton solver for the LDG discretization of the steady p-Navier-Stokes system.

Unknowns are ordered as velocity coefficients (cell blocks, component, basis),
then continuous pressure values at mesh vertices, then one multiplier that
enforces a zero pressure mean. Velocity is broken P1, pressure continuous P1.

The stabilization shift is the face average of the cellwise mean of
``|D_h v|``; it enters the residual exactly and is held fixed in the
Jacobian.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .dg import BrokenField, DGSpace, face_shift
from .mesh import Mesh
from .orlicz import NFunctionSpec, shifted_stress, shifted_stress_derivative, stress, stress_derivative, sym

__all__ = [
    "SolverConfig",
    "DiscreteState",
    "LinearSystem",
    "NewtonReport",
    "AssemblyError",
    "LinearSolveError",
    "NewtonConvergenceError",
    "LDGProblem",
    "assemble_residual",
    "assemble_jacobian",
    "linear_solve",
    "newton_solve",
    "continuation_initial_guess",
    "prolongate",
]


class AssemblyError(RuntimeError):
    pass


class LinearSolveError(RuntimeError):
    pass


class NewtonConvergenceError(RuntimeError):
    def __init__(self, message, report, state=None):
        super().__init__(message)
        self.report = report
        self.state = state


@dataclass(frozen=True)
class SolverConfig:
    """Material, stabilization and Newton parameters."""

    p: float = 2.5
    delta: float = 1e-5
    mu0: float = 0.5
    alpha: float = 2.5
    k: int = 1
    tau_abs: float = 1e-8
    tau_rel: float = 1e-10
    max_newton: int = 25
    linear_tol: float = 1e-12
    backtracking: bool = True
    convection: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not (self.tau_abs > 0 and self.tau_rel > 0 and self.linear_tol > 0):
            raise ValueError("tolerances must be positive")
        if int(self.max_newton) < 1:
            raise ValueError("max_newton must be >= 1")
        if self.k != 1:
            raise ValueError("the solver supports k = 1 only")
        NFunctionSpec(self.p, self.delta, self.mu0)

    @property
    def spec(self) -> NFunctionSpec:
        return NFunctionSpec(self.p, self.delta, self.mu0)


@dataclass
class DiscreteState:
    """Velocity, vertex pressure and mean multiplier."""

    v: BrokenField
    q: np.ndarray
    lam: float = 0.0

    @property
    def space(self) -> DGSpace:
        return self.v.space

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.v.vector(), self.q, [self.lam]])

    @classmethod
    def from_vector(cls, space: DGSpace, x) -> "DiscreteState":
        x = np.asarray(x, dtype=float)
        nv = space.n_dofs((space.dim,))
        v = space.from_vector(x[:nv].copy(), (space.dim,))
        return cls(v, x[nv:-1].copy(), float(x[-1]))

    @classmethod
    def zeros(cls, space: DGSpace) -> "DiscreteState":
        return cls(space.zeros((space.dim,)), np.zeros(space.mesh.n_vertices), 0.0)

    def pressure_at(self, points) -> np.ndarray:
        m = self.space.mesh
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cells = m.locate(pts)
        if np.any(cells < 0):
            raise ValueError("some points lie outside the mesh")
        x0 = m.vertices[m.cells[cells, 0]]
        xi = np.einsum("nij,nj->ni", m.inverse_jacobians[cells], pts - x0)
        lam = np.concatenate([1.0 - xi.sum(axis=1, keepdims=True), xi], axis=1)
        return np.einsum("na,na->n", lam, self.q[m.cells[cells]])


@dataclass
class LinearSystem:
    matrix: sp.csr_matrix
    rhs: np.ndarray
    n_velocity: int
    n_pressure: int

    @property
    def shape(self):
        return self.matrix.shape


@dataclass
class NewtonReport:
    iterations: int = 0
    residuals: list = field(default_factory=list)
    converged: bool = False
    linear_residuals: list = field(default_factory=list)
    step_lengths: list = field(default_factory=list)
    wall_time: float = 0.0


def _block_diag(blocks: np.ndarray) -> sp.bsr_matrix:
    n, r, c = blocks.shape
    return sp.bsr_matrix((blocks, np.arange(n), np.arange(n + 1)), shape=(n * r, n * c))


class LDGProblem:
    """Discrete operators for one mesh, forcing and boundary data.

    Everything that does not depend on the iterate is built once here.
    """

    def __init__(self, mesh: Mesh, cfg: SolverConfig, forcing: Callable | None = None, boundary: Callable | None = None):
        self.mesh, self.cfg = mesh, cfg
        self.spec = cfg.spec
        self.space = DGSpace(mesh, cfg.k)
        sp_ = self.space
        d, nc, nq = mesh.dim, mesh.n_cells, sp_.quad.n_points
        self.d, self.nc, self.nq = d, nc, nq
        self.nfq = sp_.fquad.n_points
        self.n_v = sp_.n_dofs((d,))
        self.n_q = mesh.n_vertices
        self.n = self.n_v + self.n_q + 1

        self.W = sp_.w.ravel()
        self.G = sp_.dg_gradient_operator
        self.g0 = sp_.tensor_value_operator @ sp_.lifting_of_data(boundary).ravel()
        self.V = sp_.value_operator
        self.J = sp_.jump_operator
        self.gb = sp_.boundary_values(boundary).ravel()
        self.Wf = sp_.fw.ravel()
        self.hf = np.repeat(mesh.faces.h, self.nfq)
        self.nrm = np.repeat(mesh.faces.normals, self.nfq, axis=0)

        rows = np.repeat(np.arange(nc * nq), d + 1)
        cols = np.repeat(mesh.cells, nq, axis=0).ravel()
        vals = np.tile(sp_.phi, (nc, 1)).ravel()
        self.P = sp.csr_matrix((vals, (rows, cols)), shape=(nc * nq, self.n_q))
        self.TrG = _trace_rows(self.G, nc * nq, d)
        self.mean_row = self.P.T @ self.W

        if forcing is None:
            self.f = np.zeros(nc * nq * d)
        else:
            f = np.asarray(forcing(sp_.qp.reshape(-1, d)), dtype=float)
            self.f = f.reshape(-1)
        if not np.all(np.isfinite(self.f)):
            bad = np.flatnonzero(~np.isfinite(self.f.reshape(nc, -1)).all(axis=1))[0]
            raise AssemblyError(f"forcing is not finite in cell {bad}")

    # -- pointwise fields ---------------------------------------------------
    def fields(self, x):
        d = self.d
        v = x[: self.n_v]
        q = x[self.n_v: self.n_v + self.n_q]
        Gv = (self.G @ v + self.g0).reshape(-1, d, d)
        vq = (self.V @ v).reshape(-1, d)
        qq = self.P @ q
        jv = (self.J @ v - self.gb).reshape(-1, d)
        return v, q, Gv, vq, qq, jv

    def shift(self, x) -> np.ndarray:
        """Per-face stabilization shift at the iterate ``x``."""
        _, _, Gv, *_ = self.fields(x)
        D = sym(Gv).reshape(self.nc, self.nq, self.d, self.d)
        return face_shift(self.space, D)

    def _check(self, arr, name):
        arr = np.asarray(arr)
        ok = np.isfinite(arr.reshape(self.nc, -1)).all(axis=1)
        if not ok.all():
            raise AssemblyError(f"non-finite {name} in cell {int(np.flatnonzero(~ok)[0])}")

    # -- residual -----------------------------------------------------------
    def residual(self, x, shift=None) -> np.ndarray:
        d, cfg = self.d, self.cfg
        x = np.asarray(x, dtype=float)
        v, q, Gv, vq, qq, jv = self.fields(x)
        lam = x[-1]
        D = sym(Gv)
        T = stress(self.spec, D) - qq[:, None, None] * np.eye(d)
        conv = np.zeros_like(vq)
        if cfg.convection:
            T = T - 0.5 * np.einsum("ni,nj->nij", vq, vq)
            conv = 0.5 * np.einsum("nij,nj->ni", Gv, vq)
        self._check(T, "stress")
        rv = self.G.T @ (self.W[:, None, None] * T).ravel()
        rv += self.V.T @ (self.W[:, None] * (conv - self.f.reshape(-1, d))).ravel()

        a = self.shift(x) if shift is None else np.asarray(shift, dtype=float)
        af = np.repeat(a, self.nfq)
        Jt = np.einsum("ni,nj->nij", jv, self.nrm) / self.hf[:, None, None]
        Sa = shifted_stress(self.spec, af, Jt)
        flux = np.einsum("nij,nj->ni", Sa, self.nrm)
        rv += cfg.alpha * (self.J.T @ (self.Wf[:, None] * flux).ravel())

        div = np.einsum("nii->n", Gv)
        rq = self.P.T @ (self.W * div) + lam * self.mean_row
        rl = self.mean_row @ q
        return np.concatenate([rv, rq, [rl]])

    # -- jacobian -----------------------------------------------------------
    def jacobian(self, x, shift=None) -> sp.csr_matrix:
        d, cfg = self.d, self.cfg
        x = np.asarray(x, dtype=float)
        v, q, Gv, vq, qq, jv = self.fields(x)
        D = sym(Gv)
        C = stress_derivative(self.spec, D).reshape(-1, d * d, d * d)
        Avv = self.G.T @ _block_diag(self.W[:, None, None] * C) @ self.G
        if cfg.convection:
            eye = np.eye(d)
            # d(v (x) v)_{ij} / dv_k = delta_ik v_j + v_i delta_jk
            E = np.einsum("ik,nj->nijk", eye, vq) + np.einsum("ni,jk->nijk", vq, eye)
            E = E.reshape(-1, d * d, d)
            Avv = Avv - 0.5 * (self.G.T @ _block_diag(self.W[:, None, None] * E) @ self.V)
            # d([G v] v)_i = dG_{il} v_l + G_{il} dv_l
            A1 = np.einsum("ik,nl->nikl", eye, vq).reshape(-1, d, d * d)
            Avv = Avv + 0.5 * (self.V.T @ (_block_diag(self.W[:, None, None] * A1) @ self.G
                                           + _block_diag(self.W[:, None, None] * Gv) @ self.V))
        a = self.shift(x) if shift is None else np.asarray(shift, dtype=float)
        af = np.repeat(a, self.nfq)
        Jt = np.einsum("ni,nj->nij", jv, self.nrm) / self.hf[:, None, None]
        Ca = shifted_stress_derivative(self.spec, af, Jt)
        M = np.einsum("nijkl,nj,nl->nik", Ca, self.nrm, self.nrm) / self.hf[:, None, None]
        Avv = Avv + cfg.alpha * (self.J.T @ _block_diag(self.Wf[:, None, None] * M) @ self.J)

        WP = sp.diags(self.W) @ self.P
        Bqv = (self.P.T @ sp.diags(self.W) @ self.TrG)
        Avq = -(self.TrG.T @ WP)
        m = sp.csr_matrix(self.mean_row.reshape(-1, 1))
        A = sp.bmat(
            [
                [Avv, Avq, None],
                [Bqv, None, m],
                [None, m.T, None],
            ],
            format="csr",
            dtype=float,
        )
        return A

    def system(self, x, shift=None) -> LinearSystem:
        return LinearSystem(self.jacobian(x, shift), -self.residual(x, shift), self.n_v, self.n_q)


def _trace_rows(G: sp.csr_matrix, n: int, d: int) -> sp.csr_matrix:
    idx = (np.arange(n)[:, None] * d * d + np.arange(d)[None, :] * (d + 1))
    S = sp.csr_matrix((np.ones(n * d), (np.repeat(np.arange(n), d), idx.ravel())), shape=(n, G.shape[0]))
    return (S @ G).tocsr()


def assemble_residual(problem: LDGProblem, state: DiscreteState, shift=None) -> np.ndarray:
    """Residual of both equations and the mean row at ``state``."""
    return problem.residual(state.to_vector(), shift)


def assemble_jacobian(problem: LDGProblem, state: DiscreteState, shift=None) -> LinearSystem:
    """Newton system at ``state`` with the stabilization shift held fixed."""
    return problem.system(state.to_vector(), shift)


def linear_solve(system: LinearSystem | sp.spmatrix, rhs=None, tol: float = 1e-12, refine: int = 3) -> tuple[np.ndarray, float]:
    """Sparse LU solve with a few steps of iterative refinement.

    Returns the solution and the achieved relative residual.
    """
    if isinstance(system, LinearSystem):
        A, b = system.matrix, system.rhs
    else:
        A, b = sp.csc_matrix(system), np.asarray(rhs, dtype=float)
    A = sp.csc_matrix(A)
    try:
        lu = spla.splu(A, permc_spec="COLAMD")
    except RuntimeError as exc:
        raise LinearSolveError(f"factorization failed for system of size {A.shape[0]}: {exc}") from exc
    x = lu.solve(b)
    bn = np.linalg.norm(b)
    if bn == 0.0:
        return np.zeros_like(b), 0.0
    rel = np.linalg.norm(b - A @ x) / bn
    for _ in range(refine):
        if rel <= tol:
            break
        x = x + lu.solve(b - A @ x)
        rel = np.linalg.norm(b - A @ x) / bn
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("linear solve produced non-finite values")
    if rel > max(tol, 1e-8):
        raise LinearSolveError(f"relative residual {rel:.3e} above tolerance {tol:.1e}")
    return x, float(rel)


def newton_solve(problem: LDGProblem, initial: DiscreteState | None = None, raise_on_failure: bool = True):
    """Newton iteration with optional backtracking on residual increase.

    Stops when the l2 residual drops below ``tau_abs`` or below
    ``tau_rel`` times the initial residual.
    """
    cfg = problem.cfg
    t0 = time.perf_counter()
    x = (initial or DiscreteState.zeros(problem.space)).to_vector()
    r = problem.residual(x)
    rn = float(np.linalg.norm(r))
    report = NewtonReport(residuals=[rn])
    r0 = rn
    while True:
        if rn <= cfg.tau_abs or rn <= cfg.tau_rel * r0:
            report.converged = True
            break
        if report.iterations >= cfg.max_newton:
            break
        A = problem.jacobian(x)
        dx, lin = linear_solve(A, -r, tol=cfg.linear_tol)
        report.linear_residuals.append(lin)
        t = 1.0
        xn = x + dx
        rn_new = float(np.linalg.norm(problem.residual(xn)))
        if cfg.backtracking:
            while not (rn_new < rn) and t > 2.0**-12:
                t *= 0.5
                xn = x + t * dx
                rn_new = float(np.linalg.norm(problem.residual(xn)))
            if not (rn_new < rn):
                # stagnation at round-off level; accept the full step
                t, xn = 1.0, x + dx
                rn_new = float(np.linalg.norm(problem.residual(xn)))
        x = xn
        r = problem.residual(x)
        rn = rn_new
        report.iterations += 1
        report.residuals.append(rn)
        report.step_lengths.append(t)
        if not np.isfinite(rn):
            break
    report.wall_time = time.perf_counter() - t0
    state = DiscreteState.from_vector(problem.space, x)
    if not report.converged and raise_on_failure:
        raise NewtonConvergenceError(
            f"Newton did not converge in {report.iterations} iterations (residual {rn:.3e})", report, state
        )
    return state, report


def prolongate(coarse: DiscreteState, fine_space: DGSpace) -> DiscreteState:
    """Evaluate a coarse state on the refined mesh (exact for nested P1)."""
    fm = fine_space.mesh
    if fm.parent is None:
        raise ValueError("fine mesh carries no parent map")
    cm = coarse.space.mesh
    X = fm.vertices[fm.cells]  # (nc, d+1, d)
    par = fm.parent
    x0 = cm.vertices[cm.cells[par, 0]]
    xi = np.einsum("cij,caj->cai", cm.inverse_jacobians[par], X - x0[:, None, :])
    phi = coarse.space.basis.values(xi.reshape(-1, fm.dim)).reshape(fm.n_cells, fm.dim + 1, -1)
    vals = np.einsum("cib,cab->cia", coarse.v.coeffs[par], phi)
    # nodal basis on the fine cell: coefficients are the vertex values
    v = BrokenField(fine_space, vals)
    lam = np.concatenate([1.0 - xi.sum(axis=2, keepdims=True), xi], axis=2)
    qv = np.einsum("cab,cb->ca", lam, coarse.q[cm.cells[par]])
    q = np.zeros(fm.n_vertices)
    q[fm.cells.ravel()] = qv.ravel()
    return DiscreteState(v, q, coarse.lam)


def continuation_initial_guess(spaces: list[DGSpace], solutions: list[DiscreteState]) -> DiscreteState:
    """Initial guess for the next level from the previous level's solution."""
    level = len(solutions)
    if level == 0:
        return DiscreteState.zeros(spaces[0])
    return prolongate(solutions[-1], spaces[level])
