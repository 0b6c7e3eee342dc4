import numpy as np
import pytest
import scipy.sparse as sp
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from ldgpns.estimator import PNavierStokesLDG
from ldgpns.experiments.manufactured import ManufacturedCase2D
from ldgpns.mesh import mesh_chain
from ldgpns.solver import (
    DiscreteState,
    LDGProblem,
    LinearSolveError,
    NewtonConvergenceError,
    SolverConfig,
    assemble_jacobian,
    assemble_residual,
    continuation_initial_guess,
    linear_solve,
    newton_solve,
    prolongate,
)


@pytest.fixture(scope="module")
def chain():
    return mesh_chain(2, 3)


def smooth_forcing(x):
    return np.stack([np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 0]) * x[:, 1]], axis=1)


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(alpha=0.0)
    with pytest.raises(ValueError):
        SolverConfig(tau_abs=-1.0)
    with pytest.raises(ValueError):
        SolverConfig(k=2)
    with pytest.raises(ValueError):
        SolverConfig(p=0.5)


def test_zero_state_solves_homogeneous_problem(chain):
    P = LDGProblem(chain[2], SolverConfig(p=3.0))
    r = assemble_residual(P, DiscreteState.zeros(P.space))
    assert np.abs(r).max() == 0.0


def test_residual_consistent_for_linear_stokes_flow(chain):
    B = np.array([[0.5, 2.0], [-1.0, -0.5]])
    v = lambda x: x @ B.T + np.array([0.3, -0.2])
    cfg = SolverConfig(p=2.0, delta=0.0, mu0=1.0, convection=False)
    P = LDGProblem(chain[2], cfg, None, v)
    st = DiscreteState(P.space.interpolate(v, (2,)), np.full(P.n_q, 0.0), 0.0)
    assert np.abs(assemble_residual(P, st)).max() <= 1e-10


def test_residual_consistent_for_uniform_flow_with_convection(chain):
    c = np.array([0.7, -1.2])
    v = lambda x: np.tile(c, (len(x), 1))
    P = LDGProblem(chain[2], SolverConfig(p=2.0, delta=0.0, mu0=1.0), None, v)
    st = DiscreteState(P.space.interpolate(v, (2,)), np.zeros(P.n_q), 0.0)
    assert np.abs(assemble_residual(P, st)).max() <= 1e-10


def test_convective_inconsistency_shrinks_with_h():
    # v (x) v is quadratic for linear v and the lifting pairing only sees its P1 part
    B = np.array([[1.0, 2.0], [3.0, -1.0]])
    v = lambda x: x @ B.T
    f = lambda x: (x @ B.T) @ B.T
    res = []
    for m in mesh_chain(2, 3)[1:]:
        P = LDGProblem(m, SolverConfig(p=2.0, delta=0.0, mu0=1.0), f, v)
        st = DiscreteState(P.space.interpolate(v, (2,)), np.zeros(P.n_q), 0.0)
        res.append(np.abs(assemble_residual(P, st)).max())
    assert res[1] < res[0] / 6 and res[2] < res[1] / 6


@pytest.mark.parametrize("p", [2.0, 2.5, 3.0, 1.8])
def test_jacobian_matches_finite_differences(chain, p):
    g = lambda x: np.stack([x[:, 1], 0.3 * x[:, 0]], axis=1)
    P = LDGProblem(chain[1], SolverConfig(p=p, delta=0.05), smooth_forcing, g)
    rng = np.random.default_rng(int(10 * p))
    x = rng.standard_normal(P.n)
    a = P.shift(x)
    A = P.jacobian(x, a)
    for _ in range(3):
        dx = rng.standard_normal(P.n)
        h = 1e-6
        fd = (P.residual(x + h * dx, a) - P.residual(x - h * dx, a)) / (2 * h)
        assert np.linalg.norm(A @ dx - fd) <= 1e-5 * np.linalg.norm(fd)


def test_saddle_point_blocks_are_transposes(chain):
    P = LDGProblem(chain[1], SolverConfig(p=2.5))
    sys = assemble_jacobian(P, DiscreteState.zeros(P.space))
    A = sys.matrix.tocsr()
    nv, nq = sys.n_velocity, sys.n_pressure
    Bvq = A[:nv, nv:nv + nq]
    Bqv = A[nv:nv + nq, :nv]
    assert abs(Bvq + Bqv.T).max() <= 1e-14
    m = A[nv:nv + nq, -1].toarray().ravel()
    assert np.allclose(m, A[-1, nv:nv + nq].toarray().ravel())
    assert m.sum() == pytest.approx(1.0)


def test_stokes_jacobian_does_not_depend_on_iterate(chain):
    P = LDGProblem(chain[1], SolverConfig(p=2.0, convection=False), smooth_forcing)
    rng = np.random.default_rng(0)
    x1, x2 = rng.standard_normal(P.n), rng.standard_normal(P.n)
    # frozen shift plays no role for p = 2
    assert abs(P.jacobian(x1) - P.jacobian(x2)).max() <= 1e-12


def test_linear_solve_identity_and_dense_oracle():
    b = np.arange(5.0)
    x, rel = linear_solve(sp.identity(5, format="csr"), b)
    assert np.allclose(x, b) and rel == 0.0
    rng = np.random.default_rng(7)
    n, m = 150, 40
    M = rng.standard_normal((n, n))
    A = M @ M.T + n * np.eye(n)
    Bm = rng.standard_normal((m, n))
    K = np.block([[A, Bm.T], [Bm, np.zeros((m, m))]])
    rhs = rng.standard_normal(n + m)
    x, rel = linear_solve(sp.csr_matrix(K), rhs)
    assert np.allclose(x, np.linalg.solve(K, rhs), atol=1e-10, rtol=0)
    assert rel <= 1e-12


def test_linear_solve_reports_singular_systems():
    K = sp.csr_matrix(np.array([[1.0, 0.0], [0.0, 0.0]]))
    with pytest.raises(LinearSolveError):
        linear_solve(K, np.array([1.0, 1.0]))


def test_stokes_converges_in_one_step_with_mean_free_pressure(chain):
    P = LDGProblem(chain[1], SolverConfig(p=2.0, delta=0.0, convection=False), smooth_forcing)
    st, rep = newton_solve(P)
    assert rep.converged and rep.iterations == 1
    assert abs(P.mean_row @ st.q) <= 1e-12


def test_navier_stokes_p2_converges_quickly(chain):
    g = lambda x: np.stack([np.sin(np.pi * x[:, 0]) * x[:, 1], -x[:, 0] ** 2], axis=1)
    for m in chain:
        P = LDGProblem(m, SolverConfig(p=2.0, delta=1e-5), smooth_forcing, g)
        _, rep = newton_solve(P)
        assert rep.converged and rep.iterations <= 8


def test_manufactured_p3_level3_converges_and_satisfies_constraints(chain):
    case = ManufacturedCase2D(p=3.0, case_id=2)
    P = LDGProblem(chain[3], SolverConfig(p=3.0), case.forcing, case.velocity)
    st, rep = newton_solve(P)
    assert rep.converged and rep.iterations <= 25
    assert rep.residuals[-1] <= max(1e-8, 1e-10 * rep.residuals[0])
    assert np.all(np.diff(rep.residuals) < 0)
    # discrete divergence against every pressure test function, and the mean
    _, _, Gv, *_ = P.fields(st.to_vector())
    div = P.P.T @ (P.W * np.einsum("nii->n", Gv))
    assert np.abs(div).max() <= 1e-8
    assert abs(P.mean_row @ st.q) <= 1e-10


def test_nonconvergence_raises_with_report(chain):
    case = ManufacturedCase2D(p=3.0, case_id=2)
    P = LDGProblem(chain[1], SolverConfig(p=3.0, max_newton=1), case.forcing, case.velocity)
    with pytest.raises(NewtonConvergenceError) as err:
        newton_solve(P)
    assert err.value.report.iterations == 1 and not err.value.report.converged
    st, rep = newton_solve(P, raise_on_failure=False)
    assert not rep.converged


def test_continuation(chain):
    case = ManufacturedCase2D(p=2.5, case_id=2)
    cfg = SolverConfig(p=2.5)
    P1 = LDGProblem(chain[1], cfg, case.forcing, case.velocity)
    P2 = LDGProblem(chain[2], cfg, case.forcing, case.velocity)
    first = continuation_initial_guess([P1.space], [])
    assert np.all(first.to_vector() == 0.0)
    s1, _ = newton_solve(P1)
    guess = continuation_initial_guess([P1.space, P2.space], [s1])
    pts = P1.space.qp.reshape(-1, 2)
    coarse_vals = s1.v.at_qp().reshape(-1, 2)
    assert np.abs(guess.v.evaluate(pts) - coarse_vals).max() <= 1e-12
    assert np.abs(guess.pressure_at(pts) - s1.pressure_at(pts)).max() <= 1e-12
    _, warm = newton_solve(P2, guess)
    _, cold = newton_solve(P2)
    assert warm.iterations <= cold.iterations


def test_prolongate_requires_parent(chain):
    P = LDGProblem(chain[0], SolverConfig())
    with pytest.raises(ValueError):
        prolongate(DiscreteState.zeros(P.space), P.space)


def test_nonfinite_forcing_is_reported(chain):
    from ldgpns.solver import AssemblyError

    bad = lambda x: np.where(x[:, :1] > 0.5, np.nan, 0.0) * np.ones((1, 2))
    with pytest.raises(AssemblyError, match="cell"):
        LDGProblem(chain[1], SolverConfig(), bad)


class TestEstimator:
    def test_params_roundtrip(self):
        est = PNavierStokesLDG(p=3.0, alpha=4.0)
        params = est.get_params()
        assert params["p"] == 3.0 and params["alpha"] == 4.0
        est2 = clone(est).set_params(delta=0.1)
        assert est2.delta == 0.1 and est.delta == 1e-5

    def test_predict_before_fit(self):
        with pytest.raises(NotFittedError):
            PNavierStokesLDG().predict(np.zeros((1, 2)))

    def test_fit_predict(self, chain):
        case = ManufacturedCase2D(p=2.5, case_id=2)
        est = PNavierStokesLDG(p=2.5, forcing=case.forcing, boundary=case.velocity).fit(chain[2])
        assert est.report_.converged
        X = np.random.default_rng(0).uniform(0.05, 0.95, (50, 2))
        V = est.predict(X)
        assert V.shape == (50, 2)
        assert np.abs(V - case.velocity(X)).max() < 0.05
        q = est.predict_pressure(X)
        assert q.shape == (50,)
        with pytest.raises(ValueError):
            est.predict(np.zeros((3, 3)))

    def test_fit_with_coarse_initial_state(self, chain):
        case = ManufacturedCase2D(p=2.5, case_id=2)
        coarse = PNavierStokesLDG(p=2.5, forcing=case.forcing, boundary=case.velocity).fit(chain[1])
        fine = clone(coarse).fit(chain[2], init_state=coarse.state_)
        assert fine.report_.converged

    def test_rejects_bad_inputs(self, chain):
        with pytest.raises(TypeError):
            PNavierStokesLDG().fit(np.zeros((3, 2)))
        with pytest.raises(TypeError):
            PNavierStokesLDG(forcing=3.0).fit(chain[0])


def test_convective_form_vanishes_on_the_diagonal(chain):
    # b_h(v, v, v) = 0: the convective residual is orthogonal to the velocity itself
    rng = np.random.default_rng(21)
    with_c = LDGProblem(chain[2], SolverConfig(p=2.5))
    without = LDGProblem(chain[2], SolverConfig(p=2.5, convection=False))
    x = rng.standard_normal(with_c.n)
    conv = with_c.residual(x) - without.residual(x)
    nv = with_c.n_v
    assert abs(conv[:nv] @ x[:nv]) <= 1e-12 * np.linalg.norm(conv) * np.linalg.norm(x[:nv])
    assert np.abs(conv[nv:]).max() == 0.0
