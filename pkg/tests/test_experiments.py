import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ldgpns.experiments.counterexample import (
    Counterexample3D,
    divergence_fd,
    exact_3d_field,
    locate_anchor_points,
    muckenhoupt_diagnostic,
)
from ldgpns.experiments.errors import ErrorReport, compute_eoc, error_quantities
from ldgpns.experiments.manufactured import ManufacturedCase2D, exact_2d, radial_mean, stress_field
from ldgpns.mesh import mesh_chain
from ldgpns.orlicz import NFunctionSpec, conjugate_value
from ldgpns.solver import DiscreteState, LDGProblem, SolverConfig

Q0 = (0.95932604, 0.08134792, 0.04067396)


# manufactured solution

@pytest.mark.parametrize("gamma", [0.01, 0.2, 0.5, 1.01])
def test_radial_mean_against_mpmath(gamma):
    mpmath.mp.dps = 30
    ref = mpmath.quad(lambda x, y: mpmath.sqrt(x * x + y * y) ** gamma, [0, 1], [0, 1])
    assert radial_mean(gamma) == pytest.approx(float(ref), rel=1e-12)


def test_case_parameters():
    c1 = ManufacturedCase2D(2.5, case_id=1)
    assert c1.gamma == pytest.approx(1 - 2 / c1.spec.p_conj + 0.01)
    assert c1.theory_rate == pytest.approx(c1.spec.p_conj / 2)
    c2 = ManufacturedCase2D(3.0, case_id=2)
    assert c2.gamma == pytest.approx(0.01 * 0.5 + 0.01)
    assert c2.theory_rate == 1.0
    with pytest.raises(ValueError):
        ManufacturedCase2D(2.5, case_id=3)


def test_velocity_is_divergence_free_and_pressure_mean_free():
    case = ManufacturedCase2D(3.0, case_id=1)
    x = np.random.default_rng(0).uniform(1e-3, 1, (1000, 2))
    g = exact_2d(case, x).grad_v
    assert np.abs(np.einsum("nii->n", g)).max() <= 1e-12
    q = lambda y, x_: case.pressure(np.array([[x_, y]]))[0]
    from scipy.integrate import dblquad

    val, _ = dblquad(q, 0, 1, 0, 1, epsabs=1e-11)
    assert abs(val) <= 1e-8


def test_beta_zero_is_rigid_rotation():
    case = ManufacturedCase2D(2.5, case_id=2, beta=0.0)
    x = np.random.default_rng(1).uniform(0.01, 1, (50, 2))
    ex = exact_2d(case, x)
    assert np.allclose(ex.v, np.stack([x[:, 1], -x[:, 0]], axis=1))
    assert np.allclose(ex.hess_v, 0.0)
    # rigid rotation: D v = 0, so f = [grad v] v + grad q
    assert np.allclose(ex.f, np.einsum("nij,nj->ni", ex.grad_v, ex.v) + ex.grad_q)


@pytest.mark.parametrize("p,case_id", [(2.25, 1), (2.5, 2), (3.0, 2)])
def test_forcing_matches_finite_differences(p, case_id):
    case = ManufacturedCase2D(p, case_id=case_id)
    x = np.random.default_rng(2).uniform(0.1, 0.9, (40, 2))
    h = 1e-5
    div_S = np.zeros((len(x), 2))
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        div_S += (stress_field(case, x + e)[:, :, j] - stress_field(case, x - e)[:, :, j]) / (2 * h)
    ex = exact_2d(case, x)
    ref = -div_S + np.einsum("nij,nj->ni", ex.grad_v, ex.v) + ex.grad_q
    assert np.abs(ex.f - ref).max() <= 1e-4 * max(1.0, np.abs(ref).max())


def test_hessian_matches_finite_differences():
    case = ManufacturedCase2D(2.5, beta=0.3)
    x = np.random.default_rng(3).uniform(0.1, 0.9, (20, 2))
    h = 1e-6
    for k in range(2):
        e = np.zeros(2)
        e[k] = h
        fd = (case.velocity_gradient(x + e) - case.velocity_gradient(x - e)) / (2 * h)
        assert np.allclose(exact_2d(case, x).hess_v[..., k], fd, atol=1e-6)


def test_origin_is_rejected():
    with pytest.raises(ValueError):
        exact_2d(ManufacturedCase2D(2.5), np.array([[0.0, 0.0]]))


# counterexample

@pytest.fixture(scope="module")
def cfg():
    return Counterexample3D(Q0, N=8)


def test_balls_have_disjoint_interiors_and_shrink(cfg):
    for k in range(7):
        gap = np.linalg.norm(cfg.center(k) - cfg.center(k + 1))
        # consecutive balls are tangent
        assert gap == pytest.approx(cfg.radius(k) + cfg.radius(k + 1), rel=1e-14)
        far = np.linalg.norm(cfg.center(k) - cfg.center(k + 2))
        assert far > cfg.radius(k) + cfg.radius(k + 2)
        assert cfg.radius(k + 1) == cfg.radius(k) / 2
    # every ball stays inside the closed unit cube
    for k in range(8):
        c, r = cfg.center(k), cfg.radius(k)
        assert np.all(c - r >= -1e-14) and np.all(c + r <= 1 + 1e-14)


def test_field_vanishes_outside_balls_and_on_spheres(cfg):
    rng = np.random.default_rng(4)
    x = rng.uniform(0, 1, (2000, 3))
    out = cfg.ball_index(x) < 0
    f = exact_3d_field(cfg, x[out], p=3.0)
    assert np.all(f.v == 0) and np.allclose(f.mu, cfg.delta ** 1.0)
    for k in range(1, 6):
        d = rng.standard_normal((50, 3))
        s = cfg.center(k) + cfg.radius(k) * d / np.linalg.norm(d, axis=1, keepdims=True) * (1 - 1e-15)
        assert np.abs(exact_3d_field(cfg, s).v).max() <= 1e-12


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 6), st.integers(0, 2**31 - 1))
def test_vortex_is_divergence_free(k, seed):
    cfg = Counterexample3D(Q0, N=8)
    rng = np.random.default_rng(seed)
    d = rng.standard_normal((50, 3))
    rad = cfg.radius(k) * rng.uniform(0.05, 0.95, (50, 1))
    x = cfg.center(k) + rad * d / np.linalg.norm(d, axis=1, keepdims=True)
    # truncation ~ h^2 k / r^2 and round-off ~ k eps / h balance near h = 2e-5 r
    h = 2e-5 * cfg.radius(k)
    assert np.abs(divergence_fd(cfg, x, h=h)).max() <= 1e-8


def test_symmetric_gradient_matches_finite_differences(cfg):
    k = 2
    rng = np.random.default_rng(5)
    d = rng.standard_normal((20, 3))
    x = cfg.center(k) + 0.5 * cfg.radius(k) * d / np.linalg.norm(d, axis=1, keepdims=True)
    h = 1e-7
    G = np.zeros((20, 3, 3))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        G[:, :, j] = (exact_3d_field(cfg, x + e).v - exact_3d_field(cfg, x - e).v) / (2 * h)
    assert np.allclose(exact_3d_field(cfg, x).Dv, 0.5 * (G + np.swapaxes(G, 1, 2)), atol=1e-6)


def test_support_of_truncation(cfg):
    x = cfg.center(3)[None] + 0.3 * cfg.radius(3)
    assert np.all(exact_3d_field(cfg, x, N=3).v == 0)
    assert np.any(exact_3d_field(cfg, x, N=4).v != 0)
    assert cfg.minimal_truncation(x) == 4


@pytest.fixture(scope="module")
def chain3():
    return mesh_chain(3, 4)


def test_anchor_points(chain3):
    a = locate_anchor_points(chain3)
    assert np.allclose(a.q0, Q0, atol=1e-8)
    assert a.N[:2] == [4, 5]
    assert a.N == [4, 5, 6, 7, 8]
    e1 = np.array([1.0, 0, 0])
    d0 = np.linalg.norm(a.q0 - e1)
    for i, q in enumerate(a.points):
        assert np.linalg.norm(q - e1) == pytest.approx(2.0**-i * d0, rel=1e-10)


def test_diagnostic_with_constant_weight_is_weight_squared(chain3):
    rows = muckenhoupt_diagnostic(chain3[:3], weight=lambda x: np.full(len(x), 7.0))
    for r in rows:
        assert r.resolved
        assert r.E == pytest.approx(r.weight_sum**2, rel=1e-12)
        assert r.normalized == pytest.approx(1.0)


# errors and EOC

def _reports(errors, hs):
    return [ErrorReport(i, h, 1, 1, 1, e, e, e, e) for i, (e, h) in enumerate(zip(errors, hs))]


def test_eoc_for_geometric_sequences():
    hs = [2.0**-i for i in range(4)]
    t = compute_eoc(_reports([2.0**-i for i in range(4)], hs))
    assert math.isnan(t.eoc["e_F"][0])
    assert np.allclose(t.eoc["e_F"][1:], 1.0)
    t = compute_eoc(_reports([4.0**-i for i in range(4)], hs))
    assert np.allclose(t.eoc["e_q_modular"][1:], 2.0)
    t = compute_eoc(_reports([1.0, 0.0, 0.5], hs[:3]))
    assert math.isnan(t.eoc["e_jump"][1]) and math.isnan(t.eoc["e_jump"][2])
    with pytest.raises(ValueError):
        compute_eoc(_reports([1.0], [1.0]))


def test_error_report_rejects_bad_values():
    with pytest.raises(ValueError):
        ErrorReport(0, 1.0, 1, 1, 1, float("nan"), 0, 0, 0)
    with pytest.raises(ValueError):
        ErrorReport(0, 1.0, 1, 1, 1, 0, -1.0, 0, 0)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-3, 1e3))
def test_quadratic_conjugate_without_shift(t):
    assert conjugate_value(NFunctionSpec(2.0, 0.0), t) == pytest.approx(0.5 * t * t, rel=1e-12)


def test_errors_of_interpolated_exact_state_are_small():
    case = ManufacturedCase2D(2.5, case_id=2, beta=0.0)
    errs = []
    for m in mesh_chain(2, 3)[2:]:
        P = LDGProblem(m, SolverConfig(p=2.5), case.forcing, case.velocity)
        v = P.space.interpolate(lambda x: np.stack([x[:, 1], -x[:, 0]], axis=1), (2,))
        # q is continuous at the origin for gamma > 0; nudge that vertex off the singular point
        verts = np.where(np.all(m.vertices == 0, axis=1, keepdims=True), 1e-150, m.vertices)
        q = case.pressure(verts)
        q = q - P.mean_row @ q
        rep = error_quantities(P, DiscreteState(v, q, 0.0), case)
        errs.append(rep)
    # a rigid rotation is reproduced exactly by P1
    assert errs[-1].e_F <= 1e-10 and errs[-1].e_jump <= 1e-10
    # only the pressure interpolation error remains and it shrinks
    assert errs[1].e_q_norm < errs[0].e_q_norm
