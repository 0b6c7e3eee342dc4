"""Manufactured 2D solutions with a corner singularity at the origin.

``v(x) = |x|^beta (x2, -x1)`` and ``q(x) = |x|^gamma - mean`` on the unit
square; the forcing is assembled from closed-form first and second
derivatives of ``v``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.integrate import quad

from ..orlicz import NFunctionSpec, stress, stress_derivative, sym

__all__ = ["ManufacturedCase2D", "ExactValues", "exact_2d", "radial_mean", "stress_field"]


def radial_mean(gamma: float) -> float:
    """Mean of ``|x|^gamma`` over (0, 1)^2.

    Symmetry about the diagonal reduces it to a one-dimensional integral
    ``2/(gamma+2) int_0^{pi/4} cos(t)^-(gamma+2) dt``.
    """
    val, _ = quad(lambda t: np.cos(t) ** (-(gamma + 2.0)), 0.0, np.pi / 4, epsabs=0.0, epsrel=1e-13)
    return 2.0 * val / (gamma + 2.0)


@dataclass(frozen=True)
class ExactValues:
    v: np.ndarray
    grad_v: np.ndarray
    hess_v: np.ndarray  # [n, i, j, k] = d_j d_k v_i
    q: np.ndarray
    grad_q: np.ndarray
    f: np.ndarray


@dataclass(frozen=True)
class ManufacturedCase2D:
    """Case 1 (pressure barely in W^{1,p'}) or Case 2 (pressure matching the velocity)."""

    p: float
    case_id: int = 2
    beta: float = 1e-2
    delta: float = 1e-5
    mu0: float = 0.5

    def __post_init__(self):
        if self.case_id not in (1, 2):
            raise ValueError("case_id must be 1 or 2")
        NFunctionSpec(self.p, self.delta, self.mu0)

    @property
    def spec(self) -> NFunctionSpec:
        return NFunctionSpec(self.p, self.delta, self.mu0)

    @property
    def gamma(self) -> float:
        if self.case_id == 1:
            return 1.0 - 2.0 / self.spec.p_conj + 1e-2
        return self.beta * (self.p - 2.0) / 2.0 + 1e-2

    @cached_property
    def pressure_mean(self) -> float:
        return radial_mean(self.gamma)

    @property
    def theory_rate(self) -> float:
        """Predicted order of the modular pressure error."""
        return self.spec.p_conj / 2.0 if self.case_id == 1 else 1.0

    # evaluables used by the solver
    def velocity(self, x):
        return exact_2d(self, x, need=("v",)).v

    def velocity_gradient(self, x):
        return exact_2d(self, x, need=("grad_v",)).grad_v

    def pressure(self, x):
        return exact_2d(self, x, need=("q",)).q

    def forcing(self, x):
        return exact_2d(self, x).f


_ROT = np.array([[0.0, 1.0], [-1.0, 0.0]])  # d_j w_i for w = (x2, -x1)


def exact_2d(case: ManufacturedCase2D, x, need=None) -> ExactValues:
    """Exact fields of ``case`` at points ``x`` of shape (n, 2).

    Raises ``ValueError`` at the origin, where the fields are singular.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    if x.shape[-1] != 2:
        raise ValueError("points must be two-dimensional")
    r2 = np.einsum("ni,ni->n", x, x)
    if np.any(r2 == 0.0):
        raise ValueError("exact solution is singular at the origin")
    r = np.sqrt(r2)
    b, g = case.beta, case.gamma
    w = np.stack([x[:, 1], -x[:, 0]], axis=1)
    rb = r**b
    v = rb[:, None] * w
    # d_j v_i = b r^(b-2) x_j w_i + r^b d_j w_i
    c1 = b * r ** (b - 2.0)
    grad = c1[:, None, None] * np.einsum("ni,nj->nij", w, x) + rb[:, None, None] * _ROT
    q = r**g - case.pressure_mean
    gq = (g * r ** (g - 2.0))[:, None] * x
    if need is not None and not {"f", "hess_v"} & set(need):
        return ExactValues(v, grad, np.zeros((len(x), 2, 2, 2)), q, gq, np.zeros_like(v))
    # d_k d_j v_i = b(b-2) r^(b-4) x_k x_j w_i + b r^(b-2)(delta_jk w_i + x_j d_k w_i + x_k d_j w_i)
    c2 = b * (b - 2.0) * r ** (b - 4.0)
    eye = np.eye(2)
    hess = (
        c2[:, None, None, None] * np.einsum("ni,nj,nk->nijk", w, x, x)
        + c1[:, None, None, None]
        * (
            np.einsum("ni,jk->nijk", w, eye)
            + np.einsum("nj,ik->nijk", x, _ROT)
            + np.einsum("nk,ij->nijk", x, _ROT)
        )
    )
    if need is not None and "f" not in need:
        return ExactValues(v, grad, hess, q, gq, np.zeros_like(v))
    D = sym(grad)
    C = stress_derivative(case.spec, D)
    # d_j D_kl = (d_j d_l v_k + d_j d_k v_l) / 2
    dD = 0.5 * (np.einsum("nklj->njkl", hess) + np.einsum("nlkj->njkl", hess))
    div_S = np.einsum("nijkl,njkl->ni", C, dD)
    f = -div_S + np.einsum("nij,nj->ni", grad, v) + gq
    return ExactValues(v, grad, hess, q, gq, f)


def stress_field(case: ManufacturedCase2D, x) -> np.ndarray:
    """``S(Dv(x))``; used by finite-difference checks of the forcing."""
    return stress(case.spec, sym(exact_2d(case, x, need=("grad_v",)).grad_v))
