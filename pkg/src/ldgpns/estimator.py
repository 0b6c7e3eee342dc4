"""scikit-learn style front end for the LDG solver."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .mesh import Mesh
from .solver import DiscreteState, LDGProblem, SolverConfig, newton_solve, prolongate

__all__ = ["PNavierStokesLDG"]


class PNavierStokesLDG(BaseEstimator):
    """Steady p-Navier-Stokes solver with the sklearn estimator interface.

    ``fit`` takes a mesh instead of a design matrix and solves the discrete
    problem; ``predict`` evaluates the discrete velocity at points.

    Parameters
    ----------
    p, delta, mu0 : float
        Stress exponent, regularisation and viscosity scale.
    alpha : float
        Stabilization parameter.
    forcing, boundary : callable, optional
        ``f(x)`` and Dirichlet data ``v0(x)``, both mapping (n, d) to (n, d).
    convection : bool
        Drop the convective term when False (p-Stokes).

    Attributes
    ----------
    state_ : DiscreteState
    report_ : NewtonReport
    problem_ : LDGProblem
    """

    def __init__(self, p=2.5, delta=1e-5, mu0=0.5, alpha=2.5, k=1, tau_abs=1e-8, tau_rel=1e-10,
                 max_newton=25, linear_tol=1e-12, backtracking=True, convection=True,
                 forcing=None, boundary=None):
        self.p = p
        self.delta = delta
        self.mu0 = mu0
        self.alpha = alpha
        self.k = k
        self.tau_abs = tau_abs
        self.tau_rel = tau_rel
        self.max_newton = max_newton
        self.linear_tol = linear_tol
        self.backtracking = backtracking
        self.convection = convection
        self.forcing = forcing
        self.boundary = boundary

    def _config(self) -> SolverConfig:
        return SolverConfig(p=self.p, delta=self.delta, mu0=self.mu0, alpha=self.alpha, k=self.k,
                            tau_abs=self.tau_abs, tau_rel=self.tau_rel, max_newton=self.max_newton,
                            linear_tol=self.linear_tol, backtracking=self.backtracking,
                            convection=self.convection)

    def fit(self, mesh, init_state=None):
        """Solve on ``mesh``; ``init_state`` may live on the parent mesh."""
        if not isinstance(mesh, Mesh):
            raise TypeError(f"expected a Mesh, got {type(mesh).__name__}")
        for name in ("forcing", "boundary"):
            val = getattr(self, name)
            if val is not None and not callable(val):
                raise TypeError(f"{name} must be callable or None")
        problem = LDGProblem(mesh, self._config(), self.forcing, self.boundary)
        guess = init_state
        if guess is not None and guess.space.mesh is not mesh:
            guess = prolongate(guess, problem.space)
        self.state_, self.report_ = newton_solve(problem, guess)
        self.problem_ = problem
        self.n_features_in_ = mesh.dim
        return self

    def _points(self, X):
        check_is_fitted(self, "state_")
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X

    def predict(self, X):
        """Discrete velocity at the rows of ``X``; shape (n, d)."""
        X = self._points(X)
        return self.state_.v.evaluate(X)

    def predict_pressure(self, X):
        """Continuous discrete pressure at the rows of ``X``."""
        X = self._points(X)
        return self.state_.pressure_at(X)
