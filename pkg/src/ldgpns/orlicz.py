"""Kernels for the (p, delta) N-function family and the stresses built on it.

All scalar routines broadcast over numpy arrays; tensor routines act on the
trailing two axes of arrays of shape ``(..., d, d)``.

The N-function is

    phi(t) = int_0^t (delta + s)^(p-2) s ds,

and its shifted companion ``phi_a`` has derivative ``(delta + a + t)^(p-2) t``,
so every routine below only ever sees the combined offset ``c = delta + a``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

__all__ = [
    "NFunctionSpec",
    "ShiftedSpec",
    "phi_value",
    "phi_prime",
    "phi_second",
    "conjugate_value",
    "conjugate_prime",
    "sym",
    "frobenius",
    "stress",
    "shifted_stress",
    "f_transform",
    "stress_derivative",
    "shifted_stress_derivative",
]

# below this ratio t/c the power-series form of phi is used
_SERIES_CUTOFF = 0.125
_SERIES_TERMS = 40


@dataclass(frozen=True)
class NFunctionSpec:
    """Parameters of ``phi_{p,delta}`` and of the stress ``mu0 (delta+|A|)^(p-2) A``.

    Parameters
    ----------
    p : float
        Growth exponent, ``p > 1``.
    delta : float
        Regularisation ``delta >= 0``.
    mu0 : float
        Viscosity scale ``mu0 > 0``. Only :func:`stress` and
        :func:`stress_derivative` use it.
    """

    p: float
    delta: float = 0.0
    mu0: float = 1.0

    def __post_init__(self):
        if not np.isfinite(self.p) or self.p <= 1.0:
            raise ValueError(f"p must be > 1, got {self.p}")
        if not np.isfinite(self.delta) or self.delta < 0.0:
            raise ValueError(f"delta must be >= 0, got {self.delta}")
        if not np.isfinite(self.mu0) or self.mu0 <= 0.0:
            raise ValueError(f"mu0 must be > 0, got {self.mu0}")

    @property
    def p_conj(self) -> float:
        """Hoelder conjugate exponent ``p' = p / (p - 1)``."""
        return self.p / (self.p - 1.0)

    def shifted(self, a: float) -> "ShiftedSpec":
        return ShiftedSpec(self, a)


@dataclass(frozen=True)
class ShiftedSpec:
    """An N-function spec together with a scalar shift ``a >= 0``."""

    base: NFunctionSpec
    shift: float = 0.0

    def __post_init__(self):
        if not np.isfinite(self.shift) or self.shift < 0.0:
            raise ValueError(f"shift must be >= 0, got {self.shift}")

    def with_shift(self, a: float) -> "ShiftedSpec":
        return replace(self, shift=a)


def _unpack(spec, shift):
    """Return ``(p, offset)`` where offset = delta + shift (broadcast array)."""
    if isinstance(spec, ShiftedSpec):
        base, a = spec.base, spec.shift
    elif isinstance(spec, NFunctionSpec):
        base, a = spec, 0.0
    else:
        raise TypeError(f"expected NFunctionSpec or ShiftedSpec, got {type(spec).__name__}")
    if shift is not None:
        shift = np.asarray(shift, dtype=float)
        if np.any(shift < 0.0):
            raise ValueError("shift must be nonnegative")
        a = a + shift
    return base.p, base.delta + np.asarray(a, dtype=float)


def _check_nonneg(t, name="t"):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0):
        raise ValueError(f"{name} must be nonnegative")
    if not np.all(np.isfinite(t)):
        raise ValueError(f"{name} must be finite")
    return t


def _series_coefficients(p):
    # phi(t) = c^p * sum_{n>=2} coef_n x^n with x = t/c;
    # coef_n = (n-1)/n! * prod_{j=2}^{n-1} (p-j)
    coef = np.zeros(_SERIES_TERMS + 1)
    prod = 1.0
    fact = 1.0
    for n in range(1, _SERIES_TERMS + 1):
        fact *= n
        if n >= 3:
            prod *= p - (n - 1)
        if n >= 2:
            coef[n] = (n - 1) / fact * prod
    return coef


def _phi(p, c, t):
    c, t = np.broadcast_arrays(np.asarray(c, float), np.asarray(t, float))
    out = np.zeros(t.shape)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        x = np.where(c > 0.0, t / np.where(c > 0.0, c, 1.0), np.inf)
    small = x < _SERIES_CUTOFF
    if np.any(small):
        coef = _series_coefficients(p)
        xs = x[small]
        # Horner from the top coefficient down to x^2
        acc = np.zeros_like(xs)
        for n in range(_SERIES_TERMS, 1, -1):
            acc = acc * xs + coef[n]
        out[small] = c[small] ** p * acc * xs * xs
    big = ~small
    if np.any(big):
        cb, tb = c[big], t[big]
        s = cb + tb
        out[big] = (s**p - cb**p) / p - cb * (s ** (p - 1.0) - cb ** (p - 1.0)) / (p - 1.0)
    return out


def phi_value(spec, t, shift=None):
    """Evaluate ``phi_a(t) = int_0^t (delta + a + s)^(p-2) s ds`` in closed form.

    Parameters
    ----------
    spec : NFunctionSpec or ShiftedSpec
    t : array_like
        Nonnegative arguments.
    shift : array_like, optional
        Extra (pointwise) shift added to the one carried by ``spec``.
    """
    t = _check_nonneg(t)
    p, c = _unpack(spec, shift)
    out = _phi(p, c, t)
    return out if out.ndim else float(out)


def _phi_prime(p, c, t):
    with np.errstate(divide="ignore", invalid="ignore"):
        base = c + t
        val = np.where(base > 0.0, base ** (p - 2.0) * t, 0.0)
    return val


def phi_prime(spec, t, shift=None):
    """Derivative ``(delta + a + t)^(p-2) t`` of the (shifted) N-function."""
    t = _check_nonneg(t)
    p, c = _unpack(spec, shift)
    out = np.asarray(_phi_prime(p, c, t))
    return out if out.ndim else float(out)


def phi_second(spec, t, shift=None):
    """Second derivative ``(c + t)^(p-3) ((p-1) t + c)`` with ``c = delta + a``."""
    t = _check_nonneg(t)
    p, c = _unpack(spec, shift)
    base = c + t
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.asarray(base ** (p - 3.0) * ((p - 1.0) * t + c))
    return out if out.ndim else float(out)


def _invert_phi_prime(p, c, u, rtol=1e-14, maxiter=200):
    """Solve ``(c + t)^(p-2) t = u`` for t >= 0, elementwise.

    Safeguarded Newton inside a bracket that is widened until it holds the
    root; bisection is taken whenever Newton leaves the bracket.
    """
    c, u = np.broadcast_arrays(np.asarray(c, float), np.asarray(u, float))
    c = c.astype(float).copy()
    u = u.astype(float).copy()
    lo = np.zeros_like(u)
    hi = np.maximum(1.0, 2.0 * u ** (1.0 / (p - 1.0)) * 2.0 ** (abs(p - 2.0) / (p - 1.0)) + c)
    for _ in range(200):
        short = _phi_prime(p, c, hi) < u
        if not np.any(short):
            break
        hi = np.where(short, 2.0 * hi, hi)
    else:  # pragma: no cover - cannot happen for p > 1
        raise RuntimeError("failed to bracket the inverse of phi'")

    # starting guess: the smaller of the two power-law regimes (an upper
    # bound of the root when p >= 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = np.where(c > 0.0, u / c ** (p - 2.0), np.inf)
    t = np.minimum(np.minimum(lin, u ** (1.0 / (p - 1.0))), hi)
    t = np.where(u > 0.0, t, 0.0)
    active = u > 0.0
    for _ in range(maxiter):
        if not np.any(active):
            break
        g = _phi_prime(p, c, t) - u
        lo = np.where(active & (g < 0.0), t, lo)
        hi = np.where(active & (g > 0.0), t, hi)
        with np.errstate(divide="ignore", invalid="ignore"):
            d = (c + t) ** (p - 3.0) * ((p - 1.0) * t + c)
            step = g / d
        t_new = t - step
        bad = ~np.isfinite(t_new) | (t_new <= lo) | (t_new >= hi)
        t_new = np.where(bad, 0.5 * (lo + hi), t_new)
        conv = np.abs(t_new - t) <= rtol * np.abs(t_new)
        t = np.where(active, t_new, t)
        active = active & ~conv & (hi - lo > rtol * hi)
    if np.any(active):  # pragma: no cover
        raise RuntimeError("root find for the conjugate N-function did not converge")
    return t


def conjugate_prime(spec, u, shift=None):
    """Derivative of the conjugate, i.e. the inverse function of ``phi_a'``."""
    u = _check_nonneg(u, "u")
    p, c = _unpack(spec, shift)
    out = _invert_phi_prime(p, c, u)
    return out if out.ndim else float(out)


def conjugate_value(spec, u, shift=None):
    """Evaluate the convex conjugate ``sup_{s>=0} (s u - phi_a(s))``.

    The supremum is attained where ``phi_a'(s) = u``; that root is found by a
    bracketed Newton iteration and the Legendre identity is then evaluated.
    """
    u = _check_nonneg(u, "u")
    p, c = _unpack(spec, shift)
    ts = _invert_phi_prime(p, c, u)
    out = np.asarray(u * ts - _phi(p, c, ts))
    out = np.maximum(out, 0.0)
    return out if out.ndim else float(out)


# -- tensor kernels ---------------------------------------------------------

def sym(A):
    """Symmetric part of the trailing ``d x d`` block."""
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + np.swapaxes(A, -1, -2))


def frobenius(A):
    """Frobenius norm over the trailing two axes."""
    A = np.asarray(A, dtype=float)
    return np.sqrt(np.einsum("...ij,...ij->...", A, A))


def _check_tensor(A):
    A = np.asarray(A, dtype=float)
    if A.ndim < 2 or A.shape[-1] != A.shape[-2]:
        raise ValueError(f"expected array of shape (..., d, d), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("tensor argument contains non-finite entries")
    return A


def _power_law(p, c, A):
    As = sym(A)
    n = frobenius(As)
    with np.errstate(divide="ignore", invalid="ignore"):
        fac = np.where(c + n > 0.0, (c + n) ** (p - 2.0), 0.0 if p > 2 else np.inf)
    fac = np.where(n > 0.0, fac, np.where(np.isfinite(fac), fac, 0.0))
    return fac[..., None, None] * As


def stress(spec: NFunctionSpec, A):
    """Extra stress ``mu0 (delta + |A^sym|)^(p-2) A^sym``."""
    A = _check_tensor(A)
    return spec.mu0 * _power_law(spec.p, spec.delta, A)


def shifted_stress(spec: NFunctionSpec, a, A):
    """Shifted stress ``phi_a'(|A^sym|)/|A^sym| A^sym`` (no ``mu0`` factor).

    ``a`` may be a scalar or an array broadcasting against ``A.shape[:-2]``.
    """
    A = _check_tensor(A)
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0):
        raise ValueError("shift must be nonnegative")
    return _power_law(spec.p, spec.delta + a, A)


def f_transform(spec: NFunctionSpec, A):
    """``F(A) = (delta + |A^sym|)^((p-2)/2) A^sym``."""
    A = _check_tensor(A)
    return _power_law(0.5 * (spec.p + 2.0), spec.delta, A)


def _power_law_derivative(p, c, A):
    A = _check_tensor(A)
    d = A.shape[-1]
    As = sym(A)
    n = frobenius(As)
    c = np.broadcast_to(np.asarray(c, dtype=float), n.shape)
    base = c + n
    if np.any((base == 0.0) & (p < 2.0)):
        raise ValueError("stress derivative is singular at A^sym = 0 for p < 2 without offset")
    eye = np.eye(d)
    P = 0.5 * (np.einsum("ik,jl->ijkl", eye, eye) + np.einsum("il,jk->ijkl", eye, eye))
    with np.errstate(divide="ignore", invalid="ignore"):
        f0 = np.where(base > 0.0, base ** (p - 2.0), 1.0 if p == 2.0 else 0.0)
        f1 = np.where(n > 0.0, (p - 2.0) * base ** (p - 3.0) / n, 0.0)
    out = f0[..., None, None, None, None] * P
    out = out + f1[..., None, None, None, None] * np.einsum("...ij,...kl->...ijkl", As, As)
    return out


def stress_derivative(spec: NFunctionSpec, A):
    """Exact derivative ``dS/dA`` as an array of shape ``(..., d, d, d, d)``.

    Entry ``[..., i, j, k, l]`` is ``dS_ij / dA_kl``; the symmetrisation of the
    argument is already composed in, so the result maps any ``B`` to
    ``dS(A)[B] = dS(A)[B^sym]``.
    """
    return spec.mu0 * _power_law_derivative(spec.p, spec.delta, A)


def shifted_stress_derivative(spec: NFunctionSpec, a, A):
    """Derivative of :func:`shifted_stress` in its tensor argument (shift fixed)."""
    a = np.asarray(a, dtype=float)
    if np.any(a < 0.0):
        raise ValueError("shift must be nonnegative")
    return _power_law_derivative(spec.p, spec.delta + a, A)
