"""Quadrature rules of precision 6 on reference simplices.

Reference simplices are ``conv{0, e_1, ..., e_d}``. Points are stored in
barycentric coordinates ``(lambda_0, ..., lambda_d)`` where ``lambda_0`` is the
weight of the origin; weights sum to the reference measure ``1/d!``.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations, product
from math import factorial

import numpy as np

__all__ = ["QuadRule", "cell_rule", "face_rule", "gauss_legendre", "monomial_integral", "verify_exactness"]


@dataclass(frozen=True)
class QuadRule:
    dim: int
    barycentric: np.ndarray  # (nq, dim+1)
    weights: np.ndarray      # (nq,)
    degree: int
    name: str = ""

    @property
    def points(self) -> np.ndarray:
        """Cartesian reference coordinates ``(nq, dim)``."""
        return self.barycentric[:, 1:]

    @property
    def n_points(self) -> int:
        return len(self.weights)

    @property
    def reference_measure(self) -> float:
        return 1.0 / factorial(self.dim)


def _orbit(values):
    return sorted(set(permutations(values)))


# 12-point symmetric rule of precision 6 on the triangle (Strang-Fix /
# Dunavant family); constants refined to double precision against the
# exact moment equations.
_TRI6 = [
    (0.2492867451709104212916, 0.1167862757263793660253),
    (0.06308901449150222834033, 0.05084490637020681692094),
]
_TRI6_ABC = (0.05314504984481694735325, 0.3103524510337844054166, 0.08285107561837357519355)

# 24-point Keast rule of precision 6 on the tetrahedron (KEAST7)
_TET6 = [
    (0.2146028712591520292888, 0.03992275025816749209969),
    (0.04067395853461135311558, 0.01007721105532064294801),
    (0.322337890142275510344, 0.05535718154365472209515),
]
_TET6_AB = (0.06366100187501752529924, 0.2696723314583158080341, 0.04821428571428571428571)


@lru_cache(maxsize=None)
def _triangle_rule() -> QuadRule:
    pts, wts = [], []
    for a, w in _TRI6:
        for b in _orbit((a, a, 1.0 - 2.0 * a)):
            pts.append(b)
            wts.append(w)
    a, b, w = _TRI6_ABC
    for perm in _orbit((a, b, 1.0 - a - b)):
        pts.append(perm)
        wts.append(w)
    return QuadRule(2, np.array(pts), np.array(wts) / 2.0, 6, "strang-fix-12")


@lru_cache(maxsize=None)
def _tetrahedron_rule() -> QuadRule:
    pts, wts = [], []
    for a, w in _TET6:
        for b in _orbit((a, a, a, 1.0 - 3.0 * a)):
            pts.append(b)
            wts.append(w)
    a, b, w = _TET6_AB
    for perm in _orbit((a, a, b, 1.0 - 2.0 * a - b)):
        pts.append(perm)
        wts.append(w)
    return QuadRule(3, np.array(pts), np.array(wts) / 6.0, 6, "keast7-24")


@lru_cache(maxsize=None)
def gauss_legendre(n: int = 4) -> QuadRule:
    """n-point Gauss-Legendre rule on [0, 1] (precision 2n-1)."""
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    return QuadRule(1, np.stack([1.0 - s, s], axis=1), 0.5 * w, 2 * n - 1, f"gauss-legendre-{n}")


def cell_rule(dim: int) -> QuadRule:
    """12-point triangle rule (dim=2) or 24-point Keast rule (dim=3)."""
    if dim == 2:
        return _triangle_rule()
    if dim == 3:
        return _tetrahedron_rule()
    raise ValueError(f"unsupported cell dimension {dim}")


def face_rule(dim_of_face: int) -> QuadRule:
    """Face rules: 4-point Gauss on edges, the 12-point rule on triangles."""
    if dim_of_face == 1:
        return gauss_legendre(4)
    if dim_of_face == 2:
        return _triangle_rule()
    raise ValueError(f"unsupported face dimension {dim_of_face}")


def monomial_integral(alpha) -> float:
    """Exact ``int x^alpha`` over the reference simplex of dimension len(alpha)."""
    alpha = tuple(int(a) for a in alpha)
    num = 1.0
    for a in alpha:
        num *= factorial(a)
    return num / factorial(sum(alpha) + len(alpha))


def verify_exactness(rule: QuadRule, degree: int) -> dict:
    """Compare the rule against exact monomial integrals up to ``degree``.

    Returns a dict with the maximal relative error and the offending
    multi-index.
    """
    worst, worst_alpha = 0.0, None
    X = rule.points
    for alpha in product(range(degree + 1), repeat=rule.dim):
        if sum(alpha) > degree:
            continue
        vals = np.prod(X ** np.array(alpha), axis=1)
        approx = float(np.dot(rule.weights, vals))
        exact = monomial_integral(alpha)
        err = abs(approx - exact) / abs(exact)
        if err > worst:
            worst, worst_alpha = err, alpha
    return {"degree": degree, "max_rel_error": worst, "worst_monomial": worst_alpha, "n_points": rule.n_points}
