"""Three-dimensional vortex field whose viscosity weight leaves A_2.

Vortices of shrinking radius ``r_k = 2^(-k-2)`` are stacked along the ray
from ``e1`` towards the anchor quadrature point ``q0``. Vortex ``k`` has
amplitude proportional to ``k``, so the weight ``(delta + |Dv|)^(p-2)``
oscillates ever faster near ``e1``.

Truncations are counted from zero: ``vbar^N`` sums vortices ``0..N-1`` and
the ``k = 0`` term vanishes identically. With this count the minimal
truncations whose support contains the anchor points are ``N_0 = 4`` and
``N_1 = 5``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..mesh import Mesh
from ..quadrature import QuadRule, cell_rule

__all__ = [
    "Counterexample3D",
    "FieldValues",
    "exact_3d_field",
    "AnchorPoints",
    "locate_anchor_points",
    "DiagnosticRow",
    "muckenhoupt_diagnostic",
]

_E1 = np.array([1.0, 0.0, 0.0])


@dataclass(frozen=True)
class Counterexample3D:
    """Geometry of the vortex chain; ``q0`` is the anchor point in K0."""

    q0: tuple
    N: int = 8
    delta: float = 1e-5
    p: float = 3.0

    @property
    def direction(self) -> np.ndarray:
        d = np.asarray(self.q0, dtype=float) - _E1
        return d / np.linalg.norm(d)

    def radius(self, k) -> np.ndarray:
        return 2.0 ** (-np.asarray(k, dtype=float) - 2.0)

    def center(self, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        return _E1 + 3.0 * self.radius(k)[..., None] * self.direction

    def ball_index(self, x) -> np.ndarray:
        """Index of the closed ball containing each point, or -1."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        out = np.full(len(x), -1)
        for k in range(self.N):
            inside = np.linalg.norm(x - self.center(k), axis=1) <= self.radius(k)
            out[inside & (out < 0)] = k
        return out

    def minimal_truncation(self, x) -> int:
        """Smallest N with ``x`` in the support of ``vbar^N``."""
        k = int(self.ball_index(x)[0])
        if k < 1:
            raise ValueError("point lies in no vortex support")
        return k + 1


@dataclass(frozen=True)
class FieldValues:
    v: np.ndarray
    Dv: np.ndarray
    mu: np.ndarray
    ball: np.ndarray


def _vortex(k, r, y):
    # v = (k/r)(r - rho)/2 * (y2, -y1, 0)
    rho = np.linalg.norm(y, axis=1)
    amp = 0.5 * k / r * (r - rho)
    Jy = np.stack([y[:, 1], -y[:, 0], np.zeros(len(y))], axis=1)
    v = amp[:, None] * Jy
    with np.errstate(invalid="ignore", divide="ignore"):
        damp = np.where(rho[:, None] > 0, -0.5 * k / r * y / rho[:, None], 0.0)
    # the rotation part of grad v is skew, so only Jy (x) grad(amp) survives in D
    G = np.einsum("ni,nj->nij", Jy, damp)
    D = 0.5 * (G + np.swapaxes(G, 1, 2))
    return v, D


def exact_3d_field(cfg: Counterexample3D, x, N: int | None = None, p: float | None = None) -> FieldValues:
    """``vbar^N``, its symmetric gradient and the weight ``mu`` at ``x``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    N = cfg.N if N is None else int(N)
    p = cfg.p if p is None else float(p)
    v = np.zeros_like(x)
    D = np.zeros((len(x), 3, 3))
    ball = cfg.ball_index(x)
    for k in range(1, min(N, cfg.N)):
        sel = ball == k
        if not sel.any():
            continue
        vk, Dk = _vortex(k, cfg.radius(k), x[sel] - cfg.center(k))
        v[sel], D[sel] = vk, Dk
    nD = np.sqrt(np.einsum("nij,nij->n", D, D))
    mu = (cfg.delta + nD) ** (p - 2.0)
    return FieldValues(v, D, mu, ball)


def divergence_fd(cfg: Counterexample3D, x, h: float = 1e-6, N: int | None = None) -> np.ndarray:
    """Central-difference divergence of ``vbar^N``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    out = np.zeros(len(x))
    for j in range(3):
        e = np.zeros(3)
        e[j] = h
        out += (exact_3d_field(cfg, x + e, N).v[:, j] - exact_3d_field(cfg, x - e, N).v[:, j]) / (2 * h)
    return out


@dataclass(frozen=True)
class AnchorPoints:
    q0: np.ndarray
    points: list
    N: list
    balls: list


def _cell_points(mesh: Mesh, rule: QuadRule, cells=None):
    cells = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
    X = mesh.vertices[mesh.cells[cells]]
    pts = np.einsum("qa,cad->cqd", rule.barycentric, X)
    w = mesh.det[cells, None] * rule.weights[None, :]
    return pts, w


def locate_anchor_points(chain: list[Mesh], rule: QuadRule | None = None) -> AnchorPoints:
    """Keast point closest to ``e1`` on each level and its minimal truncation.

    On the coarsest level only cell 0 (the Kuhn tetrahedron ``K0``) is
    searched. Ties are broken towards the lexicographically smallest point.
    """
    rule = rule or cell_rule(3)
    pts_all = []
    for level, mesh in enumerate(chain):
        cells = [0] if level == 0 else None
        pts, _ = _cell_points(mesh, rule, cells)
        pts = pts.reshape(-1, 3)
        dist = np.linalg.norm(pts - _E1, axis=1)
        close = pts[dist <= dist.min() * (1 + 1e-12)]
        if level > 0:
            # stay on the ray through q0; off-ray ties sit in neighbouring cells
            u = (pts_all[0] - _E1) / np.linalg.norm(pts_all[0] - _E1)
            y = close - _E1
            off = np.linalg.norm(y - np.outer(y @ u, u), axis=1)
            close = close[off <= off.min() + 1e-14]
        order = np.lexsort(close.T[::-1])
        pts_all.append(close[order[0]])
    q0 = pts_all[0]
    cfg = Counterexample3D(tuple(q0), N=len(chain) + 8)
    balls = [int(cfg.ball_index(q)[0]) for q in pts_all]
    Ns = [cfg.minimal_truncation(q) for q in pts_all]
    return AnchorPoints(q0, pts_all, Ns, balls)


@dataclass(frozen=True)
class DiagnosticRow:
    level: int
    N: int
    ball: int
    n_points: int
    weight_sum: float
    int_mu: float
    int_mu_inv: float
    E: float
    resolved: bool

    @property
    def normalized(self) -> float:
        return self.E / self.weight_sum**2 if self.resolved else float("nan")


def muckenhoupt_diagnostic(chain: list[Mesh], p: float = 3.0, delta: float = 1e-5, rule: QuadRule | None = None,
                           weight=None) -> list[DiagnosticRow]:
    """Discrete A_2 products over the vortex ball that contains the anchor point.

    For every level the discrete measure collects the Keast points of all
    cells inside the ball with their mapped weights. ``weight`` overrides the
    viscosity weight (a callable of the points), which is handy for checks.
    """
    rule = rule or cell_rule(3)
    anchors = locate_anchor_points(chain, rule)
    cfg = Counterexample3D(tuple(anchors.q0), N=len(chain) + 8, delta=delta, p=p)
    rows = []
    for level, mesh in enumerate(chain):
        k = anchors.balls[level]
        c, r = cfg.center(k), cfg.radius(k)
        near = np.flatnonzero(np.linalg.norm(mesh.barycenters - c, axis=1) <= r + mesh.diameters.max())
        pts, w = _cell_points(mesh, rule, near)
        pts, w = pts.reshape(-1, 3), w.reshape(-1)
        inside = np.linalg.norm(pts - c, axis=1) <= r
        pts, w = pts[inside], w[inside]
        if len(w) == 0:
            rows.append(DiagnosticRow(level, anchors.N[level], k, 0, 0.0, np.nan, np.nan, np.nan, False))
            continue
        mu = weight(pts) if weight is not None else exact_3d_field(cfg, pts, N=anchors.N[level], p=p).mu
        a, b = float(np.dot(w, mu)), float(np.dot(w, 1.0 / mu))
        rows.append(DiagnosticRow(level, anchors.N[level], k, len(w), float(w.sum()), a, b, a * b, True))
    return rows
