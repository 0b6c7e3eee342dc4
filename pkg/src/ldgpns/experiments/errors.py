"""Error quantities of a converged state and experimental orders of convergence."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..dg import face_shift
from ..orlicz import conjugate_value, f_transform, frobenius, phi_value, sym
from ..solver import DiscreteState, LDGProblem

__all__ = ["ErrorReport", "EocTable", "QUANTITIES", "error_quantities", "compute_eoc"]

QUANTITIES = ("e_F", "e_jump", "e_q_norm", "e_q_modular")


@dataclass
class ErrorReport:
    level: int
    h: float
    n_dof_v: int
    n_dof_q: int
    newton_iters: int
    e_F: float
    e_jump: float
    e_q_norm: float
    e_q_modular: float

    def __post_init__(self):
        for name in QUANTITIES:
            val = getattr(self, name)
            if not (np.isfinite(val) and val >= 0):
                raise ValueError(f"{name} must be finite and nonnegative, got {val}")

    def as_dict(self) -> dict:
        return asdict(self)


def error_quantities(problem: LDGProblem, state: DiscreteState, case, level: int = 0, newton_iters: int = 0) -> ErrorReport:
    """Velocity, jump and pressure errors against the exact solution of ``case``.

    ``case`` provides ``velocity_gradient(x)`` and ``pressure(x)``; the
    boundary data used by ``problem`` is assumed to be the exact trace, so
    boundary jumps of ``v_h - v`` are the data-shifted jumps.
    """
    spec = problem.spec
    sp_ = problem.space
    d = problem.d
    x = state.to_vector()
    _, _, Gv, _, qq, jv = problem.fields(x)
    pts = sp_.qp.reshape(-1, d)
    W = problem.W
    Dh = sym(Gv)
    Dv = sym(case.velocity_gradient(pts))
    e_F = math.sqrt(float(np.dot(W, frobenius(f_transform(spec, Dh) - f_transform(spec, Dv)) ** 2)))

    a = face_shift(sp_, Dh.reshape(problem.nc, problem.nq, d, d))
    mag = np.linalg.norm(jv, axis=1) / problem.hf
    m_jump = float(np.sum(problem.hf * problem.Wf * phi_value(spec, mag, shift=np.repeat(a, problem.nfq))))
    e_jump = math.sqrt(m_jump)

    dq = np.abs(qq - case.pressure(pts))
    pc = spec.p_conj
    e_q_norm = float(np.dot(W, dq**pc)) ** (1.0 / pc)
    rho = float(np.dot(W, conjugate_value(spec, dq, shift=frobenius(Dv))))
    e_q_modular = math.sqrt(rho)
    return ErrorReport(level, float(problem.mesh.h), problem.n_v, problem.n_q, int(newton_iters),
                       e_F, e_jump, e_q_norm, e_q_modular)


@dataclass
class EocTable:
    """Errors and EOCs per level; ``eoc[name][i]`` is NaN at the first level."""

    reports: list
    eoc: dict = field(default_factory=dict)
    theory: dict = field(default_factory=dict)

    def rows(self) -> list[dict]:
        out = []
        for i, rep in enumerate(self.reports):
            row = rep.as_dict()
            for name in QUANTITIES:
                row["eoc_" + name[2:]] = self.eoc[name][i]
            out.append(row)
        return out

    def final(self, name: str) -> float:
        return self.eoc[name][-1]


def compute_eoc(reports: list[ErrorReport], theory: dict | None = None) -> EocTable:
    """``EOC_i = log(e_i / e_{i-1}) / log(h_i / h_{i-1})`` for every quantity.

    Undefined entries (first level, nonpositive errors) are NaN.
    """
    if len(reports) < 2:
        raise ValueError("at least two levels are needed")
    eoc = {}
    for name in QUANTITIES:
        vals = [float("nan")]
        for prev, cur in zip(reports[:-1], reports[1:]):
            e0, e1 = getattr(prev, name), getattr(cur, name)
            if e0 > 0 and e1 > 0 and cur.h != prev.h:
                vals.append(math.log(e1 / e0) / math.log(cur.h / prev.h))
            else:
                vals.append(float("nan"))
        eoc[name] = vals
    return EocTable(list(reports), eoc, dict(theory or {}))
