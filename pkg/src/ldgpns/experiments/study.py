"""Convergence studies over a refinement chain and table formatting."""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

from ..mesh import mesh_chain
from ..solver import LDGProblem, NewtonConvergenceError, SolverConfig, continuation_initial_guess, newton_solve
from .counterexample import DiagnosticRow, muckenhoupt_diagnostic
from .errors import QUANTITIES, EocTable, compute_eoc, error_quantities
from .manufactured import ManufacturedCase2D

__all__ = [
    "CONVERGENCE_COLUMNS",
    "StudyResult",
    "run_convergence",
    "run_diagnostic",
    "format_convergence",
    "format_diagnostic",
]

log = logging.getLogger(__name__)

CONVERGENCE_COLUMNS = [
    "level", "h", "n_dof_v", "n_dof_q", "newton_iters",
    "e_F", "e_jump", "e_q_norm", "e_q_modular",
    "eoc_F", "eoc_jump", "eoc_q_norm", "eoc_q_modular",
]


@dataclass
class StudyResult:
    case: ManufacturedCase2D
    config: SolverConfig
    table: EocTable | None
    reports: list = field(default_factory=list)
    newton: list = field(default_factory=list)
    failed_level: int | None = None

    @property
    def converged(self) -> bool:
        return self.failed_level is None


def run_convergence(p: float, case_id: int, levels: int, alpha: float = 2.5, delta: float = 1e-5,
                    mu0: float = 0.5, **solver_kw) -> StudyResult:
    """Solve the manufactured problem on levels ``0..levels`` with continuation."""
    case = ManufacturedCase2D(p=p, case_id=case_id, delta=delta, mu0=mu0)
    cfg = SolverConfig(p=p, delta=delta, mu0=mu0, alpha=alpha, **solver_kw)
    result = StudyResult(case, cfg, None)
    spaces, states = [], []
    for level, mesh in enumerate(mesh_chain(2, levels)):
        problem = LDGProblem(mesh, cfg, case.forcing, case.velocity)
        spaces.append(problem.space)
        guess = continuation_initial_guess(spaces, states)
        try:
            state, report = newton_solve(problem, guess)
        except NewtonConvergenceError as exc:
            result.failed_level = level
            result.newton.append(exc.report)
            log.warning("level %d: %s", level, exc)
            break
        states.append(state)
        result.newton.append(report)
        rep = error_quantities(problem, state, case, level, report.iterations)
        result.reports.append(rep)
        log.info("level %d: %d Newton steps, e_q_modular=%.3e", level, report.iterations, rep.e_q_modular)
    if len(result.reports) >= 2:
        result.table = compute_eoc(result.reports, {"e_q_modular": case.theory_rate})
    return result


def run_diagnostic(p: float, levels: int, delta: float = 1e-5) -> list[DiagnosticRow]:
    return muckenhoupt_diagnostic(mesh_chain(3, levels), p=p, delta=delta)


def _cell(value, fmt="{:.6e}"):
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    if isinstance(value, int):
        return str(value)
    return fmt.format(value)


def _convergence_rows(result: StudyResult) -> list[dict]:
    if result.table is not None:
        return result.table.rows()
    rows = []
    for rep in result.reports:
        row = rep.as_dict()
        for name in QUANTITIES:
            row["eoc_" + name[2:]] = float("nan")
        rows.append(row)
    return rows


def format_convergence(result: StudyResult, fmt: str = "csv") -> str:
    """CSV with the fixed column set, or a markdown table with a theory row."""
    rows = _convergence_rows(result)
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CONVERGENCE_COLUMNS)
        for row in rows:
            w.writerow([_cell(row[c], "{:.3f}" if c.startswith("eoc") else "{:.6e}") for c in CONVERGENCE_COLUMNS])
        if not result.converged:
            buf.write(f"# NOT CONVERGED at level {result.failed_level}\n")
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    c, cfg = result.case, result.config
    buf.write(f"case {c.case_id}, p = {c.p}, delta = {cfg.delta:g}, mu0 = {cfg.mu0:g}, alpha = {cfg.alpha:g}\n\n")
    buf.write("| " + " | ".join(CONVERGENCE_COLUMNS) + " |\n")
    buf.write("|" + "---|" * len(CONVERGENCE_COLUMNS) + "\n")
    for row in rows:
        buf.write("| " + " | ".join(_cell(row[k], "{:.3f}" if k.startswith("eoc") else "{:.3e}")
                                     for k in CONVERGENCE_COLUMNS) + " |\n")
    theory = ["theory"] + [""] * (len(CONVERGENCE_COLUMNS) - 2) + [f"{c.theory_rate:.3f}"]
    buf.write("| " + " | ".join(theory) + " |\n")
    if not result.converged:
        buf.write(f"\nNOT CONVERGED at level {result.failed_level}\n")
    return buf.getvalue()


DIAGNOSTIC_COLUMNS = ["level", "N", "ball", "n_points", "weight_sum", "int_mu", "int_mu_inv", "E", "E_normalized", "resolved"]


def format_diagnostic(rows: list[DiagnosticRow], fmt: str = "csv") -> str:
    recs = []
    for r in rows:
        recs.append([str(r.level), str(r.N), str(r.ball), str(r.n_points), _cell(r.weight_sum), _cell(r.int_mu),
                     _cell(r.int_mu_inv), _cell(r.E), _cell(r.normalized), str(r.resolved).lower()])
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(DIAGNOSTIC_COLUMNS)
        w.writerows(recs)
        return buf.getvalue()
    if fmt != "md":
        raise ValueError(f"unknown format {fmt!r}")
    buf.write("| " + " | ".join(DIAGNOSTIC_COLUMNS) + " |\n")
    buf.write("|" + "---|" * len(DIAGNOSTIC_COLUMNS) + "\n")
    for rec in recs:
        buf.write("| " + " | ".join(rec) + " |\n")
    return buf.getvalue()
