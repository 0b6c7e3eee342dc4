"""Command line entry point: ``ldgpns convergence | diagnostic-a2 | verify``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

DEFAULTS = {
    "p": 2.5,
    "case": 2,
    "levels": 5,
    "alpha": 2.5,
    "delta": 1e-5,
    "mu0": 0.5,
    "dim": 2,
    "output": None,
    "format": "csv",
}
_TYPES = {"p": float, "case": int, "levels": int, "alpha": float, "delta": float, "mu0": float, "dim": int,
          "output": str, "format": str}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in _TYPES:
            raise ValueError(f"{path}:{lineno}: unknown key {key!r}")
        out[key] = _TYPES[key](val)
    return out


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file; flags override it")
    common.add_argument("--p", type=float)
    common.add_argument("--case", type=int, choices=(1, 2))
    common.add_argument("--levels", type=int, help="finest refinement level (levels 0..L are run)")
    common.add_argument("--alpha", type=float)
    common.add_argument("--delta", type=float)
    common.add_argument("--mu0", type=float)
    common.add_argument("--dim", type=int, choices=(2, 3))
    common.add_argument("--output", help="write the table here instead of stdout")
    common.add_argument("--format", choices=("csv", "md"))
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="ldgpns", description="LDG p-Navier-Stokes experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("convergence", parents=[common], help="2D manufactured-solution EOC study")
    sub.add_parser("diagnostic-a2", parents=[common], help="discrete A_2 products of the 3D vortex weight")
    sub.add_parser("verify", parents=[common], help="quick self-checks")
    return parser


def resolve_options(args: argparse.Namespace) -> dict:
    opts = dict(DEFAULTS)
    if args.command == "diagnostic-a2":
        opts.update(p=3.0, levels=4, dim=3)
    if args.config:
        opts.update(read_config(args.config))
    for key in DEFAULTS:
        val = getattr(args, key, None)
        if val is not None:
            opts[key] = val
    return opts


def _emit(text: str, output):
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_convergence(opts) -> int:
    from .study import format_convergence, run_convergence

    if opts["dim"] != 2:
        raise SystemExit("convergence studies are two-dimensional only")
    res = run_convergence(opts["p"], opts["case"], opts["levels"], alpha=opts["alpha"], delta=opts["delta"],
                          mu0=opts["mu0"])
    _emit(format_convergence(res, opts["format"]), opts["output"])
    return 0 if res.converged else 2


def cmd_diagnostic(opts) -> int:
    from .study import format_diagnostic, run_diagnostic

    if opts["dim"] != 3:
        raise SystemExit("the A_2 diagnostic lives on the 3D Kuhn chain (use --dim 3)")
    rows = run_diagnostic(opts["p"], opts["levels"], delta=opts["delta"])
    _emit(format_diagnostic(rows, opts["format"]), opts["output"])
    return 0


def _checks():
    from ..dg import DGSpace, average, continuous_p1_field, dg_gradient, jump_normal, lifting, modular_domain, modular_full
    from ..mesh import mesh_chain
    from ..orlicz import NFunctionSpec, conjugate_value, phi_prime, phi_value
    from ..quadrature import cell_rule, verify_exactness
    from ..solver import LDGProblem, SolverConfig, newton_solve
    from .counterexample import locate_anchor_points

    rng = np.random.default_rng(0)

    def legendre():
        worst = 0.0
        for p in (2.25, 2.5, 3.0, 3.5):
            spec = NFunctionSpec(p, 1e-5)
            t, a = rng.uniform(0, 10, 500), rng.uniform(0, 10, 500)
            lhs = conjugate_value(spec, phi_prime(spec, t, a), a)
            rhs = t * phi_prime(spec, t, a) - phi_value(spec, t, a)
            worst = max(worst, float(np.max(np.abs(lhs - rhs) / np.maximum(np.abs(rhs), 1e-300))))
        return worst <= 1e-10, f"max rel {worst:.1e}"

    def quadrature():
        errs = [verify_exactness(cell_rule(d), 6)["max_rel_error"] for d in (2, 3)]
        return max(errs) <= 1e-13, f"max rel {max(errs):.1e}"

    def adjoint():
        S = DGSpace(mesh_chain(2, 1)[-1])
        w = S.from_vector(rng.standard_normal(S.n_dofs((2,))), (2,))
        X = S.from_vector(rng.standard_normal(S.n_dofs((2, 2))), (2, 2))
        lhs = np.sum(S.w[..., None, None] * lifting(w).at_qp() * X.at_qp())
        rhs = np.sum(S.fw[..., None, None] * jump_normal(w) * average(X))
        return abs(lhs - rhs) <= 1e-11, f"gap {abs(lhs - rhs):.1e}"

    def reduction():
        S = DGSpace(mesh_chain(2, 2)[-1])
        w = continuous_p1_field(S, rng)
        G = dg_gradient(w).at_qp()
        err = float(np.abs(G - w.broken_gradient_at_qp()).max())
        mod = modular_full(NFunctionSpec(2.5, 1e-5), w) - modular_domain(
            NFunctionSpec(2.5, 1e-5), S, w.broken_gradient_at_qp(), rank=2)
        return err <= 1e-12 and abs(mod) <= 1e-12, f"gradient gap {err:.1e}, jump modular {mod:.1e}"

    def anchors():
        a = locate_anchor_points(mesh_chain(3, 1))
        return a.N[:2] == [4, 5], f"N = {a.N[:2]}"

    def stokes():
        m = mesh_chain(2, 1)[-1]
        f = lambda x: np.stack([np.sin(np.pi * x[:, 1]), np.cos(np.pi * x[:, 0])], axis=1)
        _, rep = newton_solve(LDGProblem(m, SolverConfig(p=2.0, delta=0.0, convection=False), f))
        return rep.iterations == 1, f"{rep.iterations} Newton step(s)"

    return [("legendre identity", legendre), ("quadrature exactness", quadrature), ("lifting adjointness", adjoint),
            ("operator reduction", reduction), ("anchor truncations", anchors), ("linear Stokes solve", stokes)]


def cmd_verify(opts) -> int:
    failed = 0
    for name, check in _checks():
        ok, msg = check()
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}: {msg}")
    return 1 if failed else 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    opts = resolve_options(args)
    handler = {"convergence": cmd_convergence, "diagnostic-a2": cmd_diagnostic, "verify": cmd_verify}[args.command]
    return handler(opts)


if __name__ == "__main__":
    sys.exit(main())
