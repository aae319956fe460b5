"""Command-line entry point: ``fwdegd {run,table1,oracle-check,sweep} FILE``.

Outputs go to ``--out`` when given, otherwise to the experiment file's
``[output] directory`` resolved against ``$FWDEGD_OUT_ROOT`` (default: the
current directory).
"""
from __future__ import annotations

import argparse
import math
import os
import sys
from typing import Optional, Sequence

import numpy as np

from . import __version__
from .config import ExperimentConfig, load_config
from .diagnostics import rate_table
from .dynamics import run_simulation, run_sweep
from .errors import ConfigError, FwdEgdError, NoSolution
from .grid import Grid1D
from .hjb import HjbParams, LambdaWeights, solve_eta_logit, solve_hjb_quadratic, eta_logit_bisection
from .oracles import quadratic_reference_solve, random_logit_instance, random_quadratic_instance
from .output import (SUMMARY_COLUMNS, summary_row, write_density_csv, write_eta_csv, write_rows,
                     write_summary_csv, write_table1_csv)
from .utility import eval_utility

OUT_ROOT_ENV = "FWDEGD_OUT_ROOT"
ORACLE_TOL = 1e-8
EXACT_TOL = 1e-12
ORACLE_SEED = 20240607

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


class _Console:
    def __init__(self, quiet: bool):
        self.quiet = quiet

    def __call__(self, msg: str = "") -> None:
        if not self.quiet:
            print(msg)


def _out_dir(args, cfg: ExperimentConfig) -> str:
    if args.out:
        return args.out
    return os.path.join(os.environ.get(OUT_ROOT_ENV, "."), cfg.output_dir)


def _write_run(directory: str, prefix: str, result) -> None:
    write_density_csv(os.path.join(directory, prefix + "density.csv"), result)
    write_eta_csv(os.path.join(directory, prefix + "eta.csv"), result)
    write_summary_csv(os.path.join(directory, prefix + "summary.csv"), result)


def _describe(say, result) -> None:
    last = result.samples[-1]
    state = "stationary" if result.stationary else "not stationary"
    say(f"{result.config.protocol.label}: {result.steps_taken} steps, t = {result.t_final:g} ({state})")
    say(f"  mean action {last.mean_action:.10f}  eta {last.eta:.10g}  nash gap {last.nash_gap:.3e}")


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = load_config(args.config)
    say = _Console(args.quiet)
    result = run_simulation(cfg.sim)
    out = _out_dir(args, cfg)
    _write_run(out, cfg.prefix, result)
    _describe(say, result)
    say(f"wrote {out}")
    return EXIT_OK


def cmd_table1(args) -> int:
    cfg = load_config(args.config)
    say = _Console(args.quiet)
    epsilons, reference = cfg.table1
    if args.reference is not None:
        reference = args.reference
    configs = [cfg.with_value("hjb.epsilon", e).sim for e in epsilons]
    results = run_sweep(configs, args.jobs)
    rows = rate_table(epsilons, [r.samples[-1].mean_action for r in results], reference)
    out = _out_dir(args, cfg)
    write_table1_csv(os.path.join(out, cfg.prefix + "table1.csv"), rows)
    say(f"{'I':>2}  {'epsilon':>8}  {'average':>12}  {'error':>10}  rate")
    for r, res in zip(rows, results):
        rate = "" if r.rate is None else f"{r.rate:.3f}"
        flag = "" if res.stationary else "  (not stationary)"
        say(f"{r.level:>2}  {r.epsilon:8.3f}  {r.mean:12.8f}  {r.error:10.3e}  {rate}{flag}")
    say(f"wrote {out}")
    return EXIT_OK


def _value_label(v: float) -> str:
    return repr(int(v)) if float(v).is_integer() else repr(float(v))


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    say = _Console(args.quiet)
    if cfg.sweep is None:
        raise ConfigError("sweep needs a [sweep] section")
    param, values = cfg.sweep
    configs = [cfg.with_value(param, v).sim for v in values]
    results = run_sweep(configs, args.jobs)
    out = _out_dir(args, cfg)
    key = param.split(".")[1]
    rows = []
    for v, res in zip(values, results):
        _write_run(os.path.join(out, f"{key}_{_value_label(v)}"), cfg.prefix, res)
        rows.append((float(v),) + summary_row(res))
        say(f"{param} = {_value_label(v)}")
        _describe(say, res)
    write_rows(os.path.join(out, cfg.prefix + "summary.csv"), (key,) + SUMMARY_COLUMNS, rows)
    say(f"wrote {out}")
    return EXIT_OK


def _oracle_checks(cfg: ExperimentConfig):
    """Yield ``(name, discrepancy, tolerance)`` for every oracle comparison."""
    sim = cfg.sim
    u = eval_utility(sim.utility, sim.grid, sim.initial_density())
    if sim.protocol.kind == "logit":
        try:
            a = solve_eta_logit(u, sim.hjb, sim.grid)
        except NoSolution:
            a = None
        try:
            b = eta_logit_bisection(u, sim.hjb, sim.grid)
        except NoSolution:
            b = None
        if (a is None) != (b is None):
            yield "configured instance: solvability disagrees", math.inf, ORACLE_TOL
        elif a is not None:
            yield "configured instance: logit fixed point vs bisection eta", abs(a - b), ORACLE_TOL
    else:
        lam = LambdaWeights.mix(sim.initial_density().masses, sim.protocol.w)
        s = solve_hjb_quadratic(u, lam, sim.hjb)
        phi, eta = quadratic_reference_solve(u, lam, sim.hjb)
        d = max(float(np.max(np.abs(s.phi - phi))), abs(s.eta - eta))
        yield "configured instance: quadratic solver vs ordered re-solve", d, ORACLE_TOL

    rng = np.random.default_rng(ORACLE_SEED)
    grid = Grid1D(8)
    worst = 0.0
    for _ in range(20):
        u, p, grid, _ = random_logit_instance(rng, n=8)
        worst = max(worst, abs(solve_eta_logit(u, p, grid) - eta_logit_bisection(u, p, grid)))
    yield "20 random N=8 logit instances: logit fixed point vs bisection", worst, ORACLE_TOL

    worst = 0.0
    for _ in range(20):
        u, lam, p = random_quadratic_instance(rng, n=8)
        s = solve_hjb_quadratic(u, lam, p)
        phi, eta = quadratic_reference_solve(u, lam, p)
        worst = max(worst, float(np.max(np.abs(s.phi - phi))), abs(s.eta - eta))
    yield "20 random N=8 quadratic instances: quadratic solver vs ordered re-solve", worst, ORACLE_TOL

    worst = 0.0
    for xi in (0.0, 2.0):
        p = HjbParams(epsilon=0.1, chi=1e-5, xi=xi, tol=1e-15)
        s = solve_hjb_quadratic(np.full(grid.size, 1.5), LambdaWeights(np.full(grid.size, 1 / 8)), p)
        exact = (p.chi / p.epsilon) ** (1.0 / (2.0 + xi))
        worst = max(worst, abs(s.eta - exact), float(np.max(np.abs(s.phi - 1.5))))
    yield "constant-utility quadratic: eta vs (chi/eps)^(1/(2+xi))", worst, EXACT_TOL

    flat = np.full(grid.size, 1.5)
    raised = 0
    for solver in (solve_eta_logit, eta_logit_bisection):
        try:
            solver(flat, HjbParams(), grid)
        except NoSolution:
            raised += 1
    yield "constant-utility logit: both paths report no solution", 0.0 if raised == 2 else math.inf, 0.0


def cmd_oracle_check(args) -> int:
    cfg = load_config(args.config)
    say = _Console(args.quiet)
    failed = []
    for name, d, tol in _oracle_checks(cfg):
        ok = d <= tol
        say(f"{'ok  ' if ok else 'FAIL'}  {d:.3e}  (tol {tol:.0e})  {name}")
        if not ok:
            failed.append(name)
    for name in failed:
        print(f"oracle check failed: {name}", file=sys.stderr)
    return EXIT_OK if not failed else EXIT_FAIL


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("config", help="experiment file (INI)")
    common.add_argument("--out", help=f"output directory (default: [output] directory under ${OUT_ROOT_ENV})")
    common.add_argument("--jobs", type=int, default=1, help="parallel runs for table1/sweep")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    parser = argparse.ArgumentParser(prog="fwdegd", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("run", parents=[common], help="run one simulation").set_defaults(fn=cmd_run)
    t1 = sub.add_parser("table1", parents=[common], help="epsilon sweep with errors and convergence rates")
    t1.add_argument("--reference", type=float, help="reference mean for the error column (default 0.25)")
    t1.set_defaults(fn=cmd_table1)
    sub.add_parser("oracle-check", parents=[common],
                   help="compare the solvers with independent reference solvers").set_defaults(fn=cmd_oracle_check)
    sub.add_parser("sweep", parents=[common], help="run every value of the [sweep] section").set_defaults(fn=cmd_sweep)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FwdEgdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
