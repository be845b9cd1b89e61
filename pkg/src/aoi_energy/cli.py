"""Command-line entry point: ``aoi-energy <subcommand>``.

Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .analysis import evaluate_policy
from .channel import watt_to_dbw
from .cmdp import ConfigError
from .experiments import ExperimentSpec, export_policy_heatmap, load_config, run_sweep
from .oracle import evaluate_all, oracle_solve
from .simulator import baseline_generation, baseline_retransmission, simulate, simulate_replicas
from .solver import ConvergenceError, MonotonicityError, solve_cmdp, write_trace_csv

log = logging.getLogger("aoi_energy")

FIXTURES = {"small": (2, 2, 6), "medium": (4, 2, 5)}
ORACLE_BUDGETS = (0.2, 0.5, 1.0, 2.0)


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="INI config file (defaults: K=128, M=4, delta_max=100, -3 dBw)")
    p.add_argument("--out", help="output path")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicas", type=int)
    p.add_argument("--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="aoi-energy", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve the constrained problem for the configured system")
    _common(p)
    p.add_argument("--trace-out", help="write bisection/value-iteration trace CSV")

    p = sub.add_parser("simulate", help="Monte Carlo simulation of a policy")
    _common(p)
    p.add_argument("--policy", choices=["optimal", "retransmission", "generation"], default="optimal")
    p.add_argument("--horizon", type=int, default=10**6)
    p.add_argument("--trace-out", help="per-slot trace CSV of the first replica")
    p.add_argument("--truncate", action="store_true", help="wrap ages beyond delta_max like the solver")

    p = sub.add_parser("sweep", help="run the configured parameter sweep to CSV")
    _common(p)
    p.add_argument("--workers", type=int)
    p.add_argument("--no-resume", action="store_true")

    p = sub.add_parser("policy-dump", help="write the optimal policy table with stationary probabilities")
    _common(p)

    p = sub.add_parser("oracle-check", help="compare solver and brute-force oracle on tiny fixtures")
    _common(p)
    p.add_argument("--fixture", choices=[*FIXTURES, "all"], default="all")
    return parser


def _spec(args) -> ExperimentSpec:
    spec = load_config(args.config) if args.config else ExperimentSpec()
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.replicas is not None:
        changes["replicas"] = args.replicas
    if getattr(args, "workers", None):
        changes["workers"] = args.workers
    if changes:
        from dataclasses import replace

        spec = replace(spec, **changes)
    return spec


def _solve(args, spec):
    model, cfg = spec.channel(), spec.system
    sol = solve_cmdp(model, cfg)
    m = sol.mixed
    print(f"c_max = {cfg.c_max:.6g} W ({watt_to_dbw(cfg.c_max):.3f} dBw), P_s = {cfg.p_s:.6g} W")
    print(f"eta in [{sol.eta_minus:.9g}, {sol.eta_plus:.9g}], xi = {sol.xi:.6f}")
    print(f"age = {m.avg_age:.6f}  transmit = {m.avg_transmit_power:.6f} W  "
          f"total = {m.avg_total_power:.6f} W  efficiency = {m.energy_efficiency:.6f}")
    print(f"objective = {sol.objective(cfg.omega):.6f}")
    if args.trace_out:
        write_trace_csv(sol, args.trace_out)
    if args.out:
        export_policy_heatmap(sol, args.out)
    return 0


def _simulate(args, spec):
    model, cfg = spec.channel(), spec.system
    if args.policy == "optimal":
        pol = solve_cmdp(model, cfg).mixed_policy()
        analytic = None
    else:
        make = baseline_retransmission if args.policy == "retransmission" else baseline_generation
        pol = make(cfg.c_max, model, cfg, quantized=spec.baseline_quantized)
        analytic = evaluate_policy(pol, cfg)[0]
    seeds = [spec.seed + i for i in range(spec.replicas)]
    summary = simulate_replicas(pol, cfg, args.horizon, seeds, truncate=args.truncate)
    for k, v in summary.mean.items():
        print(f"{k} = {v:.6f} +- {summary.stderr[k]:.6f}")
    if analytic is not None:
        print(f"analytic age = {analytic.avg_age:.6f}  efficiency = {analytic.energy_efficiency:.6f}")
    if args.trace_out:
        run = simulate(pol, cfg, args.horizon, seeds[0], truncate=args.truncate, trace=True)
        run.trace.to_csv(args.trace_out)
    return 0


def _sweep(args, spec):
    rows = run_sweep(spec, output=args.out, resume=not args.no_resume)
    for r in rows:
        print(f"{r['sweep_value']:>8g} {r['policy']:<15} age={r['age']} efficiency={r['efficiency']} {r['status']}")
    return 0


def _dump(args, spec):
    model, cfg = spec.channel(), spec.system
    sol = solve_cmdp(model, cfg)
    export_policy_heatmap(sol, args.out or "policy.csv", cfg, with_pi=True)
    return 0


def _oracle(args, spec):
    from .channel import exponential_gain, quantize_channel
    from .cmdp import SystemConfig

    names = list(FIXTURES) if args.fixture == "all" else [args.fixture]
    worst = 0.0
    gamma = 0.999
    tol = max(1e-4, 5 * (1 - gamma))
    for name in names:
        K, M, D = FIXTURES[name]
        model = quantize_channel(exponential_gain(), K, 1.0)
        ev = evaluate_all(model, SystemConfig(M=M, delta_max=D, c_max=1.0, gamma=gamma))
        for c in ORACLE_BUDGETS:
            cfg = SystemConfig(M=M, delta_max=D, c_max=c, omega=1.0, gamma=gamma)
            o = oracle_solve(model, cfg, evaluated=ev)
            s = solve_cmdp(model, cfg).objective(cfg.omega)
            gap = abs(s - o.objective)
            worst = max(worst, gap)
            print(f"{name} K={K} M={M} delta_max={D} c_max={c}: solver={s:.9f} oracle={o.objective:.9f} gap={gap:.2e}")
    print(f"max gap {worst:.2e} (tolerance {tol:.1e})")
    return 0 if worst <= tol else 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    handlers = {"solve": _solve, "simulate": _simulate, "sweep": _sweep, "policy-dump": _dump, "oracle-check": _oracle}
    try:
        spec = _spec(args)
        return handlers[args.command](args, spec)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except (ConvergenceError, MonotonicityError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
