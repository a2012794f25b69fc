"""Command-line front end: `cnmpc run` and `cnmpc bench`.

Exit codes: 0 success, 1 usage error, 2 runtime or solver failure,
3 constraint-violation threshold breach under --strict.
"""

from __future__ import annotations

import argparse
import dataclasses
import os
import sys

import numpy as np

from .scenarios import builtin_scenarios, load_scenario
from .simulate import (compute_metrics, run_scenario, solve_time_stats,
                       write_metrics_text, write_solver_csv,
                       write_trajectory_csv)

STRICT_THRESHOLD = 0.1  # meters; worst allowed violation under --strict


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on bad usage; the interface contract wants 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(1)


def _build_parser() -> _Parser:
    parser = _Parser(prog="cnmpc",
                     description="Centralized NMPC fleet control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write logs")
    run.add_argument("--scenario", required=True,
                     help="built-in scenario name or path to a scenario file")
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--out", default="out", help="output directory")
    run.add_argument("--no-noise", action="store_true",
                     help="disable state noise regardless of the scenario")
    run.add_argument("--penalty-iters", type=int, default=None,
                     help="override the number of penalty rounds")
    run.add_argument("--strict", action="store_true",
                     help=f"exit 3 if any violation exceeds "
                          f"{STRICT_THRESHOLD} m")

    bench = sub.add_parser("bench", help="solver-time sweep over fleet sizes")
    bench.add_argument("--agents", default="2..9",
                       help="fleet size range A..B or a single size")
    bench.add_argument("--trials", type=int, default=1)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--out", default="out")
    bench.add_argument("--duration", type=float, default=None,
                       help="shorten or extend each benchmark episode [s]")
    return parser


def _resolve_scenario(spec: str):
    scenarios = builtin_scenarios()
    if spec in scenarios:
        return scenarios[spec]
    if os.path.exists(spec):
        return load_scenario(spec)
    return None


def _cmd_run(args) -> int:
    scenario = _resolve_scenario(args.scenario)
    if scenario is None:
        sys.stderr.write(
            f"cnmpc: error: unknown scenario {args.scenario!r}; built-ins: "
            f"{', '.join(sorted(builtin_scenarios()))}\n")
        return 1
    if args.penalty_iters is not None:
        overrides = {**scenario.controller_overrides,
                     "penalty_outer_iterations": args.penalty_iters}
        scenario = dataclasses.replace(scenario,
                                       controller_overrides=overrides)
    noise = dataclasses.replace(scenario.noise, enabled=False) \
        if args.no_noise else None

    try:
        log = run_scenario(scenario, seed=args.seed, noise=noise)
    except Exception as exc:  # malformed scenario, dimension errors, ...
        sys.stderr.write(f"cnmpc: run failed: {exc}\n")
        return 2

    os.makedirs(args.out, exist_ok=True)
    metrics = compute_metrics(log)
    write_trajectory_csv(log, os.path.join(args.out, "trajectory.csv"))
    write_solver_csv(log, os.path.join(args.out, "solver.csv"))
    write_metrics_text(metrics, log, os.path.join(args.out, "metrics.txt"))

    timing = solve_time_stats(log)
    print(f"scenario {scenario.name}: {log.steps} steps, "
          f"{log.n_agents} agents, seed {log.seed}")
    print(f"solve time ms (after first step): mean {timing['mean_ms']:.3f} "
          f"max {timing['max_ms']:.3f} min {timing['min_ms']:.3f}")
    print(f"max safety violation: {metrics.max_safety_violation:.4f} m")
    print(f"max obstacle violation: {metrics.max_obstacle_violation:.4f} m")
    print(f"max final position error: "
          f"{metrics.max_final_position_error:.4f} m")
    if log.aborted:
        print(f"solver aborts on {len(log.aborts)} steps")
    print(f"logs written to {args.out}")

    if log.aborted:
        return 2
    worst = max(metrics.max_safety_violation, metrics.max_obstacle_violation)
    if args.strict and worst > STRICT_THRESHOLD:
        sys.stderr.write(
            f"cnmpc: strict mode: violation {worst:.4f} m exceeds "
            f"{STRICT_THRESHOLD} m\n")
        return 3
    return 0


def _parse_agent_range(text: str) -> list | None:
    try:
        if ".." in text:
            lo, hi = text.split("..", 1)
            counts = list(range(int(lo), int(hi) + 1))
        else:
            counts = [int(text)]
    except ValueError:
        return None
    if not counts or counts[0] < 1:
        return None
    return counts


def _cmd_bench(args) -> int:
    counts = _parse_agent_range(args.agents)
    if counts is None:
        sys.stderr.write(f"cnmpc: error: bad --agents value {args.agents!r}; "
                         f"expected A..B or a single count\n")
        return 1
    if args.trials < 1:
        sys.stderr.write("cnmpc: error: --trials must be >= 1\n")
        return 1
    scenarios = builtin_scenarios()
    missing = [n for n in counts if f"scaling_{n}" not in scenarios]
    if missing:
        sys.stderr.write(f"cnmpc: error: no scaling scenario for fleet "
                         f"sizes {missing}\n")
        return 1

    os.makedirs(args.out, exist_ok=True)
    header = (f"{'n_agents':>8} {'mean_ms':>10} {'max_ms':>10} "
              f"{'min_ms':>10} {'safety_viol_m':>14} {'obstacle_viol_m':>16}")
    print(header)
    rows = []
    any_abort = False
    for n in counts:
        scenario = scenarios[f"scaling_{n}"]
        if args.duration is not None:
            scenario = dataclasses.replace(scenario, duration=args.duration)
        pooled = []
        safety = 0.0
        obstacle = 0.0
        for trial in range(args.trials):
            log = run_scenario(scenario, seed=args.seed + trial)
            any_abort = any_abort or log.aborted
            ms = log.solve_ms[1:] if log.steps > 1 else log.solve_ms
            pooled.append(ms[~np.isnan(ms)])
            metrics = compute_metrics(log)
            safety = max(safety, metrics.max_safety_violation)
            obstacle = max(obstacle, metrics.max_obstacle_violation)
        ms = np.concatenate(pooled)
        row = (n, float(np.mean(ms)), float(np.max(ms)), float(np.min(ms)),
               safety, obstacle)
        rows.append(row)
        print(f"{row[0]:>8} {row[1]:>10.3f} {row[2]:>10.3f} {row[3]:>10.3f} "
              f"{row[4]:>14.5f} {row[5]:>16.5f}")

    path = os.path.join(args.out, "bench.csv")
    with open(path, "w") as fh:
        fh.write("n_agents,mean_ms,max_ms,min_ms,"
                 "max_safety_violation_m,max_obstacle_violation_m\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v)
                              for v in row) + "\n")
    print(f"summary written to {path}")
    return 2 if any_abort else 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if args.command == "run":
        return _cmd_run(args)
    return _cmd_bench(args)


if __name__ == "__main__":
    sys.exit(main())
