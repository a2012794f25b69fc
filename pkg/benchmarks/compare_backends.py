"""Timing comparison of the compiled and pure-NumPy kernel backends.

Times the three hot kernels (rollout, constraint stacking, penalized
cost/gradient) and one full NMPC control step under each available
backend, then prints a table with the speedup of the compiled core.

Usage: python3 benchmarks/compare_backends.py [--agents 4] [--horizon 30]
       [--repeats 200]
"""

import argparse
import time

import numpy as np

from cnmpc import kernels
from cnmpc.controller import ControllerConfig, nmpc_step
from cnmpc.problem import (CylinderObstacle, ProblemInstance,
                           assemble_constraints, hover_decision,
                           penalized_cost_and_gradient, reshape_decision)


def build_instance(n_agents: int, horizon: int) -> ProblemInstance:
    rng = np.random.default_rng(7)
    initial = rng.normal(0.0, 0.8, (n_agents, 8))
    initial[:, 2] += 1.8
    references = rng.normal(0.0, 1.2, (n_agents, 8))
    references[:, 2] += 1.5
    inst = ProblemInstance(
        initial=initial,
        prev_input=np.tile([9.82, 0.0, 0.0], (n_agents, 1)),
        references=references, horizon=horizon, dt=0.05,
        obstacles=(CylinderObstacle(center=(0.0, 0.0, 2.0), radius=0.8,
                                    height=4.0),))
    return inst


def time_us(fn, repeats: int) -> float:
    fn()  # warm up and fault in any lazy setup
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn()
    return (time.perf_counter() - t0) / repeats * 1e6


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--agents", type=int, default=4)
    parser.add_argument("--horizon", type=int, default=30)
    parser.add_argument("--repeats", type=int, default=200)
    args = parser.parse_args()

    inst = build_instance(args.agents, args.horizon)
    rng = np.random.default_rng(11)
    z = hover_decision(args.agents, args.horizon, inst.params)
    z = z + 0.2 * rng.standard_normal(z.size)
    u = reshape_decision(z, args.agents, args.horizon)
    model = inst.params.as_array()
    config = ControllerConfig(horizon=args.horizon)

    cases = {
        "rollout": lambda: kernels.rollout(inst.initial, u, inst.dt, model),
        "constraint stack": lambda: assemble_constraints(z, inst),
        "penalized cost+gradient":
            lambda: penalized_cost_and_gradient(z, inst, 100.0),
        "one NMPC control step":
            lambda: nmpc_step(inst.initial, inst.references, inst.obstacles,
                              inst.prev_input, None, config),
    }
    step_repeats = max(1, args.repeats // 50)

    backends = sorted(kernels.available_backends())
    previous = kernels.backend()
    results = {}
    try:
        for name in backends:
            kernels.set_backend(name)
            results[name] = {
                label: time_us(fn, step_repeats if "NMPC" in label
                               else args.repeats)
                for label, fn in cases.items()
            }
    finally:
        kernels.set_backend(previous)

    print(f"agents={args.agents} horizon={args.horizon} "
          f"repeats={args.repeats} backends={', '.join(backends)}")
    header = f"{'kernel':<26}" + "".join(f"{b + ' [us]':>16}" for b in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    for label in cases:
        row = f"{label:<26}"
        for b in backends:
            row += f"{results[b][label]:>16.1f}"
        if len(backends) == 2:
            slow, fast = (results[b][label] for b in backends)
            if "cython" in backends[0]:
                fast, slow = slow, fast
            row += f"{slow / fast:>9.1f}x"
        print(row)
    if len(backends) < 2:
        print("only one backend available; install with the compiled "
              "extension to compare")


if __name__ == "__main__":
    main()
