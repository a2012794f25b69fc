"""Closed-loop simulation harness, metrics, and CSV logging.

The plant is integrated with the same first-order scheme the controller
predicts with. After every step the new state is observed through seeded
additive Gaussian noise; the controller closes the loop on these noisy
observations and the log records them, while the plant itself propagates
the true state. One noise draw per agent is consumed per step in a fixed
order, so identical (scenario, seed, config) triples reproduce identical
logs bit for bit.

A solver failure mid-run does not kill the episode: the previous input is
held for that step, the failure is recorded, the warm start is dropped,
and the loop continues.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .controller import CnmpcController, ControllerConfig
from .dynamics import step_fleet
from .optimizer import InnerSolverError
from .scenarios import NoiseParams, Scenario, apply_overrides


@dataclass
class SimulationLog:
    scenario: Scenario
    config: ControllerConfig          # resolved, overrides applied
    seed: int
    times: np.ndarray                 # (steps + 1,)
    states: np.ndarray                # (steps + 1, n_agents, 8)
    inputs: np.ndarray                # (steps, n_agents, 3)
    solve_ms: np.ndarray              # (steps,) nan on aborted steps
    inner_iterations: np.ndarray      # (steps,)
    outer_rounds: np.ndarray          # (steps,)
    residuals: np.ndarray             # (steps,)
    infeasibilities: np.ndarray       # (steps,)
    aborts: tuple = ()                # ((step, reason), ...)

    @property
    def n_agents(self) -> int:
        return self.states.shape[1]

    @property
    def steps(self) -> int:
        return self.inputs.shape[0]

    @property
    def aborted(self) -> bool:
        return len(self.aborts) > 0


@dataclass
class Metrics:
    max_safety_violation: float       # meters short of the safety radius
    max_obstacle_violation: float     # meters of cylinder penetration
    min_pairwise_distance: float      # 3D, inf for a single agent
    final_position_errors: np.ndarray  # (n_agents,)
    mean_inner_iterations: float
    mean_outer_rounds: float
    max_infeasibility: float
    aborted_steps: int
    solve_time_mean: float            # seconds, over all solved steps
    solve_time_max: float
    solve_time_min: float

    @property
    def max_final_position_error(self) -> float:
        return float(np.max(self.final_position_errors))


def apply_noise(state: np.ndarray, noise: NoiseParams, rng) -> np.ndarray:
    """Observe one agent's 8-dim state through additive Gaussian noise.

    Draws eight values in state order (px, py, pz, vx, vy, vz, phi, theta)
    from ``rng``; with noise disabled the state is returned unchanged and
    nothing is drawn, keeping the stream aligned for reproducibility.
    """
    state = np.asarray(state, dtype=float)
    if not noise.enabled:
        return state
    return state + rng.standard_normal(8) * noise.stds()


def run_scenario(scenario: Scenario, seed: int = 0,
                 config: ControllerConfig | None = None,
                 noise: NoiseParams | None = None) -> SimulationLog:
    """Simulate one episode under NMPC and return the full log.

    ``config`` is the base controller configuration before the scenario's
    own overrides; ``noise`` replaces the scenario's noise model when given
    (the CLI uses this for --no-noise). The logged states are the noisy
    observations the controller acted on.
    """
    base = config if config is not None else ControllerConfig()
    cfg = apply_overrides(base, scenario.controller_overrides)
    noise_params = noise if noise is not None else scenario.noise
    rng = np.random.default_rng(seed)

    na = scenario.n_agents
    steps = int(round(scenario.duration / cfg.dt))
    if steps < 1:
        raise ValueError("duration shorter than one control step")

    controller = CnmpcController(na, scenario.obstacles, cfg)
    states = np.empty((steps + 1, na, 8))
    inputs = np.empty((steps, na, 3))
    solve_ms = np.full(steps, np.nan)
    inner_iterations = np.zeros(steps, dtype=int)
    outer_rounds = np.zeros(steps, dtype=int)
    residuals = np.full(steps, np.nan)
    infeasibilities = np.full(steps, np.nan)
    aborts = []

    x_true = scenario.initial.copy()
    states[0] = x_true
    for k in range(steps):
        refs = scenario.references_at(k * cfg.dt)
        try:
            t0 = time.perf_counter()
            step = controller.step(states[k], refs)
            solve_ms[k] = (time.perf_counter() - t0) * 1e3
            u = step.inputs
            inner_iterations[k] = step.solve.inner_iterations
            outer_rounds[k] = step.solve.outer_rounds
            residuals[k] = step.solve.residual
            infeasibilities[k] = step.solve.max_infeasibility
        except InnerSolverError as exc:
            # hold the previous input for one step and keep going
            aborts.append((k, str(exc)))
            controller.drop_warm_start()
            u = controller.prev_input.copy()
        inputs[k] = u
        x_true = step_fleet(x_true, u, cfg.params, cfg.dt)
        for a in range(na):
            states[k + 1, a] = apply_noise(x_true[a], noise_params, rng)

    return SimulationLog(
        scenario=scenario, config=cfg, seed=seed,
        times=np.arange(steps + 1) * cfg.dt, states=states, inputs=inputs,
        solve_ms=solve_ms, inner_iterations=inner_iterations,
        outer_rounds=outer_rounds, residuals=residuals,
        infeasibilities=infeasibilities, aborts=tuple(aborts))


def _pairwise_stats(log: SimulationLog) -> tuple[float, float]:
    """Worst safety-radius deficit (within the vertical band) and the
    smallest 3D pairwise distance over the run."""
    collision = log.config.collision
    p = log.states[:, :, :3]
    na = log.n_agents
    worst = 0.0
    closest = np.inf
    for i in range(na):
        for l in range(i + 1, na):
            d = p[:, i] - p[:, l]
            horiz = np.hypot(d[:, 0], d[:, 1])
            dist3 = np.sqrt(horiz ** 2 + d[:, 2] ** 2)
            closest = min(closest, float(np.min(dist3)))
            in_band = np.abs(d[:, 2]) < collision.vertical_margin
            deficit = np.where(in_band, collision.safety_radius - horiz, 0.0)
            worst = max(worst, float(np.max(deficit, initial=0.0)))
    return worst, closest


def _obstacle_stats(log: SimulationLog) -> float:
    """Deepest horizontal penetration into any cylinder while inside its
    vertical extent."""
    p = log.states.reshape(-1, 8)[:, :3]  # every (step, agent) position
    worst = 0.0
    for obs in log.scenario.obstacles:
        cx, cy, cz = obs.center
        half = 0.5 * obs.height
        horiz = np.hypot(p[:, 0] - cx, p[:, 1] - cy)
        inside_band = np.abs(p[:, 2] - cz) < half
        deficit = np.where(inside_band, obs.radius - horiz, 0.0)
        worst = max(worst, float(np.max(deficit, initial=0.0)))
    return worst


def compute_metrics(log: SimulationLog) -> Metrics:
    safety, closest = _pairwise_stats(log)
    final_refs = log.scenario.references_at(log.times[-1])
    errors = np.linalg.norm(log.states[-1, :, :3] - final_refs[:, :3], axis=1)
    solved = ~np.isnan(log.solve_ms)
    infeas = log.infeasibilities[solved]
    ms = log.solve_ms[solved]
    return Metrics(
        max_safety_violation=safety,
        max_obstacle_violation=_obstacle_stats(log),
        min_pairwise_distance=closest,
        final_position_errors=errors,
        mean_inner_iterations=float(np.mean(log.inner_iterations[solved]))
        if solved.any() else 0.0,
        mean_outer_rounds=float(np.mean(log.outer_rounds[solved]))
        if solved.any() else 0.0,
        max_infeasibility=float(np.max(infeas)) if infeas.size else 0.0,
        aborted_steps=len(log.aborts),
        solve_time_mean=float(np.mean(ms)) / 1e3 if ms.size else float("nan"),
        solve_time_max=float(np.max(ms)) / 1e3 if ms.size else float("nan"),
        solve_time_min=float(np.min(ms)) / 1e3 if ms.size else float("nan"))


def solve_time_stats(log: SimulationLog, exclude_first: bool = True) -> dict:
    """Mean/max/min wall time per NMPC step in milliseconds. The first
    step solves from a cold start and is excluded by default."""
    ms = log.solve_ms[1:] if exclude_first and log.steps > 1 else log.solve_ms
    ms = ms[~np.isnan(ms)]
    if ms.size == 0:
        return {"mean_ms": np.nan, "max_ms": np.nan, "min_ms": np.nan}
    return {"mean_ms": float(np.mean(ms)), "max_ms": float(np.max(ms)),
            "min_ms": float(np.min(ms))}


def _fmt(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(log: SimulationLog, path) -> None:
    """One row per (time, agent) with the state and the input applied at
    that time; the final row repeats the last applied input so every row
    has the full column set."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "agent", "px", "py", "pz", "vx", "vy", "vz",
                    "phi", "theta", "T_cmd", "phi_ref", "theta_ref"])
        for k, t in enumerate(log.times):
            u = log.inputs[min(k, log.steps - 1)]
            for a in range(log.n_agents):
                w.writerow([_fmt(t), a]
                           + [_fmt(v) for v in log.states[k, a]]
                           + [_fmt(v) for v in u[a]])


def write_solver_csv(log: SimulationLog, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "solve_ms", "inner_iters", "outer_iters",
                    "residual", "infeasibility"])
        for k in range(log.steps):
            w.writerow([_fmt(log.times[k]), _fmt(log.solve_ms[k]),
                        int(log.inner_iterations[k]),
                        int(log.outer_rounds[k]),
                        _fmt(log.residuals[k]),
                        _fmt(log.infeasibilities[k])])


def write_metrics_text(metrics: Metrics, log: SimulationLog, path) -> None:
    """Key-value summary. Deliberately free of wall-clock numbers so that
    repeated runs with the same seed produce identical files."""
    lines = [
        f"scenario: {log.scenario.name}",
        f"seed: {log.seed}",
        f"n_agents: {log.n_agents}",
        f"steps: {log.steps}",
        f"aborted_steps: {metrics.aborted_steps}",
        f"max_safety_violation_m: {_fmt(metrics.max_safety_violation)}",
        f"max_obstacle_violation_m: {_fmt(metrics.max_obstacle_violation)}",
        f"min_pairwise_distance_m: {_fmt(metrics.min_pairwise_distance)}",
        "final_position_errors_m: "
        + ", ".join(_fmt(e) for e in metrics.final_position_errors),
        f"max_final_position_error_m: {_fmt(metrics.max_final_position_error)}",
        f"mean_inner_iterations: {_fmt(metrics.mean_inner_iterations)}",
        f"mean_outer_rounds: {_fmt(metrics.mean_outer_rounds)}",
        f"max_infeasibility: {_fmt(metrics.max_infeasibility)}",
    ]
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
