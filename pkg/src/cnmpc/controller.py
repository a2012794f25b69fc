"""Receding-horizon control built on the penalized NMPC problem.

Every control step assembles a fresh :class:`~cnmpc.problem.ProblemInstance`
from the measured fleet state, solves it with the penalty method, applies
the first planned input of each agent, and keeps the remaining plan as the
warm start for the next step (shifted by one step, last input repeated).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import ModelParams
from .optimizer import (BoxSet, InnerSolverConfig, PenaltyConfig, SolveResult,
                        penalty_solve)
from .problem import (CollisionParams, CostWeights, ProblemInstance,
                      RateLimits, hover_decision, max_infeasibility,
                      penalized_cost_and_gradient, reshape_decision)


@dataclass(frozen=True)
class ControllerConfig:
    horizon: int = 30
    dt: float = 0.05
    u_min: tuple = (5.0, -0.4, -0.4)
    u_max: tuple = (13.5, 0.4, 0.4)
    weights: CostWeights = field(default_factory=CostWeights)
    collision: CollisionParams = field(default_factory=CollisionParams)
    rates: RateLimits = field(default_factory=RateLimits)
    params: ModelParams = field(default_factory=ModelParams)
    penalty: PenaltyConfig = field(default_factory=PenaltyConfig)
    inner: InnerSolverConfig = field(default_factory=InnerSolverConfig)
    warm_start: bool = True

    def __post_init__(self):
        object.__setattr__(self, "u_min", tuple(float(v) for v in self.u_min))
        object.__setattr__(self, "u_max", tuple(float(v) for v in self.u_max))
        if len(self.u_min) != 3 or len(self.u_max) != 3:
            raise ValueError("input bounds must be 3-vectors")
        if any(lo > hi for lo, hi in zip(self.u_min, self.u_max)):
            raise ValueError("u_min exceeds u_max")
        if self.horizon < 1 or self.dt <= 0:
            raise ValueError("horizon must be >= 1 and dt positive")


@dataclass
class ControlStepResult:
    inputs: np.ndarray      # (n_agents, 3) applied this step
    plan: np.ndarray        # full flat decision vector
    solve: SolveResult


def warm_start_shift(plan: np.ndarray, n_agents: int, horizon: int) -> np.ndarray:
    """Advance a plan by one step: drop each agent's first input, repeat
    the last one. The usual receding-horizon initial guess."""
    u = reshape_decision(plan, n_agents, horizon).copy()
    u[:, :-1] = u[:, 1:]
    return u.reshape(-1)


def step_box(config: ControllerConfig, prev_input: np.ndarray,
             n_agents: int) -> BoxSet:
    """Input box with the first step's attitude references narrowed to the
    rate window around the previously applied inputs.

    The penalty method drives the rate hinges of later steps toward zero
    only up to O(1/c), which is not good enough for the input actually
    sent to the vehicles; folding the step-0 window into the projection
    set makes the applied rate bound exact.
    """
    box = BoxSet.from_input_bounds(config.u_min, config.u_max,
                                   n_agents, config.horizon)
    lo = box.lower.reshape(n_agents, config.horizon, 3).copy()
    hi = box.upper.reshape(n_agents, config.horizon, 3).copy()
    anchor = np.clip(np.asarray(prev_input, dtype=float),
                     config.u_min, config.u_max)
    for comp, delta in ((1, config.rates.max_delta_phi),
                        (2, config.rates.max_delta_theta)):
        lo[:, 0, comp] = np.maximum(lo[:, 0, comp], anchor[:, comp] - delta)
        hi[:, 0, comp] = np.minimum(hi[:, 0, comp], anchor[:, comp] + delta)
    return BoxSet(lo.reshape(-1), hi.reshape(-1))


def nmpc_step(state: np.ndarray, references: np.ndarray, obstacles: tuple,
              prev_input: np.ndarray, warm: np.ndarray | None,
              config: ControllerConfig) -> ControlStepResult:
    """Solve one NMPC problem and return the first planned inputs."""
    state = np.asarray(state, dtype=float)
    n_agents = state.shape[0]
    inst = ProblemInstance(
        initial=state, prev_input=prev_input, references=references,
        horizon=config.horizon, dt=config.dt, obstacles=tuple(obstacles),
        weights=config.weights, collision=config.collision,
        rates=config.rates, params=config.params)
    box = step_box(config, prev_input, n_agents)
    if warm is None:
        warm = hover_decision(n_agents, config.horizon, config.params)
    result = penalty_solve(
        lambda z, c: penalized_cost_and_gradient(z, inst, c),
        lambda z: max_infeasibility(z, inst),
        warm, box, config.penalty, config.inner)
    plan = reshape_decision(result.z, n_agents, config.horizon)
    return ControlStepResult(inputs=plan[:, 0].copy(), plan=result.z,
                             solve=result)


class CnmpcController:
    """Stateful wrapper carrying the warm start and the last applied inputs
    across control steps for one fixed fleet and obstacle layout."""

    def __init__(self, n_agents: int, obstacles: tuple = (),
                 config: ControllerConfig | None = None):
        if n_agents < 1:
            raise ValueError("need at least one agent")
        self.config = config if config is not None else ControllerConfig()
        self.n_agents = n_agents
        self.obstacles = tuple(obstacles)
        self.prev_input = np.tile(
            [self.config.params.gravity, 0.0, 0.0], (n_agents, 1))
        self._warm: np.ndarray | None = None

    def reset(self) -> None:
        """Forget the warm start and reset the applied-input memory."""
        self.prev_input = np.tile(
            [self.config.params.gravity, 0.0, 0.0], (self.n_agents, 1))
        self._warm = None

    def drop_warm_start(self) -> None:
        """Discard only the warm start; used to recover after a failed
        solve that may have been poisoned by a bad initial guess."""
        self._warm = None

    def step(self, state: np.ndarray, references: np.ndarray) -> ControlStepResult:
        result = nmpc_step(state, references, self.obstacles,
                           self.prev_input, self._warm, self.config)
        self.prev_input = result.inputs.copy()
        if self.config.warm_start:
            self._warm = warm_start_shift(result.plan, self.n_agents,
                                          self.config.horizon)
        else:
            self._warm = None
        return result
