"""Joint NMPC problem: cost, gradient, and stacked hinge constraints.

The decision vector ``z`` stacks each agent's input plan, agent-major then
time-major: entry ``i*3*N + j*3 + k`` is component ``k`` of
``[T, phi_ref, theta_ref]`` for agent ``i`` at prediction step ``j``.
``z.reshape(n_agents, N, 3)`` therefore recovers the per-agent plans.

All inequality requirements (cylinder keep-out, inter-agent separation,
input-rate limits) are encoded as hinge products that vanish exactly on the
feasible set, stacked into one vector ``F(z)`` in the fixed order
documented in :func:`assemble_constraints`. The penalized objective
``cost + c * ||F||^2`` and its exact gradient are evaluated by the kernel
backend (adjoint recursion through the Euler rollout).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .dynamics import INPUT_DIM, FleetState, ModelParams


@dataclass(frozen=True)
class CostWeights:
    """Diagonal weights of the state, input, and input-rate costs."""

    q_state: tuple = (5.0, 5.0, 20.0, 3.0, 3.0, 3.0, 8.0, 8.0)
    q_input: tuple = (5.0, 10.0, 10.0)
    q_input_rate: tuple = (10.0, 25.0, 25.0)

    def __post_init__(self):
        if len(self.q_state) != 8 or len(self.q_input) != 3 or len(self.q_input_rate) != 3:
            raise ValueError("expected 8 state weights and 3 input / input-rate weights")
        if min(min(self.q_state), min(self.q_input), min(self.q_input_rate)) < 0:
            raise ValueError("weights must be non-negative")


@dataclass(frozen=True)
class CylinderObstacle:
    """Vertical cylinder keep-out region: center, radius, height [m]."""

    center: tuple
    radius: float
    height: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if len(self.center) != 3:
            raise ValueError("center must be a 3-vector")
        if self.radius <= 0 or self.height <= 0:
            raise ValueError("radius and height must be positive")

    def as_array(self) -> np.ndarray:
        return np.array([*self.center, self.radius, self.height])


@dataclass(frozen=True)
class CollisionParams:
    """Minimum horizontal separation and vertical exclusion half-height."""

    safety_radius: float = 0.4
    vertical_margin: float = 1.0

    def __post_init__(self):
        if self.safety_radius <= 0 or self.vertical_margin <= 0:
            raise ValueError("safety radius and vertical margin must be positive")


@dataclass(frozen=True)
class RateLimits:
    """Per-step bounds on changes of the attitude reference inputs [rad]."""

    max_delta_phi: float = 0.07
    max_delta_theta: float = 0.07

    def __post_init__(self):
        if self.max_delta_phi <= 0 or self.max_delta_theta <= 0:
            raise ValueError("rate limits must be positive")


@dataclass(frozen=True)
class ProblemInstance:
    """One parametric NMPC problem: current fleet state plus references,
    obstacles, weights, and limits over a fixed horizon."""

    initial: np.ndarray            # (n_agents, 8)
    prev_input: np.ndarray         # (n_agents, 3), the previously applied inputs
    references: np.ndarray         # (n_agents, 8) per-agent state setpoints
    horizon: int
    dt: float
    obstacles: tuple = ()
    weights: CostWeights = field(default_factory=CostWeights)
    collision: CollisionParams = field(default_factory=CollisionParams)
    rates: RateLimits = field(default_factory=RateLimits)
    params: ModelParams = field(default_factory=ModelParams)
    input_ref: np.ndarray | None = None   # defaults to hover [g, 0, 0]

    def __post_init__(self):
        initial = self.initial.as_array() if isinstance(self.initial, FleetState) \
            else np.asarray(self.initial, dtype=float)
        object.__setattr__(self, "initial", np.ascontiguousarray(initial))
        object.__setattr__(self, "prev_input",
                           np.ascontiguousarray(self.prev_input, dtype=float))
        object.__setattr__(self, "references",
                           np.ascontiguousarray(self.references, dtype=float))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        na = self.initial.shape[0]
        if self.initial.shape != (na, 8):
            raise ValueError("initial must be (n_agents, 8)")
        if self.prev_input.shape != (na, 3):
            raise ValueError("prev_input must be (n_agents, 3)")
        if self.references.shape != (na, 8):
            raise ValueError("references must be (n_agents, 8)")
        if self.horizon < 1 or self.dt <= 0:
            raise ValueError("horizon must be >= 1 and dt positive")
        u_ref = self.input_ref
        if u_ref is None:
            u_ref = np.array([self.params.gravity, 0.0, 0.0])
        object.__setattr__(self, "input_ref",
                           np.ascontiguousarray(u_ref, dtype=float))
        if self.input_ref.shape != (3,):
            raise ValueError("input_ref must be a 3-vector")

    @property
    def n_agents(self) -> int:
        return self.initial.shape[0]

    @property
    def n_obstacles(self) -> int:
        return len(self.obstacles)

    def obstacle_array(self) -> np.ndarray:
        if not self.obstacles:
            return np.empty((0, 5))
        return np.stack([o.as_array() for o in self.obstacles])


def decision_length(n_agents: int, horizon: int) -> int:
    return INPUT_DIM * horizon * n_agents


def constraint_length(n_agents: int, horizon: int, n_obstacles: int) -> int:
    """Length of F: one cylinder entry per (agent, step, obstacle), one
    collision entry per (pair, step), four rate hinges per (agent, step)."""
    return kernels.constraint_count(n_agents, horizon, n_obstacles)


def reshape_decision(z: np.ndarray, n_agents: int, horizon: int) -> np.ndarray:
    """View the flat decision vector as (n_agents, horizon, 3)."""
    z = np.asarray(z, dtype=float)
    if z.size != decision_length(n_agents, horizon):
        raise ValueError(
            f"decision vector has {z.size} entries, expected "
            f"{decision_length(n_agents, horizon)}")
    return np.ascontiguousarray(z).reshape(n_agents, horizon, INPUT_DIM)


def hover_decision(n_agents: int, horizon: int, params: ModelParams) -> np.ndarray:
    """Stacked hover inputs [g, 0, 0]; the default warm start."""
    z = np.zeros((n_agents, horizon, INPUT_DIM))
    z[:, :, 0] = params.gravity
    return z.reshape(-1)


def cylinder_violation(p, obs: CylinderObstacle) -> float:
    """Hinge product that is zero iff ``p`` lies outside the closed cylinder
    and strictly positive inside."""
    px, py, pz = np.asarray(p, dtype=float)
    cx, cy, cz = obs.center
    half = 0.5 * obs.height
    a = max(pz - (cz - half), 0.0)
    b = max((cz + half) - pz, 0.0)
    lat = max(obs.radius ** 2 - (px - cx) ** 2 - (py - cy) ** 2, 0.0)
    return a * b * lat


def collision_violation(p_i, p_l, cp: CollisionParams) -> float:
    """Hinge product that is zero iff the two agents are separated by the
    safety radius horizontally or the vertical margin; symmetric in its
    position arguments."""
    d = np.asarray(p_i, dtype=float) - np.asarray(p_l, dtype=float)
    a = max(d[2] + cp.vertical_margin, 0.0)
    b = max(cp.vertical_margin - d[2], 0.0)
    lat = max(cp.safety_radius ** 2 - d[0] ** 2 - d[1] ** 2, 0.0)
    return a * b * lat


def rate_violations(z: np.ndarray, prev_input: np.ndarray,
                    limits: RateLimits, n_agents: int, horizon: int) -> np.ndarray:
    """Hinge values of the input-rate limits, four per (agent, step):
    [phi-, phi+, theta-, theta+] where '-' is prev-minus-current exceeding
    the bound and '+' the mirror. Step 0 compares against ``prev_input``."""
    u = reshape_decision(z, n_agents, horizon)
    prev_u = np.ascontiguousarray(prev_input, dtype=float)
    out = np.empty((n_agents, horizon, 4))
    for comp, bound, col in ((1, limits.max_delta_phi, 0),
                             (2, limits.max_delta_theta, 2)):
        prev = np.empty((n_agents, horizon))
        prev[:, 0] = prev_u[:, comp]
        prev[:, 1:] = u[:, :-1, comp]
        diff = u[:, :, comp] - prev
        out[:, :, col] = np.maximum(-diff - bound, 0.0)
        out[:, :, col + 1] = np.maximum(diff - bound, 0.0)
    return out.reshape(-1)


def _packed(inst: ProblemInstance):
    return (inst.initial, inst.prev_input, inst.references, inst.input_ref,
            np.asarray(inst.weights.q_state, dtype=float),
            np.asarray(inst.weights.q_input, dtype=float),
            np.asarray(inst.weights.q_input_rate, dtype=float),
            inst.obstacle_array(),
            inst.collision.safety_radius, inst.collision.vertical_margin,
            inst.rates.max_delta_phi, inst.rates.max_delta_theta,
            inst.params.as_array(), inst.dt)


def penalized_cost_and_gradient(z: np.ndarray, inst: ProblemInstance,
                                c: float) -> tuple[float, np.ndarray]:
    """Value and exact gradient of ``total_cost(z) + c * ||F(z)||^2``."""
    if c < 0:
        raise ValueError("penalty weight must be non-negative")
    u = reshape_decision(z, inst.n_agents, inst.horizon)
    (x0, prev_u, x_ref, u_ref, q_x, q_u, q_du, obstacles,
     r_safety, margin, dphi, dtheta, model, dt) = _packed(inst)
    value, grad = kernels.penalized_value_grad(
        x0, u, prev_u, x_ref, u_ref, q_x, q_u, q_du, obstacles,
        r_safety, margin, dphi, dtheta, model, dt, float(c))
    return value, np.asarray(grad).reshape(-1)


def total_cost(z: np.ndarray, inst: ProblemInstance) -> float:
    """Tracking + input + input-rate cost along the single-shooting rollout.

    State deviations are summed over predicted steps 1..N, input and
    input-rate terms over steps 0..N-1; the step-0 rate term compares
    against the previously applied input.
    """
    value, _ = penalized_cost_and_gradient(z, inst, 0.0)
    return value


def cost_gradient(z: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Exact gradient of :func:`total_cost` (adjoint through the rollout)."""
    _, grad = penalized_cost_and_gradient(z, inst, 0.0)
    return grad


def assemble_constraints(z: np.ndarray, inst: ProblemInstance) -> np.ndarray:
    """Stacked constraint vector F(z), zero iff the plan is feasible.

    Order: cylinder hinge for every (agent, step j=1..N, obstacle); then
    collision hinge for every agent pair i<l (lexicographic) and step
    j=1..N; then the four rate hinges per (agent, step j=0..N-1).
    """
    u = reshape_decision(z, inst.n_agents, inst.horizon)
    states = kernels.rollout(inst.initial, u, inst.dt, inst.params.as_array())
    return kernels.constraint_values(
        states, u, inst.prev_input, inst.obstacle_array(),
        inst.collision.safety_radius, inst.collision.vertical_margin,
        inst.rates.max_delta_phi, inst.rates.max_delta_theta)


def max_infeasibility(z: np.ndarray, inst: ProblemInstance) -> float:
    """Sup-norm of F(z); the penalty loop's stopping metric."""
    f = assemble_constraints(z, inst)
    return float(np.max(f)) if f.size else 0.0
