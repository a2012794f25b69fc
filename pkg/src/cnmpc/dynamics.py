"""MAV kinematic model and multi-agent single-shooting rollout.

Each agent carries an 8-dimensional state ``[px, py, pz, vx, vy, vz, phi,
theta]`` in a yaw-compensated world frame and is driven by the input triple
``[T, phi_ref, theta_ref]`` (mass-normalized thrust and attitude
references). Roll and pitch follow first-order closed loops standing in for
a low-level attitude controller; translational acceleration is the tilted
thrust vector minus gravity and linear drag.

The attitude convention is R = R_y(theta) * R_x(phi) with zero yaw, so the
thrust direction is ``[sin(theta)cos(phi), -sin(phi), cos(theta)cos(phi)]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels

STATE_DIM = 8
INPUT_DIM = 3


@dataclass(frozen=True)
class ModelParams:
    """Physical constants of the per-agent model.

    ``tau_*`` and ``k_*`` are the time constants and gains of the roll and
    pitch loops, ``damp_*`` are linear drag coefficients [1/s], ``gravity``
    is in m/s^2.
    """

    tau_phi: float = 0.5
    tau_theta: float = 0.5
    k_phi: float = 1.0
    k_theta: float = 1.0
    damp_x: float = 0.1
    damp_y: float = 0.1
    damp_z: float = 0.1
    gravity: float = 9.82

    def __post_init__(self):
        if self.tau_phi <= 0 or self.tau_theta <= 0:
            raise ValueError("attitude time constants must be positive")
        if self.gravity <= 0:
            raise ValueError("gravity must be positive")
        if min(self.damp_x, self.damp_y, self.damp_z) < 0:
            raise ValueError("damping coefficients must be non-negative")

    def as_array(self) -> np.ndarray:
        """Packed layout consumed by the kernels:
        [tau_phi, tau_theta, k_phi, k_theta, damp_x, damp_y, damp_z, gravity].
        """
        return np.array(
            [self.tau_phi, self.tau_theta, self.k_phi, self.k_theta,
             self.damp_x, self.damp_y, self.damp_z, self.gravity])


@dataclass(frozen=True)
class AgentState:
    """Position [m], velocity [m/s], roll and pitch [rad] of one MAV."""

    p: np.ndarray
    v: np.ndarray
    phi: float = 0.0
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "p", np.asarray(self.p, dtype=float))
        object.__setattr__(self, "v", np.asarray(self.v, dtype=float))
        if self.p.shape != (3,) or self.v.shape != (3,):
            raise ValueError("p and v must be 3-vectors")
        if not np.all(np.isfinite(self.as_array())):
            raise ValueError("state entries must be finite")
        if abs(self.phi) > math.pi or abs(self.theta) > math.pi:
            raise ValueError("roll/pitch must lie in [-pi, pi]")

    def as_array(self) -> np.ndarray:
        return np.concatenate([self.p, self.v, [self.phi, self.theta]])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "AgentState":
        x = np.asarray(x, dtype=float)
        return cls(p=x[0:3].copy(), v=x[3:6].copy(), phi=float(x[6]), theta=float(x[7]))

    @classmethod
    def hover_at(cls, position) -> "AgentState":
        return cls(p=np.asarray(position, dtype=float), v=np.zeros(3))


@dataclass(frozen=True)
class ControlInput:
    """Mass-normalized thrust [m/s^2] and roll/pitch references [rad]."""

    thrust: float
    phi_ref: float = 0.0
    theta_ref: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.thrust, self.phi_ref, self.theta_ref])

    @classmethod
    def from_array(cls, u: np.ndarray) -> "ControlInput":
        return cls(thrust=float(u[0]), phi_ref=float(u[1]), theta_ref=float(u[2]))

    @classmethod
    def hover(cls, params: ModelParams) -> "ControlInput":
        return cls(thrust=params.gravity)


@dataclass(frozen=True)
class FleetState:
    """Ordered states of all agents; the agent count is fixed for a run."""

    agents: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "agents", tuple(self.agents))
        if len(self.agents) < 1:
            raise ValueError("a fleet needs at least one agent")

    def __len__(self) -> int:
        return len(self.agents)

    def as_array(self) -> np.ndarray:
        """Row i is agent i's 8-dim state."""
        return np.stack([a.as_array() for a in self.agents])

    @classmethod
    def from_array(cls, x: np.ndarray) -> "FleetState":
        x = np.asarray(x, dtype=float)
        return cls(agents=tuple(AgentState.from_array(row) for row in x))


def continuous_dynamics(state: AgentState, inp: ControlInput,
                        params: ModelParams) -> np.ndarray:
    """Time derivative of the 8-dim state at ``(state, inp)``.

    Returns ``[dp, dv, dphi, dtheta]`` stacked into one 8-vector.
    """
    x = state.as_array()
    return _derivative_array(x, inp.as_array(), params.as_array())


def _derivative_array(x: np.ndarray, u: np.ndarray, model: np.ndarray) -> np.ndarray:
    tau_phi, tau_theta, k_phi, k_theta, ax, ay, az, g = model
    thrust, phi_ref, theta_ref = u
    sphi, cphi = math.sin(x[6]), math.cos(x[6])
    sth, cth = math.sin(x[7]), math.cos(x[7])
    dx = np.empty(STATE_DIM)
    dx[0:3] = x[3:6]
    dx[3] = thrust * sth * cphi - ax * x[3]
    dx[4] = -thrust * sphi - ay * x[4]
    dx[5] = thrust * cth * cphi - g - az * x[5]
    dx[6] = (k_phi * phi_ref - x[6]) / tau_phi
    dx[7] = (k_theta * theta_ref - x[7]) / tau_theta
    return dx


def discrete_step(state: AgentState, inp: ControlInput, params: ModelParams,
                  dt: float) -> AgentState:
    """One forward-Euler step: ``x + dt * f(x, u)``."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = state.as_array()
    return AgentState.from_array(x + dt * _derivative_array(x, inp.as_array(), params.as_array()))


def step_fleet(states: np.ndarray, inputs: np.ndarray, params: ModelParams,
               dt: float) -> np.ndarray:
    """Forward-Euler step of the whole fleet on array data.

    ``states`` is (n_agents, 8), ``inputs`` is (n_agents, 3); returns the
    successor (n_agents, 8) array. Agents are dynamically decoupled.
    """
    x0 = np.ascontiguousarray(states, dtype=float)
    u = np.ascontiguousarray(inputs, dtype=float).reshape(x0.shape[0], 1, INPUT_DIM)
    return kernels.rollout(x0, u, dt, params.as_array())[:, 1, :]


def rollout(initial: FleetState | np.ndarray, inputs: np.ndarray,
            params: ModelParams, horizon: int, dt: float) -> np.ndarray:
    """Single-shooting trajectory of the fleet under an input plan.

    ``inputs`` holds ``horizon`` input triples per agent, either flat in the
    decision-vector layout (agent-major, then time-major) or already shaped
    (n_agents, horizon, 3). Returns a (horizon+1, n_agents, 8) array whose
    slice 0 is the initial fleet state.
    """
    x0 = initial.as_array() if isinstance(initial, FleetState) else np.asarray(initial, dtype=float)
    n_agents = x0.shape[0]
    u = np.asarray(inputs, dtype=float)
    expected = (n_agents, horizon, INPUT_DIM)
    if u.ndim == 1:
        if u.size != n_agents * horizon * INPUT_DIM:
            raise ValueError(f"expected {n_agents * horizon * INPUT_DIM} inputs, got {u.size}")
        u = u.reshape(expected)
    elif u.shape != expected:
        raise ValueError(f"inputs must have shape {expected}, got {u.shape}")
    states = kernels.rollout(np.ascontiguousarray(x0), np.ascontiguousarray(u),
                             float(dt), params.as_array())
    return np.transpose(states, (1, 0, 2)).copy()
