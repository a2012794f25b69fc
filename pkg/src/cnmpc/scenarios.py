"""Built-in fleet scenarios and the YAML scenario file format.

A scenario bundles everything the simulation harness needs: initial fleet
state, a piecewise-constant reference schedule, the obstacle layout, the
measurement noise levels, the episode duration, and optional controller
overrides. Scenarios are plain data; they do not run anything themselves.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np
import yaml

from .controller import ControllerConfig
from .optimizer import InnerSolverConfig, PenaltyConfig
from .problem import CollisionParams, CylinderObstacle


@dataclass(frozen=True)
class NoiseParams:
    """Per-component standard deviations of the additive state noise."""

    position: float = 0.01
    velocity: float = 0.005
    attitude: float = 0.001
    enabled: bool = True

    def __post_init__(self):
        if min(self.position, self.velocity, self.attitude) < 0:
            raise ValueError("noise levels must be non-negative")

    def stds(self) -> np.ndarray:
        """Standard deviations in state order (3x pos, 3x vel, 2x att)."""
        return np.array([self.position] * 3 + [self.velocity] * 3
                        + [self.attitude] * 2)


@dataclass(frozen=True)
class Scenario:
    name: str
    initial: np.ndarray                 # (n_agents, 8)
    schedule: tuple                     # ((time, (n_agents, 8) refs), ...)
    duration: float
    obstacles: tuple = ()
    noise: NoiseParams = field(default_factory=NoiseParams)
    controller_overrides: dict = field(default_factory=dict)

    def __post_init__(self):
        initial = np.ascontiguousarray(self.initial, dtype=float)
        object.__setattr__(self, "initial", initial)
        na = initial.shape[0]
        if initial.shape != (na, 8) or na < 1:
            raise ValueError("initial must be (n_agents, 8)")
        entries = []
        for t, refs in self.schedule:
            refs = np.ascontiguousarray(refs, dtype=float)
            if refs.shape != (na, 8):
                raise ValueError("schedule references must be (n_agents, 8)")
            entries.append((float(t), refs))
        if not entries:
            raise ValueError("schedule must have at least one entry")
        if any(b[0] <= a[0] for a, b in zip(entries, entries[1:])):
            raise ValueError("schedule times must be strictly increasing")
        object.__setattr__(self, "schedule", tuple(entries))
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        object.__setattr__(self, "controller_overrides",
                           dict(self.controller_overrides))
        if self.duration <= 0:
            raise ValueError("duration must be positive")

    @property
    def n_agents(self) -> int:
        return self.initial.shape[0]

    def references_at(self, t: float) -> np.ndarray:
        """Active reference block: last schedule entry with time <= t,
        or the earliest entry for t before the schedule starts."""
        refs = self.schedule[0][1]
        for entry_t, entry_refs in self.schedule:
            if entry_t <= t:
                refs = entry_refs
            else:
                break
        return refs


# Controller override keys accepted in scenario files, mapped onto the
# nested controller configuration.
OVERRIDE_KEYS = (
    "horizon", "dt", "warm_start",
    "penalty_initial_weight", "penalty_update_factor",
    "penalty_outer_iterations", "penalty_mode", "infeasibility_tolerance",
    "inner_tolerance", "inner_max_iterations", "lbfgs_memory",
    "safety_radius", "vertical_margin",
)


def apply_overrides(config: ControllerConfig, overrides: dict) -> ControllerConfig:
    """Rebuild a controller configuration with scenario-level overrides."""
    unknown = set(overrides) - set(OVERRIDE_KEYS)
    if unknown:
        raise ValueError(f"unknown controller overrides: {sorted(unknown)}")
    o = dict(overrides)
    penalty = dataclasses.replace(
        config.penalty,
        initial_weight=o.get("penalty_initial_weight",
                             config.penalty.initial_weight),
        update_factor=o.get("penalty_update_factor",
                            config.penalty.update_factor),
        outer_iterations=o.get("penalty_outer_iterations",
                               config.penalty.outer_iterations),
        mode=o.get("penalty_mode", config.penalty.mode),
        infeasibility_tolerance=o.get("infeasibility_tolerance",
                                      config.penalty.infeasibility_tolerance))
    inner = dataclasses.replace(
        config.inner,
        tolerance=o.get("inner_tolerance", config.inner.tolerance),
        max_iterations=o.get("inner_max_iterations",
                             config.inner.max_iterations),
        lbfgs_memory=o.get("lbfgs_memory", config.inner.lbfgs_memory))
    collision = CollisionParams(
        safety_radius=o.get("safety_radius", config.collision.safety_radius),
        vertical_margin=o.get("vertical_margin",
                              config.collision.vertical_margin))
    return dataclasses.replace(
        config, penalty=penalty, inner=inner, collision=collision,
        horizon=o.get("horizon", config.horizon), dt=o.get("dt", config.dt),
        warm_start=o.get("warm_start", config.warm_start))


def hover_state(position) -> np.ndarray:
    x = np.zeros(8)
    x[:3] = position
    return x


def hover_reference(positions) -> np.ndarray:
    """Stationary position references with zero velocity and attitude."""
    positions = np.atleast_2d(np.asarray(positions, dtype=float))
    refs = np.zeros((positions.shape[0], 8))
    refs[:, :3] = positions
    return refs


def _line_states(n_agents: int, x: float, spacing: float = 0.8) -> np.ndarray:
    """Agents on a line of constant x, spread along y and centered; odd
    counts get a small offset so nobody starts dead center."""
    ys = (np.arange(n_agents) - (n_agents - 1) / 2.0) * spacing
    if n_agents % 2 == 1:
        ys = ys + 0.15
    return np.stack([hover_state((x, y, 0.0)) for y in ys])


def _crossing_scenario(name: str, n_agents: int, half_span: float,
                       obstacles: tuple, duration: float,
                       overrides: dict | None = None) -> Scenario:
    """Take off to 1.5 m, then cross the obstacle field along x."""
    initial = _line_states(n_agents, -half_span)
    up = initial[:, :3].copy()
    up[:, 2] = 1.5
    across = up.copy()
    across[:, 0] = half_span
    return Scenario(
        name=name, initial=initial,
        schedule=((0.0, hover_reference(up)), (2.5, hover_reference(across))),
        duration=duration, obstacles=obstacles,
        controller_overrides=overrides or {})


def _four_agent_cylinder() -> Scenario:
    obstacle = CylinderObstacle(center=(0.0, 0.0, 2.0), radius=0.8, height=4.0)
    return _crossing_scenario("four_agent_cylinder", 4, 3.0, (obstacle,), 16.0)


def _scaling(n_agents: int) -> Scenario:
    obstacle = CylinderObstacle(center=(0.0, 0.0, 2.0), radius=0.8, height=4.0)
    return _crossing_scenario(f"scaling_{n_agents}", n_agents, 3.0,
                              (obstacle,), 16.0)


def _head_on_four() -> Scenario:
    # staggered angles break the rotational symmetry that would otherwise
    # park all four agents in a perfectly balanced standoff
    angles = np.deg2rad([0.0, 85.0, 180.0, 265.0])
    radius = 2.0
    start = np.stack([
        hover_state((radius * np.cos(a), radius * np.sin(a), 1.5))
        for a in angles])
    goal = start[:, :3].copy()
    goal[:, :2] *= -1.0
    return Scenario(
        name="head_on_four", initial=start,
        schedule=((0.0, hover_reference(goal)),),
        duration=12.0,
        controller_overrides={"penalty_outer_iterations": 5})


def _obstacle_course_six() -> Scenario:
    layout = (  # (x, y, radius)
        (-5.0, 0.6, 0.4),
        (-2.5, -0.8, 1.0),
        (0.0, 0.3, 0.6),
        (2.5, -0.4, 0.8),
        (5.0, 0.7, 0.5),
    )
    obstacles = tuple(
        CylinderObstacle(center=(x, y, 2.0), radius=r, height=4.0)
        for x, y, r in layout)
    return _crossing_scenario("obstacle_course_six", 6, 7.5, obstacles, 26.0)


def builtin_scenarios() -> dict:
    """All named scenarios shipped with the package."""
    scenarios = {
        "four_agent_cylinder": _four_agent_cylinder(),
        "head_on_four": _head_on_four(),
        "obstacle_course_six": _obstacle_course_six(),
    }
    for n in range(2, 10):
        s = _scaling(n)
        scenarios[s.name] = s
    return scenarios


def get_scenario(name: str) -> Scenario:
    scenarios = builtin_scenarios()
    if name not in scenarios:
        raise KeyError(
            f"unknown scenario {name!r}; available: {sorted(scenarios)}")
    return scenarios[name]


def save_scenario(scenario: Scenario, path) -> None:
    doc = {
        "name": scenario.name,
        "duration": float(scenario.duration),
        "initial": scenario.initial.tolist(),
        "schedule": [{"time": t, "references": refs.tolist()}
                     for t, refs in scenario.schedule],
        "obstacles": [{"center": list(o.center), "radius": o.radius,
                       "height": o.height} for o in scenario.obstacles],
        "noise": {"position": scenario.noise.position,
                  "velocity": scenario.noise.velocity,
                  "attitude": scenario.noise.attitude,
                  "enabled": scenario.noise.enabled},
        "controller_overrides": dict(scenario.controller_overrides),
    }
    with open(path, "w") as fh:
        yaml.safe_dump(doc, fh, sort_keys=False)


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        doc = yaml.safe_load(fh)
    try:
        noise = NoiseParams(**doc.get("noise", {}))
        obstacles = tuple(CylinderObstacle(center=tuple(o["center"]),
                                           radius=o["radius"],
                                           height=o["height"])
                          for o in doc.get("obstacles", []))
        return Scenario(
            name=doc["name"], initial=np.asarray(doc["initial"], dtype=float),
            schedule=tuple((entry["time"],
                            np.asarray(entry["references"], dtype=float))
                           for entry in doc["schedule"]),
            duration=doc["duration"], obstacles=obstacles, noise=noise,
            controller_overrides=doc.get("controller_overrides", {}))
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed scenario file {path}: {exc}") from exc
