"""Box-constrained solver stack for the penalized NMPC subproblems.

The inner solver minimizes a smooth function over a box. Each iterate takes
a projected-gradient step and, when memory is enabled, an L-BFGS secant
direction built from the history of fixed-point residuals; candidates are
blended between the two and accepted on sufficient decrease of the
forward-backward envelope. The step size gamma is adapted online: whenever
the local descent inequality fails, gamma is halved and the secant memory
cleared. All iterates are projected, so the returned point is always
feasible with respect to the box.

The outer loop drives the hinge constraints to zero by minimizing
``cost + c * ||F||^2`` for a geometrically increasing sequence of weights
``c``, warm-starting every round at the previous solution.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np


class InnerSolverError(RuntimeError):
    """Raised when the objective turns non-finite at an accepted iterate."""


@dataclass(frozen=True)
class BoxSet:
    """Elementwise bounds on the flat decision vector."""

    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float))
        if self.lower.shape != self.upper.shape:
            raise ValueError("bound shapes differ")
        if np.any(self.lower > self.upper):
            raise ValueError("lower bound exceeds upper bound")

    @classmethod
    def from_input_bounds(cls, u_min, u_max, n_agents: int, horizon: int) -> "BoxSet":
        """Tile per-input bounds over every agent and prediction step."""
        u_min = np.asarray(u_min, dtype=float)
        u_max = np.asarray(u_max, dtype=float)
        if u_min.shape != (3,) or u_max.shape != (3,):
            raise ValueError("input bounds must be 3-vectors")
        reps = n_agents * horizon
        return cls(np.tile(u_min, reps), np.tile(u_max, reps))

    @property
    def size(self) -> int:
        return self.lower.size

    def project(self, z: np.ndarray) -> np.ndarray:
        return np.clip(z, self.lower, self.upper)

    def contains(self, z: np.ndarray, atol: float = 1e-12) -> bool:
        return bool(np.all(z >= self.lower - atol) and np.all(z <= self.upper + atol))


@dataclass(frozen=True)
class InnerSolverConfig:
    tolerance: float = 1e-3          # on the scaled fixed-point residual
    max_iterations: int = 500
    lbfgs_memory: int = 10           # 0 disables the secant direction
    initial_step: str = "grad-diff"  # or "unit"
    max_linesearch: int = 10

    def __post_init__(self):
        if self.tolerance <= 0 or self.max_iterations < 1:
            raise ValueError("tolerance must be positive, max_iterations >= 1")
        if self.lbfgs_memory < 0 or self.max_linesearch < 1:
            raise ValueError("lbfgs_memory >= 0 and max_linesearch >= 1 required")
        if self.initial_step not in ("grad-diff", "unit"):
            raise ValueError("initial_step must be 'grad-diff' or 'unit'")


@dataclass(frozen=True)
class PenaltyConfig:
    initial_weight: float = 10.0
    update_factor: float = 10.0
    outer_iterations: int = 4
    infeasibility_tolerance: float = 1e-3
    mode: str = "fixed"              # or "tolerance"
    tolerance_round_limit: int = 12  # round cap in tolerance mode

    def __post_init__(self):
        if self.initial_weight <= 0 or self.update_factor <= 1:
            raise ValueError("initial_weight > 0 and update_factor > 1 required")
        if self.outer_iterations < 1 or self.tolerance_round_limit < 1:
            raise ValueError("round counts must be >= 1")
        if self.infeasibility_tolerance <= 0:
            raise ValueError("infeasibility_tolerance must be positive")
        if self.mode not in ("fixed", "tolerance"):
            raise ValueError("mode must be 'fixed' or 'tolerance'")

    @property
    def round_limit(self) -> int:
        if self.mode == "fixed":
            return self.outer_iterations
        return max(self.outer_iterations, self.tolerance_round_limit)


class InnerResult(NamedTuple):
    z: np.ndarray
    residual: float      # inf-norm of (z - proj(z - gamma*grad)) / gamma
    iterations: int
    converged: bool


@dataclass
class SolveResult:
    z: np.ndarray
    cost: float                # unpenalized objective at z
    max_infeasibility: float   # sup-norm of the hinge constraints at z
    penalty_weight: float      # weight of the last round
    outer_rounds: int
    inner_iterations: int      # summed over rounds
    residual: float            # inner residual of the last round
    converged: bool            # infeasibility within tolerance
    wall_time: float           # seconds
    status: str                # "feasible" or "round-limit"


_BETA = 0.95        # step-size test factor; gamma targets 0.95 / L
_GAMMA_MIN = 1e-12
_SIGMA_FACTOR = (1.0 - _BETA) / 4.0   # half the guaranteed envelope decrease


class _SecantMemory:
    """Bounded history of (step, residual-change) pairs with the standard
    two-loop recursion for multiplying by the inverse-Hessian estimate."""

    def __init__(self, memory: int):
        self.memory = memory
        self.pairs: list = []

    def reset(self) -> None:
        self.pairs.clear()

    def push(self, s: np.ndarray, y: np.ndarray) -> None:
        sy = float(s @ y)
        # curvature guard; near-orthogonal pairs would blow up the estimate
        if sy <= 1e-10 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            return
        self.pairs.append((s, y, 1.0 / sy))
        if len(self.pairs) > self.memory:
            self.pairs.pop(0)

    def direction(self, r: np.ndarray) -> np.ndarray:
        """Quasi-Newton direction -H r; falls back to -r with no history."""
        if not self.pairs:
            return -r
        q = r.copy()
        alphas = []
        for s, y, rho in reversed(self.pairs):
            a = rho * float(s @ q)
            alphas.append(a)
            q -= a * y
        s, y, _ = self.pairs[-1]
        q *= float(s @ y) / float(y @ y)
        for (s, y, rho), a in zip(self.pairs, reversed(alphas)):
            b = rho * float(y @ q)
            q += (a - b) * s
        return -q


def _initial_gamma(fun, z, grad, config) -> float:
    if config.initial_step == "unit":
        return 1.0
    # two-point estimate of the local gradient Lipschitz constant
    delta = 1e-6 * (1.0 + np.abs(z))
    _, grad_pert = fun(z + delta)
    dg = float(np.linalg.norm(grad_pert - grad))
    dz = float(np.linalg.norm(delta))
    if not np.isfinite(dg) or dg <= 1e-12 * dz:
        return 1.0
    return _BETA * dz / dg


def inner_solve(fun: Callable, z0: np.ndarray, box: BoxSet,
                config: InnerSolverConfig | None = None) -> InnerResult:
    """Minimize ``fun`` (returning value and gradient) over ``box``.

    Returns a box-feasible point together with the scaled fixed-point
    residual certifying stationarity, the iteration count, and whether the
    tolerance was met within the iteration budget.
    """
    if config is None:
        config = InnerSolverConfig()
    z = box.project(np.asarray(z0, dtype=float))
    fz, gz = fun(z)
    gz = np.asarray(gz, dtype=float)
    if not (np.isfinite(fz) and np.all(np.isfinite(gz))):
        raise InnerSolverError("objective not finite at the starting point")

    gamma = _initial_gamma(fun, z, gz, config)
    memory = _SecantMemory(config.lbfgs_memory)

    def forward_backward(zc, fc, gc):
        """Projected gradient point, residual, and envelope value at zc."""
        zh = box.project(zc - gamma * gc)
        r = zc - zh
        rr = float(r @ r)
        envelope = fc + float(gc @ (zh - zc)) + rr / (2.0 * gamma)
        return zh, r, rr, envelope

    def shrink_until_valid(zc, fc, gc):
        """Halve gamma until the local descent inequality holds at zc."""
        nonlocal gamma
        while True:
            zh, r, rr, envelope = forward_backward(zc, fc, gc)
            fh, gh = fun(zh)
            bound = fc + float(gc @ (zh - zc)) + _BETA * rr / (2.0 * gamma)
            if fh <= bound + 1e-10 * max(1.0, abs(fc)):
                return zh, fh, np.asarray(gh, dtype=float), r, rr, envelope
            if gamma <= _GAMMA_MIN:
                # roundoff floor; keep the projected point and stop adapting
                return zh, fh, np.asarray(gh, dtype=float), r, rr, envelope
            gamma *= 0.5
            memory.reset()

    zh, fh, gh, r, rr, envelope = shrink_until_valid(z, fz, gz)
    for k in range(config.max_iterations):
        residual = float(np.max(np.abs(r))) / gamma if r.size else 0.0
        if residual <= config.tolerance:
            return InnerResult(z, residual, k, True)

        accepted = False
        if config.lbfgs_memory > 0 and memory.pairs:
            d = memory.direction(r)
            tau = 1.0
            for _ in range(config.max_linesearch):
                zc = box.project(z - (1.0 - tau) * r + tau * d)
                fc, gc = fun(zc)
                if np.isfinite(fc):
                    gc = np.asarray(gc, dtype=float)
                    _, _, rrc, env_c = forward_backward(zc, fc, gc)
                    if env_c <= envelope - _SIGMA_FACTOR / gamma * rr:
                        z_new, f_new, g_new = zc, fc, gc
                        accepted = True
                        break
                tau *= 0.5
        if not accepted:
            # projected gradient fallback; guaranteed envelope decrease
            z_new, f_new, g_new = zh, fh, gh
        if not (np.isfinite(f_new) and np.all(np.isfinite(g_new))):
            raise InnerSolverError("objective turned non-finite")

        z_prev, r_prev, gamma_prev = z, r, gamma
        z, fz, gz = z_new, f_new, g_new
        zh, fh, gh, r, rr, envelope = shrink_until_valid(z, fz, gz)
        if config.lbfgs_memory > 0 and gamma == gamma_prev:
            memory.push(z - z_prev, r - r_prev)

    residual = float(np.max(np.abs(r))) / gamma if r.size else 0.0
    return InnerResult(z, residual, config.max_iterations, False)


def penalty_solve(penalized: Callable, infeasibility: Callable,
                  z0: np.ndarray, box: BoxSet,
                  penalty: PenaltyConfig | None = None,
                  inner: InnerSolverConfig | None = None) -> SolveResult:
    """Outer quadratic-penalty loop around :func:`inner_solve`.

    ``penalized(z, c)`` must return the value and gradient of the penalized
    objective with weight ``c``; ``infeasibility(z)`` the sup-norm of the
    constraint stack. Rounds stop early once the infeasibility tolerance is
    met; otherwise the weight grows by ``update_factor`` each round up to
    the mode-dependent round limit.
    """
    if penalty is None:
        penalty = PenaltyConfig()
    if inner is None:
        inner = InnerSolverConfig()
    start = time.perf_counter()
    z = box.project(np.asarray(z0, dtype=float))
    weight = penalty.initial_weight
    rounds = 0
    total_inner = 0
    residual = 0.0
    infeas = infeasibility(z)
    for _ in range(penalty.round_limit):
        result = inner_solve(lambda zz, c=weight: penalized(zz, c), z, box, inner)
        z = result.z
        rounds += 1
        total_inner += result.iterations
        residual = result.residual
        infeas = infeasibility(z)
        if infeas <= penalty.infeasibility_tolerance:
            break
        if rounds < penalty.round_limit:
            weight *= penalty.update_factor
    converged = infeas <= penalty.infeasibility_tolerance
    cost = penalized(z, 0.0)[0]
    return SolveResult(
        z=z, cost=float(cost), max_infeasibility=float(infeas),
        penalty_weight=weight, outer_rounds=rounds,
        inner_iterations=total_inner, residual=residual, converged=converged,
        wall_time=time.perf_counter() - start,
        status="feasible" if converged else "round-limit")
