"""Centralized nonlinear MPC for multirotor fleets.

Single-shooting NMPC over the joint input plan of all agents, with
obstacle, inter-agent, and input-rate requirements handled by a quadratic
penalty method around a box-constrained inner solver. Hot numerical
kernels run in a compiled extension when available and fall back to a
NumPy implementation otherwise; see :mod:`cnmpc.kernels`.
"""

from . import kernels
from .controller import (CnmpcController, ControllerConfig, ControlStepResult,
                         nmpc_step, warm_start_shift)
from .dynamics import (AgentState, ControlInput, FleetState, ModelParams,
                       continuous_dynamics, discrete_step, rollout, step_fleet)
from .optimizer import (BoxSet, InnerResult, InnerSolverConfig,
                        InnerSolverError, PenaltyConfig, SolveResult,
                        inner_solve, penalty_solve)
from .problem import (CollisionParams, CostWeights, CylinderObstacle,
                      ProblemInstance, RateLimits, assemble_constraints,
                      cost_gradient, decision_length, hover_decision,
                      max_infeasibility, penalized_cost_and_gradient,
                      reshape_decision, total_cost)
from .scenarios import (NoiseParams, Scenario, apply_overrides,
                        builtin_scenarios, get_scenario, load_scenario,
                        save_scenario)
from .simulate import (Metrics, SimulationLog, apply_noise, compute_metrics,
                       run_scenario, solve_time_stats, write_metrics_text,
                       write_solver_csv, write_trajectory_csv)

__version__ = "0.1.0"

__all__ = [
    "AgentState", "BoxSet", "CnmpcController", "CollisionParams",
    "ControlInput", "ControlStepResult", "ControllerConfig", "CostWeights",
    "CylinderObstacle", "FleetState", "InnerResult", "InnerSolverConfig",
    "InnerSolverError", "Metrics", "ModelParams", "NoiseParams",
    "PenaltyConfig", "ProblemInstance", "RateLimits", "Scenario",
    "SimulationLog", "SolveResult", "apply_noise", "apply_overrides",
    "assemble_constraints",
    "builtin_scenarios", "compute_metrics", "continuous_dynamics",
    "cost_gradient", "decision_length", "discrete_step", "get_scenario",
    "hover_decision", "inner_solve", "kernels", "load_scenario",
    "max_infeasibility", "nmpc_step", "penalized_cost_and_gradient",
    "penalty_solve", "reshape_decision", "rollout", "run_scenario",
    "save_scenario", "solve_time_stats", "step_fleet", "total_cost",
    "warm_start_shift", "write_metrics_text", "write_solver_csv",
    "write_trajectory_csv", "__version__",
]
