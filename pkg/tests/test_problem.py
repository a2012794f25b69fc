import math

import numpy as np
import pytest

from cnmpc import kernels
from cnmpc.dynamics import ModelParams, rollout
from cnmpc.problem import (CollisionParams, CostWeights, CylinderObstacle,
                           ProblemInstance, RateLimits, assemble_constraints,
                           collision_violation, constraint_length,
                           cost_gradient, cylinder_violation, decision_length,
                           hover_decision, max_infeasibility,
                           penalized_cost_and_gradient, rate_violations,
                           reshape_decision, total_cost)
from conftest import (central_difference_gradient, gradient_mismatch,
                      random_decision, random_instance)

PARAMS = ModelParams()
OBS = CylinderObstacle(center=(0.0, 0.0, 2.0), radius=0.8, height=4.0)


def test_constraint_length_formula():
    # one entry per (agent, step, obstacle), one per (pair, step),
    # four rate hinges per (agent, step)
    assert constraint_length(4, 30, 1) == 780
    assert constraint_length(2, 5, 0) == 0 + 5 + 40
    assert constraint_length(1, 3, 2) == 6 + 0 + 12
    assert decision_length(4, 30) == 360


def test_cylinder_violation_values():
    assert cylinder_violation((0.0, 0.0, 2.0), OBS) == pytest.approx(2.56)
    # a point strictly inside, off axis: band terms 1 and 3, lateral 0.39
    assert cylinder_violation((0.4, 0.3, 1.0), OBS) == pytest.approx(
        1.0 * 3.0 * (0.64 - 0.25))
    # outside in each direction
    assert cylinder_violation((0.0, 0.0, 4.1), OBS) == 0.0
    assert cylinder_violation((0.0, 0.0, -0.1), OBS) == 0.0
    assert cylinder_violation((0.9, 0.0, 2.0), OBS) == 0.0
    assert cylinder_violation((0.8, 0.0, 2.0), OBS) == 0.0  # boundary


def test_collision_violation_values():
    cp = CollisionParams(safety_radius=0.4, vertical_margin=1.0)
    assert collision_violation((1, 1, 1), (1, 1, 1), cp) == pytest.approx(0.16)
    assert collision_violation((0, 0, 0), (0.3, 0, 0), cp) == pytest.approx(
        1.0 * 1.0 * (0.16 - 0.09))
    # separated horizontally or vertically
    assert collision_violation((0, 0, 0), (0.5, 0, 0), cp) == 0.0
    assert collision_violation((0, 0, 0), (0, 0, 1.2), cp) == 0.0
    # symmetric in the two agents
    a, b = (0.1, 0.2, 0.3), (0.3, 0.1, 0.4)
    assert collision_violation(a, b, cp) == collision_violation(b, a, cp)


def test_rate_violation_values():
    limits = RateLimits(max_delta_phi=0.07, max_delta_theta=0.07)
    prev = np.array([[PARAMS.gravity, 0.05, 0.0]])
    u = np.array([[[PARAMS.gravity, 0.15, -0.1],
                   [PARAMS.gravity, 0.15, 0.0]]])
    out = rate_violations(u.reshape(-1), prev, limits, 1, 2)
    # per step: [phi minus, phi plus, theta minus, theta plus]
    expected = [0.0, 0.03, 0.03, 0.0,
                0.0, 0.0, 0.0, 0.03]
    assert np.allclose(out, expected, atol=1e-15)
    # thrust changes are never rate-limited
    u2 = np.array([[[13.0, 0.0, 0.0], [5.0, 0.0, 0.0]]])
    prev2 = np.array([[PARAMS.gravity, 0.0, 0.0]])
    assert np.all(rate_violations(u2.reshape(-1), prev2, limits, 1, 2) == 0.0)


def test_assemble_constraints_stacking_order(rng):
    """F must stack cylinder entries (agent, step, obstacle), then pair
    entries (i<l lexicographic, step), then the four rate hinges per
    (agent, step), with predicted steps 1..N for state-dependent blocks."""
    na, n = 3, 3
    obstacles = (OBS, CylinderObstacle(center=(0.5, 0.2, 1.0),
                                       radius=0.5, height=2.0))
    inst = random_instance(rng, n_agents=na, horizon=n)
    inst = ProblemInstance(
        initial=inst.initial, prev_input=inst.prev_input,
        references=inst.references, horizon=n, dt=inst.dt,
        obstacles=obstacles, params=PARAMS)
    z = random_decision(rng, inst)

    states = rollout(inst.initial, reshape_decision(z, na, n), PARAMS,
                     horizon=n, dt=inst.dt)  # (n+1, na, 8), time-major
    expected = []
    for i in range(na):
        for j in range(1, n + 1):
            for obs in obstacles:
                expected.append(cylinder_violation(states[j, i, :3], obs))
    for i in range(na):
        for l in range(i + 1, na):
            for j in range(1, n + 1):
                expected.append(collision_violation(
                    states[j, i, :3], states[j, l, :3], inst.collision))
    expected = np.concatenate([
        np.array(expected),
        rate_violations(z, inst.prev_input, inst.rates, na, n)])

    f = assemble_constraints(z, inst)
    assert f.shape == (constraint_length(na, n, len(obstacles)),)
    assert np.allclose(f, expected, atol=1e-12)


def _reference_cost(z, inst):
    """Plain-loop reimplementation of the tracking objective."""
    na, n = inst.n_agents, inst.horizon
    u = np.asarray(z, dtype=float).reshape(na, n, 3)
    q_x = np.asarray(inst.weights.q_state)
    q_u = np.asarray(inst.weights.q_input)
    q_du = np.asarray(inst.weights.q_input_rate)
    tau_phi, tau_theta, k_phi, k_theta, ax, ay, az, g = inst.params.as_array()
    total = 0.0
    for i in range(na):
        x = inst.initial[i].copy()
        for j in range(n):
            du = u[i, j] - inst.input_ref
            total += float(du @ (q_u * du))
            prev = inst.prev_input[i] if j == 0 else u[i, j - 1]
            dd = u[i, j] - prev
            total += float(dd @ (q_du * dd))
            thrust, phi_ref, theta_ref = u[i, j]
            dx = np.empty(8)
            dx[0:3] = x[3:6]
            dx[3] = thrust * math.sin(x[7]) * math.cos(x[6]) - ax * x[3]
            dx[4] = -thrust * math.sin(x[6]) - ay * x[4]
            dx[5] = (thrust * math.cos(x[7]) * math.cos(x[6]) - g
                     - az * x[5])
            dx[6] = (k_phi * phi_ref - x[6]) / tau_phi
            dx[7] = (k_theta * theta_ref - x[7]) / tau_theta
            x = x + inst.dt * dx
            e = x - inst.references[i]
            total += float(e @ (q_x * e))
    return total


def test_total_cost_matches_loop_reference(rng):
    inst = random_instance(rng, n_agents=2, horizon=4)
    z = random_decision(rng, inst)
    assert total_cost(z, inst) == pytest.approx(_reference_cost(z, inst),
                                                rel=1e-12)


def test_cost_zero_at_tracked_hover():
    initial = np.zeros((2, 8))
    initial[:, 0] = [5.0, 10.0]  # away from OBS and from each other
    initial[:, 2] = 1.0
    inst = ProblemInstance(
        initial=initial, prev_input=np.tile([PARAMS.gravity, 0, 0], (2, 1)),
        references=initial.copy(), horizon=5, dt=0.05, obstacles=(OBS,),
        params=PARAMS)
    z = hover_decision(2, 5, PARAMS)
    assert total_cost(z, inst) == 0.0
    assert max_infeasibility(z, inst) == 0.0
    assert np.all(cost_gradient(z, inst) == 0.0)


def test_penalized_value_consistency(rng):
    inst = random_instance(rng)
    z = random_decision(rng, inst)
    f = assemble_constraints(z, inst)
    for c in (0.0, 10.0, 1e4):
        value, _ = penalized_cost_and_gradient(z, inst, c)
        assert value == pytest.approx(total_cost(z, inst) + c * float(f @ f),
                                      rel=1e-12)


def test_cost_gradient_finite_difference(rng):
    inst = random_instance(rng, n_agents=2, horizon=4)
    z = random_decision(rng, inst)
    numeric = central_difference_gradient(lambda zz: total_cost(zz, inst), z)
    assert gradient_mismatch(cost_gradient(z, inst), numeric) < 1e-6


def test_penalized_gradient_finite_difference(rng):
    inst = random_instance(rng, n_agents=3, horizon=3)
    z = random_decision(rng, inst)
    f = assemble_constraints(z, inst)
    assert np.max(f) > 0.0  # the penalty terms must actually be active
    _, grad = penalized_cost_and_gradient(z, inst, 50.0)
    numeric = central_difference_gradient(
        lambda zz: penalized_cost_and_gradient(zz, inst, 50.0)[0], z)
    assert gradient_mismatch(grad, numeric) < 1e-6


def test_gradient_without_obstacles(rng):
    inst = random_instance(rng, n_agents=2, horizon=3, with_obstacle=False)
    z = random_decision(rng, inst)
    _, grad = penalized_cost_and_gradient(z, inst, 30.0)
    numeric = central_difference_gradient(
        lambda zz: penalized_cost_and_gradient(zz, inst, 30.0)[0], z)
    assert gradient_mismatch(grad, numeric) < 1e-6


def test_single_agent_has_no_pair_constraints():
    inst = random_instance(np.random.default_rng(0), n_agents=1, horizon=3)
    z = hover_decision(1, 3, PARAMS)
    f = assemble_constraints(z, inst)
    assert f.shape == (constraint_length(1, 3, 1),)


def test_negative_penalty_weight_rejected(rng):
    inst = random_instance(rng)
    z = random_decision(rng, inst)
    with pytest.raises(ValueError):
        penalized_cost_and_gradient(z, inst, -1.0)


def test_reshape_decision_validates_size():
    with pytest.raises(ValueError):
        reshape_decision(np.zeros(10), 2, 3)
    u = reshape_decision(np.arange(18.0), 2, 3)
    assert u.shape == (2, 3, 3)
    assert u[1, 0, 0] == 9.0  # agent-major, then time-major


def test_hover_decision_layout():
    z = hover_decision(2, 3, PARAMS)
    u = reshape_decision(z, 2, 3)
    assert np.all(u[:, :, 0] == PARAMS.gravity)
    assert np.all(u[:, :, 1:] == 0.0)


def test_problem_instance_validation():
    good = dict(initial=np.zeros((2, 8)),
                prev_input=np.tile([9.82, 0, 0], (2, 1)),
                references=np.zeros((2, 8)), horizon=5, dt=0.05)
    ProblemInstance(**good)
    with pytest.raises(ValueError):
        ProblemInstance(**{**good, "prev_input": np.zeros((3, 3))})
    with pytest.raises(ValueError):
        ProblemInstance(**{**good, "references": np.zeros((2, 7))})
    with pytest.raises(ValueError):
        ProblemInstance(**{**good, "horizon": 0})
    with pytest.raises(ValueError):
        ProblemInstance(**{**good, "dt": 0.0})
    with pytest.raises(ValueError):
        ProblemInstance(**{**good, "input_ref": np.zeros(2)})


def test_obstacle_and_params_validation():
    with pytest.raises(ValueError):
        CylinderObstacle(center=(0, 0), radius=0.5, height=1.0)
    with pytest.raises(ValueError):
        CylinderObstacle(center=(0, 0, 0), radius=0.0, height=1.0)
    with pytest.raises(ValueError):
        CollisionParams(safety_radius=0.0)
    with pytest.raises(ValueError):
        RateLimits(max_delta_phi=0.0)
    with pytest.raises(ValueError):
        CostWeights(q_state=(1.0,) * 7)
    with pytest.raises(ValueError):
        CostWeights(q_input=(-1.0, 1.0, 1.0))


def test_kernel_constraint_count_alias():
    assert kernels.constraint_count(4, 30, 1) == 780
