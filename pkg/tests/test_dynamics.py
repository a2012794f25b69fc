import numpy as np
import pytest

from cnmpc.dynamics import (AgentState, ControlInput, FleetState, ModelParams,
                            continuous_dynamics, discrete_step, rollout,
                            step_fleet)

PARAMS = ModelParams()


def test_hover_is_equilibrium():
    state = AgentState.hover_at((0.3, -1.0, 2.0))
    deriv = continuous_dynamics(state, ControlInput.hover(PARAMS), PARAMS)
    assert np.all(deriv == 0.0)


def test_attitude_reference_rate():
    # phi_dot = (k_phi * phi_ref - phi) / tau_phi = (1 * 0.4 - 0) / 0.5
    state = AgentState.hover_at((0.0, 0.0, 0.0))
    deriv = continuous_dynamics(
        state, ControlInput(thrust=PARAMS.gravity, phi_ref=0.4,
                            theta_ref=0.0), PARAMS)
    assert deriv[6] == pytest.approx(0.8)
    assert deriv[7] == 0.0


def test_pitched_thrust_direction():
    # at theta = pi/2 all thrust goes to +x and gravity pulls -z
    state = AgentState(p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0),
                       phi=0.0, theta=np.pi / 2)
    deriv = continuous_dynamics(
        state, ControlInput(thrust=10.0, phi_ref=0.0, theta_ref=0.0), PARAMS)
    assert deriv[3] == pytest.approx(10.0)
    assert deriv[4] == pytest.approx(0.0)
    assert deriv[5] == pytest.approx(-PARAMS.gravity)


def test_roll_tilts_thrust_to_negative_y():
    state = AgentState(p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0),
                       phi=0.2, theta=0.0)
    deriv = continuous_dynamics(
        state, ControlInput(thrust=10.0, phi_ref=0.0, theta_ref=0.0), PARAMS)
    assert deriv[4] == pytest.approx(-10.0 * np.sin(0.2))


def test_damping_opposes_velocity():
    state = AgentState(p=(0.0, 0.0, 1.0), v=(1.0, -2.0, 0.5),
                       phi=0.0, theta=0.0)
    deriv = continuous_dynamics(state, ControlInput.hover(PARAMS), PARAMS)
    assert deriv[3] == pytest.approx(-PARAMS.damp_x * 1.0)
    assert deriv[4] == pytest.approx(-PARAMS.damp_y * -2.0)
    # position derivative is just the velocity
    assert np.allclose(deriv[:3], [1.0, -2.0, 0.5])


def test_single_euler_step_attitude():
    # theta after one 50 ms step toward theta_ref = 0.1:
    # 0 + 0.05 * (0.1 - 0) / 0.5 = 0.01
    state = AgentState.hover_at((0.0, 0.0, 1.0))
    nxt = discrete_step(state, ControlInput(thrust=PARAMS.gravity,
                                            phi_ref=0.0, theta_ref=0.1),
                        PARAMS, 0.05)
    assert nxt.theta == pytest.approx(0.01)


def test_discrete_step_rejects_bad_dt():
    state = AgentState.hover_at((0.0, 0.0, 1.0))
    with pytest.raises(ValueError):
        discrete_step(state, ControlInput.hover(PARAMS), PARAMS, 0.0)


def test_state_validation():
    with pytest.raises(ValueError):
        AgentState(p=(0.0, 0.0), v=(0.0, 0.0, 0.0), phi=0.0, theta=0.0)
    with pytest.raises(ValueError):
        AgentState(p=(0.0, 0.0, 0.0), v=(0.0, 0.0, 0.0), phi=4.0, theta=0.0)
    with pytest.raises(ValueError):
        AgentState(p=(np.nan, 0.0, 0.0), v=(0.0, 0.0, 0.0),
                   phi=0.0, theta=0.0)


def test_model_params_validation():
    with pytest.raises(ValueError):
        ModelParams(tau_phi=0.0)
    with pytest.raises(ValueError):
        ModelParams(gravity=-1.0)
    with pytest.raises(ValueError):
        ModelParams(damp_x=-0.1)


def test_array_round_trips():
    state = AgentState(p=(1.0, 2.0, 3.0), v=(0.1, 0.2, 0.3),
                       phi=0.05, theta=-0.04)
    again = AgentState.from_array(state.as_array())
    assert np.array_equal(again.as_array(), state.as_array())

    inp = ControlInput(thrust=9.0, phi_ref=0.1, theta_ref=-0.2)
    assert np.array_equal(ControlInput.from_array(inp.as_array()).as_array(),
                          inp.as_array())

    fleet = FleetState((state, AgentState.hover_at((0.0, 0.0, 1.0))))
    arr = fleet.as_array()
    assert arr.shape == (2, 8)
    assert np.array_equal(FleetState.from_array(arr).as_array(), arr)


def test_hover_rollout_is_constant():
    fleet = FleetState(tuple(AgentState.hover_at((i, 0.0, 1.0))
                             for i in range(3)))
    inputs = np.tile([PARAMS.gravity, 0.0, 0.0], (3, 10, 1))
    states = rollout(fleet, inputs, PARAMS, horizon=10, dt=0.05)
    assert states.shape == (11, 3, 8)
    for k in range(11):
        assert np.allclose(states[k], fleet.as_array(), atol=1e-14)


def test_rollout_agents_are_decoupled():
    rng = np.random.default_rng(5)
    x0 = rng.normal(0.0, 0.5, (2, 8))
    u = rng.normal(0.0, 0.3, (2, 6, 3))
    u[:, :, 0] += PARAMS.gravity
    joint = rollout(x0, u, PARAMS, horizon=6, dt=0.05)
    solo = rollout(x0[:1], u[:1], PARAMS, horizon=6, dt=0.05)
    assert np.array_equal(joint[:, 0], solo[:, 0])


def test_rollout_matches_scalar_steps():
    rng = np.random.default_rng(6)
    x0 = rng.normal(0.0, 0.4, (1, 8))
    u = rng.normal(0.0, 0.2, (1, 4, 3))
    u[:, :, 0] += PARAMS.gravity
    states = rollout(x0, u, PARAMS, horizon=4, dt=0.05)
    state = AgentState.from_array(x0[0])
    for j in range(4):
        state = discrete_step(state, ControlInput.from_array(u[0, j]),
                              PARAMS, 0.05)
        assert np.allclose(states[j + 1, 0], state.as_array(), atol=1e-13)


def test_rollout_shape_validation():
    x0 = np.zeros((2, 8))
    with pytest.raises(ValueError):
        rollout(x0, np.zeros((2, 5, 3)), PARAMS, horizon=4, dt=0.05)
    with pytest.raises(ValueError):
        rollout(x0, np.zeros((3, 4, 3)), PARAMS, horizon=4, dt=0.05)


def test_step_fleet_matches_discrete_step():
    rng = np.random.default_rng(7)
    x = rng.normal(0.0, 0.5, (3, 8))
    u = rng.normal(0.0, 0.2, (3, 3))
    u[:, 0] += PARAMS.gravity
    stepped = step_fleet(x, u, PARAMS, 0.05)
    for a in range(3):
        ref = discrete_step(AgentState.from_array(x[a]),
                            ControlInput.from_array(u[a]), PARAMS, 0.05)
        assert np.allclose(stepped[a], ref.as_array(), atol=1e-14)


def test_euler_first_order_convergence():
    """Halving dt should roughly halve the one-step defect against a
    fine-grid reference, the signature of a first-order scheme."""
    x0 = np.array([[0.0, 0.0, 1.0, 0.5, -0.2, 0.1, 0.05, -0.03]])
    u = np.array([[11.0, 0.2, -0.1]])

    def integrate(dt, steps):
        x = x0.copy()
        for _ in range(steps):
            x = step_fleet(x, u, PARAMS, dt)
        return x

    fine = integrate(0.1 / 512, 512)         # reference for t = 0.1
    err_coarse = np.max(np.abs(integrate(0.1, 1) - fine))
    err_half = np.max(np.abs(integrate(0.05, 2) - fine))
    ratio = err_coarse / err_half
    assert 1.6 < ratio < 2.4
