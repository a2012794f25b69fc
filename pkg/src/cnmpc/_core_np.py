"""NumPy fallback for the hot kernels.

Mirrors the compiled extension ``cnmpc._core`` function for function; the
two backends are interchangeable and cross-checked in the test suite. All
arrays are C-contiguous float64. Layouts:

* ``x0``        (n_agents, 8)      initial fleet state
* ``u``         (n_agents, N, 3)   input plan, decision-vector order
* ``states``    (n_agents, N+1, 8) rollout output
* ``obstacles`` (n_obs, 5)         rows [cx, cy, cz, radius, height]
* ``model``     (8,)               ModelParams.as_array() packing

Constraint stacking order (the stable contract, also used by the compiled
backend): cylinder terms for (agent, step j=1..N, obstacle), then collision
terms for (pair i<l lexicographic, step j=1..N), then input-rate hinges for
(agent, step j=0..N-1, [phi-, phi+, theta-, theta+]).
"""

from __future__ import annotations

import numpy as np


def rollout(x0, u, dt, model):
    """Forward-Euler trajectory, (n_agents, N+1, 8)."""
    tau_phi, tau_theta, k_phi, k_theta, ax, ay, az, g = model
    na, n, _ = u.shape
    states = np.empty((na, n + 1, 8))
    states[:, 0, :] = x0
    for j in range(n):
        x = states[:, j, :]
        thrust = u[:, j, 0]
        sphi = np.sin(x[:, 6])
        cphi = np.cos(x[:, 6])
        sth = np.sin(x[:, 7])
        cth = np.cos(x[:, 7])
        nxt = states[:, j + 1, :]
        nxt[:, 0:3] = x[:, 0:3] + dt * x[:, 3:6]
        nxt[:, 3] = x[:, 3] + dt * (thrust * sth * cphi - ax * x[:, 3])
        nxt[:, 4] = x[:, 4] + dt * (-thrust * sphi - ay * x[:, 4])
        nxt[:, 5] = x[:, 5] + dt * (thrust * cth * cphi - g - az * x[:, 5])
        nxt[:, 6] = x[:, 6] + dt * (k_phi * u[:, j, 1] - x[:, 6]) / tau_phi
        nxt[:, 7] = x[:, 7] + dt * (k_theta * u[:, j, 2] - x[:, 7]) / tau_theta
    return states


def constraint_count(na, n, n_obs):
    return na * n * n_obs + n * (na * (na - 1) // 2) + 4 * n * na


def constraint_values(states, u, prev_u, obstacles, r_safety, margin_z,
                      dphi_max, dtheta_max):
    """Stacked hinge constraint values F; zero iff the plan is feasible."""
    na, n1, _ = states.shape
    n = n1 - 1
    n_obs = obstacles.shape[0]
    pos = states[:, 1:, 0:3]  # predicted positions, j = 1..N

    blocks = []

    cyl = np.empty((na, n, n_obs))
    for s in range(n_obs):
        cx, cy, cz, radius, height = obstacles[s]
        half = 0.5 * height
        a = np.maximum(pos[:, :, 2] - (cz - half), 0.0)
        b = np.maximum((cz + half) - pos[:, :, 2], 0.0)
        lat = np.maximum(radius * radius
                         - (pos[:, :, 0] - cx) ** 2
                         - (pos[:, :, 1] - cy) ** 2, 0.0)
        cyl[:, :, s] = a * b * lat
    blocks.append(cyl.reshape(-1))

    pair_rows = []
    for i in range(na):
        for l in range(i + 1, na):
            d = pos[i] - pos[l]
            a = np.maximum(d[:, 2] + margin_z, 0.0)
            b = np.maximum(margin_z - d[:, 2], 0.0)
            lat = np.maximum(r_safety * r_safety - d[:, 0] ** 2 - d[:, 1] ** 2, 0.0)
            pair_rows.append(a * b * lat)
    if pair_rows:
        blocks.append(np.concatenate(pair_rows))
    else:
        blocks.append(np.empty(0))

    rate = np.empty((na, n, 4))
    for comp, bound, col in ((1, dphi_max, 0), (2, dtheta_max, 2)):
        prev = np.empty((na, n))
        prev[:, 0] = prev_u[:, comp]
        prev[:, 1:] = u[:, :-1, comp]
        diff = u[:, :, comp] - prev
        rate[:, :, col] = np.maximum(-diff - bound, 0.0)      # prev - cur - bound
        rate[:, :, col + 1] = np.maximum(diff - bound, 0.0)   # cur - prev - bound
    blocks.append(rate.reshape(-1))

    return np.concatenate(blocks)


def penalized_value_grad(x0, u, prev_u, x_ref, u_ref, q_x, q_u, q_du,
                         obstacles, r_safety, margin_z, dphi_max, dtheta_max,
                         model, dt, c):
    """Value and exact gradient of cost + c * ||F||^2 w.r.t. the input plan.

    The gradient is propagated through the Euler rollout with a per-agent
    adjoint recursion; returns ``(value, grad)`` with grad shaped like ``u``.
    """
    tau_phi, tau_theta, k_phi, k_theta, ax, ay, az, g = model
    na, n, _ = u.shape
    states = rollout(x0, u, dt, model)

    # quadratic tracking / input / input-rate costs
    e = states[:, 1:, :] - x_ref[:, None, :]
    value = float(np.einsum("ijk,k,ijk->", e, q_x, e))
    eu = u - u_ref
    du = np.empty_like(u)
    du[:, 0, :] = u[:, 0, :] - prev_u
    du[:, 1:, :] = u[:, 1:, :] - u[:, :-1, :]
    value += float(np.einsum("ijk,k,ijk->", eu, q_u, eu))
    value += float(np.einsum("ijk,k,ijk->", du, q_du, du))

    g_state = np.zeros_like(states)          # direct d/d(state)
    g_state[:, 1:, :] = 2.0 * q_x * e
    grad = 2.0 * q_u * eu                    # direct d/d(input)
    rate_term = 2.0 * q_du * du
    grad += rate_term
    grad[:, :-1, :] -= rate_term[:, 1:, :]

    # penalty on the hinge constraints: value += c * sum(F^2), plus the
    # matching position/input gradient contributions
    pos = states[:, 1:, 0:3]
    gpos = g_state[:, 1:, 0:3]
    pen = 0.0

    for s in range(obstacles.shape[0]):
        cx, cy, cz, radius, height = obstacles[s]
        half = 0.5 * height
        dxl = pos[:, :, 0] - cx
        dyl = pos[:, :, 1] - cy
        a = np.maximum(pos[:, :, 2] - (cz - half), 0.0)
        b = np.maximum((cz + half) - pos[:, :, 2], 0.0)
        lat = np.maximum(radius * radius - dxl * dxl - dyl * dyl, 0.0)
        f = a * b * lat
        pen += float(np.dot(f.reshape(-1), f.reshape(-1)))
        two_cf = (2.0 * c) * f
        gpos[:, :, 0] += two_cf * a * b * (-2.0 * dxl)
        gpos[:, :, 1] += two_cf * a * b * (-2.0 * dyl)
        gpos[:, :, 2] += two_cf * lat * (b - a)

    for i in range(na):
        for l in range(i + 1, na):
            d = pos[i] - pos[l]
            a = np.maximum(d[:, 2] + margin_z, 0.0)
            b = np.maximum(margin_z - d[:, 2], 0.0)
            lat = np.maximum(r_safety * r_safety - d[:, 0] ** 2 - d[:, 1] ** 2, 0.0)
            f = a * b * lat
            pen += float(np.dot(f, f))
            two_cf = (2.0 * c) * f
            gx = two_cf * a * b * (-2.0 * d[:, 0])
            gy = two_cf * a * b * (-2.0 * d[:, 1])
            gz = two_cf * lat * (b - a)
            gpos[i, :, 0] += gx
            gpos[i, :, 1] += gy
            gpos[i, :, 2] += gz
            gpos[l, :, 0] -= gx
            gpos[l, :, 1] -= gy
            gpos[l, :, 2] -= gz

    for comp, bound in ((1, dphi_max), (2, dtheta_max)):
        prev = np.empty((na, n))
        prev[:, 0] = prev_u[:, comp]
        prev[:, 1:] = u[:, :-1, comp]
        diff = u[:, :, comp] - prev
        hm = np.maximum(-diff - bound, 0.0)
        hp = np.maximum(diff - bound, 0.0)
        pen += float(np.dot(hm.reshape(-1), hm.reshape(-1)))
        pen += float(np.dot(hp.reshape(-1), hp.reshape(-1)))
        gdiff = (2.0 * c) * (hp - hm)
        grad[:, :, comp] += gdiff
        grad[:, :-1, comp] -= gdiff[:, 1:]

    value += c * pen

    # adjoint sweep: back-propagate per-state gradients through the rollout
    lam = g_state[:, n, :].copy()
    new_lam = np.empty_like(lam)
    for j in range(n - 1, -1, -1):
        x = states[:, j, :]
        thrust = u[:, j, 0]
        sphi = np.sin(x[:, 6])
        cphi = np.cos(x[:, 6])
        sth = np.sin(x[:, 7])
        cth = np.cos(x[:, 7])
        grad[:, j, 0] += dt * (lam[:, 3] * sth * cphi
                               - lam[:, 4] * sphi
                               + lam[:, 5] * cth * cphi)
        grad[:, j, 1] += dt * lam[:, 6] * (k_phi / tau_phi)
        grad[:, j, 2] += dt * lam[:, 7] * (k_theta / tau_theta)
        if j == 0:
            break
        new_lam[:, 0:3] = g_state[:, j, 0:3] + lam[:, 0:3]
        new_lam[:, 3] = g_state[:, j, 3] + dt * lam[:, 0] + (1.0 - dt * ax) * lam[:, 3]
        new_lam[:, 4] = g_state[:, j, 4] + dt * lam[:, 1] + (1.0 - dt * ay) * lam[:, 4]
        new_lam[:, 5] = g_state[:, j, 5] + dt * lam[:, 2] + (1.0 - dt * az) * lam[:, 5]
        new_lam[:, 6] = (g_state[:, j, 6] + (1.0 - dt / tau_phi) * lam[:, 6]
                         + dt * thrust * (-sth * sphi * lam[:, 3]
                                          - cphi * lam[:, 4]
                                          - cth * sphi * lam[:, 5]))
        new_lam[:, 7] = (g_state[:, j, 7] + (1.0 - dt / tau_theta) * lam[:, 7]
                         + dt * thrust * (cth * cphi * lam[:, 3]
                                          - sth * cphi * lam[:, 5]))
        lam, new_lam = new_lam, lam
    return value, grad
