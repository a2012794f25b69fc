# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twin of cnmpc._core_np; see that module for layouts and the
constraint stacking order. Plain loops over agents/steps, no allocation in
the inner loops beyond the returned arrays and small scratch buffers."""

import numpy as np

cimport numpy as cnp
from libc.math cimport cos, sin

cnp.import_array()


cdef inline double hinge(double x) nogil:
    return x if x > 0.0 else 0.0


cdef void _rollout_into(double[:, ::1] x0, double[:, :, ::1] u, double dt,
                        double[::1] model, double[:, :, ::1] states) nogil:
    cdef double tau_phi = model[0], tau_theta = model[1]
    cdef double k_phi = model[2], k_theta = model[3]
    cdef double ax = model[4], ay = model[5], az = model[6], g = model[7]
    cdef Py_ssize_t na = u.shape[0], n = u.shape[1]
    cdef Py_ssize_t i, j, k
    cdef double thrust, sphi, cphi, sth, cth
    for i in range(na):
        for k in range(8):
            states[i, 0, k] = x0[i, k]
        for j in range(n):
            thrust = u[i, j, 0]
            sphi = sin(states[i, j, 6])
            cphi = cos(states[i, j, 6])
            sth = sin(states[i, j, 7])
            cth = cos(states[i, j, 7])
            states[i, j + 1, 0] = states[i, j, 0] + dt * states[i, j, 3]
            states[i, j + 1, 1] = states[i, j, 1] + dt * states[i, j, 4]
            states[i, j + 1, 2] = states[i, j, 2] + dt * states[i, j, 5]
            states[i, j + 1, 3] = states[i, j, 3] + dt * (thrust * sth * cphi - ax * states[i, j, 3])
            states[i, j + 1, 4] = states[i, j, 4] + dt * (-thrust * sphi - ay * states[i, j, 4])
            states[i, j + 1, 5] = states[i, j, 5] + dt * (thrust * cth * cphi - g - az * states[i, j, 5])
            states[i, j + 1, 6] = states[i, j, 6] + dt * (k_phi * u[i, j, 1] - states[i, j, 6]) / tau_phi
            states[i, j + 1, 7] = states[i, j, 7] + dt * (k_theta * u[i, j, 2] - states[i, j, 7]) / tau_theta


def rollout(double[:, ::1] x0, double[:, :, ::1] u, double dt, double[::1] model):
    """Forward-Euler trajectory, (n_agents, N+1, 8)."""
    cdef Py_ssize_t na = u.shape[0], n = u.shape[1]
    out = np.empty((na, n + 1, 8))
    cdef double[:, :, ::1] states = out
    _rollout_into(x0, u, dt, model, states)
    return out


def constraint_values(double[:, :, ::1] states, double[:, :, ::1] u,
                      double[:, ::1] prev_u, double[:, ::1] obstacles,
                      double r_safety, double margin_z,
                      double dphi_max, double dtheta_max):
    """Stacked hinge constraint values F; zero iff the plan is feasible."""
    cdef Py_ssize_t na = states.shape[0], n = states.shape[1] - 1
    cdef Py_ssize_t n_obs = obstacles.shape[0]
    cdef Py_ssize_t m = na * n * n_obs + n * (na * (na - 1) // 2) + 4 * n * na
    out = np.empty(m)
    cdef double[::1] f = out
    cdef Py_ssize_t i, l, j, s, idx = 0
    cdef double cxo, cyo, czo, radius, half, a, b, lat, dxl, dyl, dz
    cdef double prev, diff, rsq = r_safety * r_safety

    for i in range(na):
        for j in range(1, n + 1):
            for s in range(n_obs):
                cxo = obstacles[s, 0]
                cyo = obstacles[s, 1]
                czo = obstacles[s, 2]
                radius = obstacles[s, 3]
                half = 0.5 * obstacles[s, 4]
                a = hinge(states[i, j, 2] - (czo - half))
                b = hinge((czo + half) - states[i, j, 2])
                dxl = states[i, j, 0] - cxo
                dyl = states[i, j, 1] - cyo
                lat = hinge(radius * radius - dxl * dxl - dyl * dyl)
                f[idx] = a * b * lat
                idx += 1

    for i in range(na):
        for l in range(i + 1, na):
            for j in range(1, n + 1):
                dz = states[i, j, 2] - states[l, j, 2]
                a = hinge(dz + margin_z)
                b = hinge(margin_z - dz)
                dxl = states[i, j, 0] - states[l, j, 0]
                dyl = states[i, j, 1] - states[l, j, 1]
                lat = hinge(rsq - dxl * dxl - dyl * dyl)
                f[idx] = a * b * lat
                idx += 1

    for i in range(na):
        for j in range(n):
            prev = prev_u[i, 1] if j == 0 else u[i, j - 1, 1]
            diff = u[i, j, 1] - prev
            f[idx] = hinge(-diff - dphi_max)
            f[idx + 1] = hinge(diff - dphi_max)
            prev = prev_u[i, 2] if j == 0 else u[i, j - 1, 2]
            diff = u[i, j, 2] - prev
            f[idx + 2] = hinge(-diff - dtheta_max)
            f[idx + 3] = hinge(diff - dtheta_max)
            idx += 4
    return out


def penalized_value_grad(double[:, ::1] x0, double[:, :, ::1] u,
                         double[:, ::1] prev_u, double[:, ::1] x_ref,
                         double[::1] u_ref, double[::1] q_x, double[::1] q_u,
                         double[::1] q_du, double[:, ::1] obstacles,
                         double r_safety, double margin_z,
                         double dphi_max, double dtheta_max,
                         double[::1] model, double dt, double c):
    """Value and exact gradient of cost + c * ||F||^2 w.r.t. the input plan."""
    cdef double tau_phi = model[0], tau_theta = model[1]
    cdef double k_phi = model[2], k_theta = model[3]
    cdef double ax = model[4], ay = model[5], az = model[6]
    cdef Py_ssize_t na = u.shape[0], n = u.shape[1]
    cdef Py_ssize_t i, l, j, k, s

    states_arr = np.empty((na, n + 1, 8))
    cdef double[:, :, ::1] states = states_arr
    _rollout_into(x0, u, dt, model, states)

    grad_arr = np.zeros((na, n, 3))
    cdef double[:, :, ::1] grad = grad_arr
    g_state_arr = np.zeros((na, n + 1, 8))
    cdef double[:, :, ::1] g_state = g_state_arr
    lam_arr = np.empty((na, 8))
    cdef double[:, ::1] lam = lam_arr

    cdef double value = 0.0, pen = 0.0
    cdef double e, d0, prev, diff, hm, hp, gdiff
    cdef double cxo, cyo, czo, radius, half, a, b, lat, dxl, dyl, dz
    cdef double fval, two_cf, gx, gy, gz
    cdef double rsq = r_safety * r_safety
    cdef double thrust, sphi, cphi, sth, cth
    cdef double l0, l1, l2, l3, l4, l5, l6, l7

    # tracking, input, and input-rate quadratic costs with direct gradients
    for i in range(na):
        for j in range(1, n + 1):
            for k in range(8):
                e = states[i, j, k] - x_ref[i, k]
                value += q_x[k] * e * e
                g_state[i, j, k] = 2.0 * q_x[k] * e
        for j in range(n):
            for k in range(3):
                e = u[i, j, k] - u_ref[k]
                value += q_u[k] * e * e
                grad[i, j, k] += 2.0 * q_u[k] * e
                d0 = u[i, j, k] - (prev_u[i, k] if j == 0 else u[i, j - 1, k])
                value += q_du[k] * d0 * d0
                grad[i, j, k] += 2.0 * q_du[k] * d0
                if j > 0:
                    grad[i, j - 1, k] -= 2.0 * q_du[k] * d0

    # cylinder obstacle hinges
    for i in range(na):
        for j in range(1, n + 1):
            for s in range(obstacles.shape[0]):
                cxo = obstacles[s, 0]
                cyo = obstacles[s, 1]
                czo = obstacles[s, 2]
                radius = obstacles[s, 3]
                half = 0.5 * obstacles[s, 4]
                a = hinge(states[i, j, 2] - (czo - half))
                b = hinge((czo + half) - states[i, j, 2])
                dxl = states[i, j, 0] - cxo
                dyl = states[i, j, 1] - cyo
                lat = hinge(radius * radius - dxl * dxl - dyl * dyl)
                fval = a * b * lat
                if fval > 0.0:
                    pen += fval * fval
                    two_cf = 2.0 * c * fval
                    g_state[i, j, 0] += two_cf * a * b * (-2.0 * dxl)
                    g_state[i, j, 1] += two_cf * a * b * (-2.0 * dyl)
                    g_state[i, j, 2] += two_cf * lat * (b - a)

    # inter-agent collision hinges
    for i in range(na):
        for l in range(i + 1, na):
            for j in range(1, n + 1):
                dz = states[i, j, 2] - states[l, j, 2]
                a = hinge(dz + margin_z)
                b = hinge(margin_z - dz)
                dxl = states[i, j, 0] - states[l, j, 0]
                dyl = states[i, j, 1] - states[l, j, 1]
                lat = hinge(rsq - dxl * dxl - dyl * dyl)
                fval = a * b * lat
                if fval > 0.0:
                    pen += fval * fval
                    two_cf = 2.0 * c * fval
                    gx = two_cf * a * b * (-2.0 * dxl)
                    gy = two_cf * a * b * (-2.0 * dyl)
                    gz = two_cf * lat * (b - a)
                    g_state[i, j, 0] += gx
                    g_state[i, j, 1] += gy
                    g_state[i, j, 2] += gz
                    g_state[l, j, 0] -= gx
                    g_state[l, j, 1] -= gy
                    g_state[l, j, 2] -= gz

    # input-rate hinges act on the decision variables directly
    for i in range(na):
        for j in range(n):
            for k in range(1, 3):
                prev = prev_u[i, k] if j == 0 else u[i, j - 1, k]
                diff = u[i, j, k] - prev
                d0 = dphi_max if k == 1 else dtheta_max
                hm = hinge(-diff - d0)
                hp = hinge(diff - d0)
                if hm > 0.0 or hp > 0.0:
                    pen += hm * hm + hp * hp
                    gdiff = 2.0 * c * (hp - hm)
                    grad[i, j, k] += gdiff
                    if j > 0:
                        grad[i, j - 1, k] -= gdiff

    value += c * pen

    # adjoint sweep
    for i in range(na):
        for k in range(8):
            lam[i, k] = g_state[i, n, k]
    for j in range(n - 1, -1, -1):
        for i in range(na):
            thrust = u[i, j, 0]
            sphi = sin(states[i, j, 6])
            cphi = cos(states[i, j, 6])
            sth = sin(states[i, j, 7])
            cth = cos(states[i, j, 7])
            grad[i, j, 0] += dt * (lam[i, 3] * sth * cphi
                                   - lam[i, 4] * sphi
                                   + lam[i, 5] * cth * cphi)
            grad[i, j, 1] += dt * lam[i, 6] * (k_phi / tau_phi)
            grad[i, j, 2] += dt * lam[i, 7] * (k_theta / tau_theta)
            if j == 0:
                continue
            l0 = lam[i, 0]
            l1 = lam[i, 1]
            l2 = lam[i, 2]
            l3 = lam[i, 3]
            l4 = lam[i, 4]
            l5 = lam[i, 5]
            l6 = lam[i, 6]
            l7 = lam[i, 7]
            lam[i, 0] = g_state[i, j, 0] + l0
            lam[i, 1] = g_state[i, j, 1] + l1
            lam[i, 2] = g_state[i, j, 2] + l2
            lam[i, 3] = g_state[i, j, 3] + dt * l0 + (1.0 - dt * ax) * l3
            lam[i, 4] = g_state[i, j, 4] + dt * l1 + (1.0 - dt * ay) * l4
            lam[i, 5] = g_state[i, j, 5] + dt * l2 + (1.0 - dt * az) * l5
            lam[i, 6] = (g_state[i, j, 6] + (1.0 - dt / tau_phi) * l6
                         + dt * thrust * (-sth * sphi * l3 - cphi * l4 - cth * sphi * l5))
            lam[i, 7] = (g_state[i, j, 7] + (1.0 - dt / tau_theta) * l7
                         + dt * thrust * (cth * cphi * l3 - sth * cphi * l5))
    return value, grad_arr


def constraint_count(na, n, n_obs):
    return na * n * n_obs + n * (na * (na - 1) // 2) + 4 * n * na
