"""Compiled RK4 forward sweep and its discrete adjoint.

Parameters travel as a flat float64 array in the order of ``PARAM_ORDER``;
states are rows of an ``(n_nodes, 8)`` array with columns
``s_h, e_h, i_h, r_h, a_m, s_m, e_m, i_m``.
"""

import numpy as np
from numba import njit

PARAM_ORDER = (
    "N_h", "B", "beta_mh", "beta_hm", "mu_h", "eta_h", "mu_m",
    "phi", "mu_A", "eta_A", "eta_m", "nu_h", "m", "k",
)
N_STATES = 8


@njit(cache=True)
def rhs_into(y, c, p, out):
    B, bmh, bhm = p[1], p[2], p[3]
    muh, etah, mum = p[4], p[5], p[6]
    phi, muA, etaA, etam, nuh = p[7], p[8], p[9], p[10], p[11]
    m, k = p[12], p[13]
    sh, eh, ih, rh, am, sm, em, im = y[0], y[1], y[2], y[3], y[4], y[5], y[6], y[7]

    force_h = B * bmh * m * im
    force_m = B * bhm * ih
    out[0] = muh - (force_h + muh) * sh
    out[1] = force_h * sh - (nuh + muh) * eh
    out[2] = nuh * eh - (etah + muh) * ih
    out[3] = etah * ih - muh * rh
    out[4] = phi * m / k * (1.0 - am) * (sm + em + im) - (etaA + muA) * am
    out[5] = etaA * k / m * am - (force_m + mum) * sm - c * sm
    out[6] = force_m * sm - (mum + etam) * em - c * em
    out[7] = etam * em - mum * im - c * im


@njit(cache=True)
def rhs_vjp_into(y, c, p, v, out):
    """``out = J(y)^T v`` and return ``v . df/dc``."""
    B, bmh, bhm = p[1], p[2], p[3]
    muh, etah, mum = p[4], p[5], p[6]
    phi, muA, etaA, etam, nuh = p[7], p[8], p[9], p[10], p[11]
    m, k = p[12], p[13]
    sh, ih, am, sm, em, im = y[0], y[2], y[4], y[5], y[6], y[7]

    a = B * bmh * m
    b = B * bhm
    q = phi * m / k
    adult = sm + em + im
    hatch = q * (1.0 - am)

    out[0] = -(a * im + muh) * v[0] + a * im * v[1]
    out[1] = -(nuh + muh) * v[1] + nuh * v[2]
    out[2] = -(etah + muh) * v[2] + etah * v[3] + b * sm * (v[6] - v[5])
    out[3] = -muh * v[3]
    out[4] = -(q * adult + etaA + muA) * v[4] + etaA * k / m * v[5]
    out[5] = hatch * v[4] - (b * ih + mum + c) * v[5] + b * ih * v[6]
    out[6] = hatch * v[4] - (mum + etam + c) * v[6] + etam * v[7]
    out[7] = a * sh * (v[1] - v[0]) + hatch * v[4] - (mum + c) * v[7]
    return -(sm * v[5] + em * v[6] + im * v[7])


@njit(cache=True)
def rk4_forward(y0, control, p, h):
    n = control.shape[0]
    ys = np.empty((n, N_STATES))
    ys[0, :] = y0
    k1 = np.empty(N_STATES)
    k2 = np.empty(N_STATES)
    k3 = np.empty(N_STATES)
    k4 = np.empty(N_STATES)
    tmp = np.empty(N_STATES)
    for i in range(n - 1):
        y = ys[i]
        c0 = control[i]
        c1 = control[i + 1]
        cm = 0.5 * (c0 + c1)
        rhs_into(y, c0, p, k1)
        for j in range(N_STATES):
            tmp[j] = y[j] + 0.5 * h * k1[j]
        rhs_into(tmp, cm, p, k2)
        for j in range(N_STATES):
            tmp[j] = y[j] + 0.5 * h * k2[j]
        rhs_into(tmp, cm, p, k3)
        for j in range(N_STATES):
            tmp[j] = y[j] + h * k3[j]
        rhs_into(tmp, c1, p, k4)
        for j in range(N_STATES):
            ys[i + 1, j] = y[j] + h / 6.0 * (k1[j] + 2.0 * k2[j] + 2.0 * k3[j] + k4[j])
    return ys


@njit(cache=True)
def rk4_adjoint(ys, control, p, h, seed):
    """Gradient of ``sum_n seed[n, :] . ys[n, :]`` with respect to the control nodes.

    Differentiates the discrete RK4 map exactly, stage by stage, so the result
    matches finite differences of ``rk4_forward`` to round-off.
    """
    n = control.shape[0]
    grad = np.zeros(n)
    lam = np.empty(N_STATES)
    lam[:] = seed[n - 1]

    k1 = np.empty(N_STATES)
    k2 = np.empty(N_STATES)
    k3 = np.empty(N_STATES)
    Y2 = np.empty(N_STATES)
    Y3 = np.empty(N_STATES)
    Y4 = np.empty(N_STATES)
    ak1 = np.empty(N_STATES)
    ak2 = np.empty(N_STATES)
    ak3 = np.empty(N_STATES)
    ak4 = np.empty(N_STATES)
    aY = np.empty(N_STATES)

    for i in range(n - 2, -1, -1):
        y = ys[i]
        c0 = control[i]
        c1 = control[i + 1]
        cm = 0.5 * (c0 + c1)
        # recompute stage states of step i
        rhs_into(y, c0, p, k1)
        for j in range(N_STATES):
            Y2[j] = y[j] + 0.5 * h * k1[j]
        rhs_into(Y2, cm, p, k2)
        for j in range(N_STATES):
            Y3[j] = y[j] + 0.5 * h * k2[j]
        rhs_into(Y3, cm, p, k3)
        for j in range(N_STATES):
            Y4[j] = y[j] + h * k3[j]

        for j in range(N_STATES):
            ak4[j] = h / 6.0 * lam[j]
            ak3[j] = h / 3.0 * lam[j]
            ak2[j] = h / 3.0 * lam[j]
            ak1[j] = h / 6.0 * lam[j]
        # lam now accumulates the adjoint of y_i
        g_end = rhs_vjp_into(Y4, c1, p, ak4, aY)
        for j in range(N_STATES):
            ak3[j] += h * aY[j]
            lam[j] += aY[j]
        g_mid = rhs_vjp_into(Y3, cm, p, ak3, aY)
        for j in range(N_STATES):
            ak2[j] += 0.5 * h * aY[j]
            lam[j] += aY[j]
        g_mid += rhs_vjp_into(Y2, cm, p, ak2, aY)
        for j in range(N_STATES):
            ak1[j] += 0.5 * h * aY[j]
            lam[j] += aY[j]
        g_start = rhs_vjp_into(y, c0, p, ak1, aY)
        for j in range(N_STATES):
            lam[j] += aY[j] + seed[i, j]

        grad[i] += g_start + 0.5 * g_mid
        grad[i + 1] += g_end + 0.5 * g_mid
    return grad
