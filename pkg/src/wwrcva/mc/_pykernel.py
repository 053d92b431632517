"""Pure-numpy path kernel, vectorised across paths.

Mirrors ``_kernel.pyx`` operation for operation; results agree with the
compiled kernel up to last-ulp differences in libm ``log``/``cos``/``exp``.
"""
from __future__ import annotations

import math

import numpy as np

from . import rng

REFLECTED, FULL_TRUNCATION = 0, 1
FORWARD, SWAP, LOGNORMAL = 0, 1, 2


def simulate_block(
    seed, batch, path_start, n_paths, n_steps, dt, scheme,
    kappa, theta, sigma, y0, jump_rate, jump_mean, rho,
    kind, nu, gamma_v, maturity, v0, drift_steps, out_index,
    out_v, out_y, out_iy,
):
    keys = rng.path_keys(seed, batch, np.arange(path_start, path_start + n_paths, dtype=np.uint64))
    y = np.full(n_paths, y0, dtype=float)
    v = np.full(n_paths, v0 if kind == LOGNORMAL else 0.0)
    iy = np.zeros(n_paths)
    sq_dt = math.sqrt(dt)
    rho_perp = math.sqrt(max(1.0 - rho * rho, 0.0))
    p_zero = math.exp(-jump_rate * dt)

    row = out_index[0]
    if row >= 0:
        out_v[row] = v
        out_y[row] = y
        out_iy[row] = iy

    for i in range(n_steps):
        s = i * dt
        z_l, z_p = rng.normal_pair(keys, i)
        z_v = rho * z_l + rho_perp * z_p

        y_pos = np.maximum(y, 0.0)
        if scheme == REFLECTED:
            y_new = np.abs(y + kappa * (theta - y) * dt + sigma * np.sqrt(dt * y) * z_l)
        else:
            y_new = y + kappa * (theta - y_pos) * dt + sigma * np.sqrt(dt * y_pos) * z_l

        if jump_rate > 0.0:
            y_new += _jumps(keys, i, jump_rate * dt, p_zero, jump_mean)

        if kind == FORWARD:
            v = v + nu * sq_dt * z_v
        elif kind == SWAP:
            ttm = maturity - s
            if ttm <= dt * (1.0 + 1e-9):
                v = np.zeros(n_paths)  # bridge pinned at maturity
            else:
                v = v + (gamma_v * ttm - v / ttm) * dt + nu * sq_dt * z_v
        else:
            v = v * np.exp((drift_steps[i] - 0.5 * nu * nu) * dt + nu * sq_dt * z_v)

        y = y_new
        iy = iy + 0.5 * dt * (y_pos + np.maximum(y, 0.0))

        row = out_index[i + 1]
        if row >= 0:
            out_v[row] = v
            out_y[row] = y
            out_iy[row] = iy


def _jumps(keys, step, mean_count, p_zero, jump_mean):
    """Compound-Poisson increment per path, by inversion of the count."""
    u = rng.uniforms(keys, step, 2)
    out = np.zeros(keys.shape[0])
    active = np.nonzero(u > p_zero)[0]
    if active.size == 0:
        return out
    u = u[active]
    prob = np.full(active.size, p_zero)
    cdf = prob.copy()
    count = np.zeros(active.size, dtype=np.int64)
    n = 0
    while True:
        more = (u > cdf) & (count < rng.MAX_JUMPS_PER_STEP)
        if not more.any():
            break
        n += 1
        prob = prob * (mean_count / n)
        cdf = np.where(more, cdf + prob, cdf)
        count = np.where(more, n, count)
    sub = keys[active]
    total = np.zeros(active.size)
    for k in range(int(count.max())):
        has = count > k
        total = np.where(has, total - jump_mean * np.log(rng.uniforms(sub, step, 3 + k)), total)
    out[active] = total
    return out


def simulate_stats(
    seed, batch, path_start, n_paths, n_steps, dt, scheme,
    kappa, theta, sigma, y0, jump_rate, jump_mean, rho,
    kind, nu, gamma_v, maturity, v0, drift_steps, out_index,
    psi_rows, Psi_rows, sums, sq,
):
    """Add per-grid sums and squared sums of the estimator statistics."""
    n_out = sums.shape[1]
    v, y, iy = (np.empty((n_out, n_paths)) for _ in range(3))
    simulate_block(
        seed, batch, path_start, n_paths, n_steps, dt, scheme,
        kappa, theta, sigma, y0, jump_rate, jump_mean, rho,
        kind, nu, gamma_v, maturity, v0, drift_steps, out_index, v, y, iy,
    )
    lam = np.maximum(y, 0.0) + psi_rows[:, None]
    S = np.exp(-(iy + Psi_rows[:, None]))
    w = lam * S
    vpos = np.maximum(v, 0.0)
    for k, x in enumerate((vpos * w, w, S, lam, v, vpos)):
        sums[k] += x.sum(axis=1)
        sq[k] += (x * x).sum(axis=1)
