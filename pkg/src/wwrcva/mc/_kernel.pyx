# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path kernel: one path at a time, GIL released.

Same arithmetic and draw layout as ``_pykernel.simulate_block``.
"""
from libc.math cimport sqrt, log, cos, sin, exp, fabs, M_PI
from libc.stdint cimport uint64_t, int64_t

# statistic rows of ``simulate_stats`` (same order as ``wwrcva.mc.STATS``)
cdef enum:
    ST_VPOS_W = 0
    ST_W = 1
    ST_S = 2
    ST_LAM = 3
    ST_V = 4
    ST_VPOS = 5

cdef enum:
    SLOTS_SHIFT = 8
    MAX_JUMPS = 253

cdef uint64_t GOLDEN = 0x9E3779B97F4A7C15ULL


cdef inline uint64_t mix64(uint64_t z) noexcept nogil:
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL
    return z ^ (z >> 31)


cdef inline double uniform(uint64_t key, Py_ssize_t step, int slot) noexcept nogil:
    cdef uint64_t counter = ((<uint64_t>step) << SLOTS_SHIFT) | <uint64_t>slot
    cdef uint64_t z = mix64(key + counter * GOLDEN)
    return (<double>(z >> 11) + 0.5) * 1.1102230246251565e-16


cdef inline double jump_increment(uint64_t key, Py_ssize_t step, double mean_count,
                                  double p_zero, double jump_mean) noexcept nogil:
    cdef double u = uniform(key, step, 2)
    cdef double prob = p_zero
    cdef double cdf = p_zero
    cdef int n = 0
    cdef int k
    cdef double total = 0.0
    while u > cdf and n < MAX_JUMPS:
        n += 1
        prob = prob * (mean_count / n)
        cdf = cdf + prob
    for k in range(n):
        total = total - jump_mean * log(uniform(key, step, 3 + k))
    return total


def simulate_block(
    uint64_t seed, uint64_t batch, Py_ssize_t path_start, Py_ssize_t n_paths,
    Py_ssize_t n_steps, double dt, int scheme,
    double kappa, double theta, double sigma, double y0,
    double jump_rate, double jump_mean, double rho,
    int kind, double nu, double gamma_v, double maturity, double v0,
    const double[::1] drift_steps, const int64_t[::1] out_index,
    double[:, ::1] out_v, double[:, ::1] out_y, double[:, ::1] out_iy,
):
    cdef Py_ssize_t p, i
    cdef int64_t row
    cdef uint64_t base, key
    cdef double y, v, iy, y_pos, y_new, s, ttm
    cdef double u1, u2, r, ang, z_l, z_p, z_v
    cdef double sq_dt = sqrt(dt)
    cdef double rho_perp = sqrt(1.0 - rho * rho) if rho * rho < 1.0 else 0.0
    cdef double p_zero = exp(-jump_rate * dt)
    cdef double mean_count = jump_rate * dt

    base = mix64(mix64(seed) ^ batch)
    with nogil:
        for p in range(n_paths):
            key = mix64(base ^ <uint64_t>(path_start + p))
            y = y0
            v = v0 if kind == 2 else 0.0
            iy = 0.0
            row = out_index[0]
            if row >= 0:
                out_v[row, p] = v
                out_y[row, p] = y
                out_iy[row, p] = iy
            for i in range(n_steps):
                s = i * dt
                u1 = uniform(key, i, 0)
                u2 = uniform(key, i, 1)
                r = sqrt(-2.0 * log(u1))
                ang = 2.0 * M_PI * u2
                z_l = r * cos(ang)
                z_p = r * sin(ang)
                z_v = rho * z_l + rho_perp * z_p

                y_pos = y if y > 0.0 else 0.0
                if scheme == 0:
                    y_new = fabs(y + kappa * (theta - y) * dt + sigma * sqrt(dt * y) * z_l)
                else:
                    y_new = y + kappa * (theta - y_pos) * dt + sigma * sqrt(dt * y_pos) * z_l
                if jump_rate > 0.0:
                    y_new = y_new + jump_increment(key, i, mean_count, p_zero, jump_mean)

                if kind == 0:
                    v = v + nu * sq_dt * z_v
                elif kind == 1:
                    ttm = maturity - s
                    if ttm <= dt * (1.0 + 1e-9):
                        v = 0.0
                    else:
                        v = v + (gamma_v * ttm - v / ttm) * dt + nu * sq_dt * z_v
                else:
                    v = v * exp((drift_steps[i] - 0.5 * nu * nu) * dt + nu * sq_dt * z_v)

                y = y_new
                iy = iy + 0.5 * dt * (y_pos + (y if y > 0.0 else 0.0))

                row = out_index[i + 1]
                if row >= 0:
                    out_v[row, p] = v
                    out_y[row, p] = y
                    out_iy[row, p] = iy


cdef inline void accumulate(double[:, ::1] sums, double[:, ::1] sq, int64_t row,
                            double v, double y, double iy, double psi, double Psi) noexcept nogil:
    cdef double lam = (y if y > 0.0 else 0.0) + psi
    cdef double S = exp(-(iy + Psi))
    cdef double w = lam * S
    cdef double vpos = v if v > 0.0 else 0.0
    cdef double vw = vpos * w
    sums[ST_VPOS_W, row] += vw
    sq[ST_VPOS_W, row] += vw * vw
    sums[ST_W, row] += w
    sq[ST_W, row] += w * w
    sums[ST_S, row] += S
    sq[ST_S, row] += S * S
    sums[ST_LAM, row] += lam
    sq[ST_LAM, row] += lam * lam
    sums[ST_V, row] += v
    sq[ST_V, row] += v * v
    sums[ST_VPOS, row] += vpos
    sq[ST_VPOS, row] += vpos * vpos


def simulate_stats(
    uint64_t seed, uint64_t batch, Py_ssize_t path_start, Py_ssize_t n_paths,
    Py_ssize_t n_steps, double dt, int scheme,
    double kappa, double theta, double sigma, double y0,
    double jump_rate, double jump_mean, double rho,
    int kind, double nu, double gamma_v, double maturity, double v0,
    const double[::1] drift_steps, const int64_t[::1] out_index,
    const double[::1] psi_rows, const double[::1] Psi_rows,
    double[:, ::1] sums, double[:, ::1] sq,
):
    """Fused simulation and reduction: adds per-grid sums and squared sums."""
    cdef Py_ssize_t p, i
    cdef int64_t row
    cdef uint64_t base, key
    cdef double y, v, iy, y_pos, y_new, s, ttm
    cdef double u1, u2, r, ang, z_l, z_p, z_v
    cdef double sq_dt = sqrt(dt)
    cdef double rho_perp = sqrt(1.0 - rho * rho) if rho * rho < 1.0 else 0.0
    cdef double p_zero = exp(-jump_rate * dt)
    cdef double mean_count = jump_rate * dt

    base = mix64(mix64(seed) ^ batch)
    with nogil:
        for p in range(n_paths):
            key = mix64(base ^ <uint64_t>(path_start + p))
            y = y0
            v = v0 if kind == 2 else 0.0
            iy = 0.0
            row = out_index[0]
            if row >= 0:
                accumulate(sums, sq, row, v, y, iy, psi_rows[row], Psi_rows[row])
            for i in range(n_steps):
                s = i * dt
                u1 = uniform(key, i, 0)
                u2 = uniform(key, i, 1)
                r = sqrt(-2.0 * log(u1))
                ang = 2.0 * M_PI * u2
                z_l = r * cos(ang)
                z_p = r * sin(ang)
                z_v = rho * z_l + rho_perp * z_p

                y_pos = y if y > 0.0 else 0.0
                if scheme == 0:
                    y_new = fabs(y + kappa * (theta - y) * dt + sigma * sqrt(dt * y) * z_l)
                else:
                    y_new = y + kappa * (theta - y_pos) * dt + sigma * sqrt(dt * y_pos) * z_l
                if jump_rate > 0.0:
                    y_new = y_new + jump_increment(key, i, mean_count, p_zero, jump_mean)

                if kind == 0:
                    v = v + nu * sq_dt * z_v
                elif kind == 1:
                    ttm = maturity - s
                    if ttm <= dt * (1.0 + 1e-9):
                        v = 0.0
                    else:
                        v = v + (gamma_v * ttm - v / ttm) * dt + nu * sq_dt * z_v
                else:
                    v = v * exp((drift_steps[i] - 0.5 * nu * nu) * dt + nu * sq_dt * z_v)

                y = y_new
                iy = iy + 0.5 * dt * (y_pos + (y if y > 0.0 else 0.0))

                row = out_index[i + 1]
                if row >= 0:
                    accumulate(sums, sq, row, v, y, iy, psi_rows[row], Psi_rows[row])
