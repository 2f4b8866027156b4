"""Compiled inner loops for the SCA position update and the bisection.

They mirror ``position.sca_batch`` and ``projection._bisect`` line by line;
the numpy versions remain the reference and the tests compare both.
"""

import math

import numpy as np
from numba import njit

_ROUNDOFF = 1e-12


@njit(cache=True)
def _g(x, y, kappa, pair_amp, pair_phase, pair_dirs, path_amp, path_phase, dirs, const):
    val = const
    for p in range(pair_amp.size):
        arg = kappa * (pair_dirs[p, 0] * x + pair_dirs[p, 1] * y) + pair_phase[p]
        val += 2.0 * pair_amp[p] * math.cos(arg)
    for l in range(path_amp.size):
        arg = kappa * (dirs[l, 0] * x + dirs[l, 1] * y) + path_phase[l]
        val -= 2.0 * path_amp[l] * math.cos(arg)
    return val


@njit(cache=True)
def _grad(x, y, kappa, pair_amp, pair_phase, pair_dirs, path_amp, path_phase, dirs):
    gx = 0.0
    gy = 0.0
    for p in range(pair_amp.size):
        arg = kappa * (pair_dirs[p, 0] * x + pair_dirs[p, 1] * y) + pair_phase[p]
        s = -2.0 * kappa * pair_amp[p] * math.sin(arg)
        gx += s * pair_dirs[p, 0]
        gy += s * pair_dirs[p, 1]
    for l in range(path_amp.size):
        arg = kappa * (dirs[l, 0] * x + dirs[l, 1] * y) + path_phase[l]
        s = 2.0 * kappa * path_amp[l] * math.sin(arg)
        gx += s * dirs[l, 0]
        gy += s * dirs[l, 1]
    return gx, gy


@njit(cache=True)
def sca_loop(u, lower, upper, delta, kappa, pair_amp, pair_phase, pair_dirs,
             path_amp, path_phase, dirs, const, max_iters, rel_tol):
    """In-place SCA on ``u`` (M, 2). Returns (iterations, backtracks)."""
    iters = 0
    backtracks = 0
    for m in range(u.shape[0]):
        if delta[m] <= 0.0 or (upper[m, 0] <= lower[m, 0] and upper[m, 1] <= lower[m, 1]):
            continue
        dm = delta[m]
        x = min(max(u[m, 0], lower[m, 0]), upper[m, 0])
        y = min(max(u[m, 1], lower[m, 1]), upper[m, 1])
        g = _g(x, y, kappa, pair_amp[m], pair_phase[m], pair_dirs[m],
               path_amp[m], path_phase[m], dirs[m], const[m])
        for _ in range(max_iters):
            iters += 1
            gx, gy = _grad(x, y, kappa, pair_amp[m], pair_phase[m], pair_dirs[m],
                           path_amp[m], path_phase[m], dirs[m])
            cx = min(max(x - gx / dm, lower[m, 0]), upper[m, 0])
            cy = min(max(y - gy / dm, lower[m, 1]), upper[m, 1])
            g_new = _g(cx, cy, kappa, pair_amp[m], pair_phase[m], pair_dirs[m],
                       path_amp[m], path_phase[m], dirs[m], const[m])
            if g_new > g + _ROUNDOFF * abs(const[m]):
                dm *= 2.0
                backtracks += 1
                continue
            dec = (g - g_new) / max(abs(g), 2.2250738585072014e-308)
            x = cx
            y = cy
            g = g_new
            if dec <= rel_tol:
                break
        u[m, 0] = x
        u[m, 1] = y
    return iters, backtracks


@njit(cache=True)
def bisect_loop(own, cross, gamma, noise, tol, bracket_eps, max_steps):
    out = np.empty(own.size)
    tiny = 4.0 * 2.220446049250313e-16
    for r in range(own.size):
        lo = 0.0
        hi = 1.0 - bracket_eps
        target = tol * gamma[r] * noise
        for _ in range(max_steps):
            f_hi = own[r] / (1.0 - hi) ** 2 - gamma[r] * cross[r] / (1.0 + hi * gamma[r]) ** 2 \
                - gamma[r] * noise
            if (hi - lo <= bracket_eps and f_hi <= target) or hi - lo <= tiny:
                break
            mid = 0.5 * (lo + hi)
            f_mid = own[r] / (1.0 - mid) ** 2 - gamma[r] * cross[r] / (1.0 + mid * gamma[r]) ** 2 \
                - gamma[r] * noise
            if f_mid < 0.0:
                lo = mid
            else:
                hi = mid
        out[r] = hi
    return out
