"""Projection of an auxiliary row onto the per-user SINR-feasible set.

For user k, given the target row ``t_bar = (h_k^H w_q)_q`` solve::

    min_t  sum_q |t_bar_q - t_q|^2
    s.t.   |t_k|^2 >= gamma * (sum_{q != k} |t_q|^2 + sigma^2)

Strong duality holds, and for multiplier ``lam`` in [0, 1) the minimiser of the
Lagrangian is ``t_k = t_bar_k / (1 - lam)``, ``t_q = t_bar_q / (1 + lam gamma)``.
The optimal ``lam`` is the root of the increasing function ``F`` below, found by
bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

try:
    from . import _kernels
except ImportError:  # pragma: no cover
    _kernels = None

BRACKET_EPS = 1e-12
DEGENERATE_EPS = 1e-6
MAX_BISECTIONS = 200


class DegenerateProjection(ArithmeticError):
    """The diagonal target ``t_bar_k`` is zero and the constraint is violated."""


@dataclass(frozen=True)
class ProjectionResult:
    row: np.ndarray
    lam: float
    met_with_equality: bool
    perturbed: bool = False


def _parts(t_bar, k):
    t_bar = np.asarray(t_bar, dtype=complex)
    own = np.abs(t_bar[k]) ** 2
    cross = np.sum(np.abs(t_bar) ** 2) - own
    return own, cross


def dual_residual(lam, t_bar, k, gamma, noise_power):
    """``F(lam) = |t_k|^2/(1-lam)^2 - gamma sum_{q!=k} |t_q|^2/(1+lam gamma)^2 - gamma sigma^2``."""
    if not 0.0 <= lam < 1.0:
        raise ValueError(f"lambda must lie in [0, 1), got {lam}")
    own, cross = _parts(t_bar, k)
    return _residual(lam, own, cross, gamma, noise_power)


def _residual(lam, own, cross, gamma, noise):
    return own / (1.0 - lam) ** 2 - gamma * cross / (1.0 + lam * gamma) ** 2 - gamma * noise


def _bisect(own, cross, gamma, noise, tol):
    """Bisection for rows with ``F(0) < 0``. Returns the upper end (``F >= 0``)."""
    if _kernels is not None:
        return _kernels.bisect_loop(np.ascontiguousarray(own), np.ascontiguousarray(cross),
                                    np.ascontiguousarray(gamma, dtype=float), float(noise),
                                    float(tol), BRACKET_EPS, MAX_BISECTIONS)
    return _bisect_numpy(own, cross, gamma, noise, tol)


def _bisect_numpy(own, cross, gamma, noise, tol):
    lo = np.zeros_like(own)
    hi = np.full_like(own, 1.0 - BRACKET_EPS)
    target = tol * gamma * noise
    for _ in range(MAX_BISECTIONS):
        f_hi = _residual(hi, own, cross, gamma, noise)
        done = ((hi - lo <= BRACKET_EPS) & (f_hi <= target)) | (hi - lo <= 4 * np.finfo(float).eps)
        if np.all(done):
            break
        mid = 0.5 * (lo + hi)
        f_mid = _residual(mid, own, cross, gamma, noise)
        neg = f_mid < 0
        lo = np.where(~done & neg, mid, lo)
        hi = np.where(~done & ~neg, mid, hi)
    return hi


def _project(T_bar, own_idx, gammas, noise_power, tol, on_degenerate):
    """Project rows of ``T_bar``; row r's desired-signal entry is column ``own_idx[r]``."""
    T_bar = np.array(T_bar, dtype=complex, copy=True)
    rows = np.arange(T_bar.shape[0])
    perturbed = np.zeros(rows.size, dtype=bool)

    power = np.abs(T_bar) ** 2
    own = power[rows, own_idx]
    cross = power.sum(axis=1) - own
    infeasible = _residual(0.0, own, cross, gammas, noise_power) < 0

    stuck = infeasible & (_residual(1.0 - BRACKET_EPS, own, cross, gammas, noise_power) < 0)
    if np.any(stuck):
        if on_degenerate == "raise":
            raise DegenerateProjection(f"rows {np.flatnonzero(stuck).tolist()} have no "
                                       "multiplier below 1 (zero diagonal target)")
        r, c = rows[stuck], own_idx[stuck]
        bump = DEGENERATE_EPS * np.sqrt(gammas[stuck] * noise_power)
        # keep the phase of a tiny nonzero entry, zero phase otherwise
        phase = np.where(np.abs(T_bar[r, c]) > 0, np.exp(1j * np.angle(T_bar[r, c])), 1.0)
        T_bar[r, c] = bump * phase
        own = np.abs(T_bar[rows, own_idx]) ** 2
        perturbed = stuck

    lam = np.zeros(rows.size)
    if np.any(infeasible):
        lam[infeasible] = _bisect(own[infeasible], cross[infeasible],
                                  gammas[infeasible], noise_power, tol)
    T = T_bar / (1.0 + lam * gammas)[:, None]
    T[rows, own_idx] = T_bar[rows, own_idx] / (1.0 - lam)
    return T, lam, perturbed


def project_rows(T_bar, gammas, noise_power, tol=1e-10, on_degenerate="perturb"):
    """Project every row ``k`` of ``T_bar`` onto user k's SINR set.

    Rows are independent; they are processed together only for speed.

    Returns
    -------
    T : (K, K) complex array
    lam : (K,) float array
    perturbed : (K,) bool array
        Rows whose zero diagonal was nudged before projecting.
    """
    T_bar = np.asarray(T_bar, dtype=complex)
    K = T_bar.shape[0]
    gammas = np.broadcast_to(np.asarray(gammas, dtype=float), (K,))
    return _project(T_bar, np.arange(K), gammas, noise_power, tol, on_degenerate)


def project_aux(t_bar, k, gamma, noise_power, tol=1e-10, on_degenerate="perturb"):
    """Project a single auxiliary row of user ``k``; see :func:`project_rows`."""
    if not (gamma > 0 and noise_power > 0 and tol > 0):
        raise ValueError("gamma, noise_power and tol must be positive")
    t_bar = np.asarray(t_bar, dtype=complex)
    T, lam, pert = _project(t_bar[None, :], np.array([k]), np.array([float(gamma)]),
                            noise_power, tol, on_degenerate)
    return ProjectionResult(T[0], float(lam[0]), bool(lam[0] > 0), bool(pert[0]))


def sinr_of_row(row, k, noise_power):
    own, cross = _parts(row, k)
    return own / (cross + noise_power)
