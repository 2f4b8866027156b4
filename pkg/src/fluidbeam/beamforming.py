"""Closed-form precoder update of the penalised problem.

For fixed channels ``H = [h_1, ..., h_K]`` and auxiliary matrix ``T`` with
``T[k, q]`` tracking ``h_k^H w_q``, minimise::

    sum_k ||w_k||^2 + 1/(2 rho) * sum_{k,q} |h_k^H w_q - T[k, q]|^2

The stationarity condition for column ``w_k`` reads
``(2 rho I + H H^H) w_k = sum_q T[q, k] h_q``, i.e. ``W = (2 rho I + H H^H)^{-1} H T``.
"""

import numpy as np
from scipy.linalg import cho_factor, cho_solve


def normal_matrix(H, rho):
    """``A = I + H H^H / (2 rho)``; Hermitian with all eigenvalues >= 1."""
    H = np.asarray(H)
    A = H @ H.conj().T / (2.0 * rho)
    A[np.diag_indices_from(A)] += 1.0
    return A


def solve_beamforming(H, T, rho):
    """Return the minimiser ``W`` (shape ``(N, K)``) of the precoder subproblem.

    Parameters
    ----------
    H : (N, K) complex array
        Channel vectors as columns.
    T : (K, K) complex array
        Auxiliary variables, ``T[k, q] ~ h_k^H w_q``.
    rho : float
        Penalty factor, ``rho > 0``.
    """
    H = np.asarray(H, dtype=complex)
    T = np.asarray(T, dtype=complex)
    if not rho > 0:
        raise ValueError("rho must be positive")
    if H.ndim != 2 or H.shape[1] == 0:
        raise ValueError("H must be a non-empty (N, K) matrix")
    if not np.all(np.isfinite(H)):
        raise ValueError("non-finite channel entries")
    # single factorisation for all K right-hand sides
    A = normal_matrix(H, rho)
    factor = cho_factor(A, lower=True, check_finite=False)
    return cho_solve(factor, H @ T / (2.0 * rho), check_finite=False)


def beamforming_objective(W, H, T, rho):
    R = H.conj().T @ W - T
    return float(np.sum(np.abs(W) ** 2) + np.sum(np.abs(R) ** 2) / (2.0 * rho))


def beamforming_gradient(W, H, T, rho):
    """Wirtinger gradient (w.r.t. conj(W)) scaled by 2; zero at the optimum.

    Column k equals ``2 w_k + (1/rho) sum_q h_q (h_q^H w_k - T[q, k])``.
    """
    R = H.conj().T @ W - T
    return 2.0 * W + H @ R / rho
