"""Antenna position update by successive convex approximation.

For one user with fixed precoders ``w_q`` and auxiliary row ``t_q`` the
position objective is ``g(u) = sum_q |h(u)^H w_q - t_q|^2``. With
``B = Sigma G``, ``d_q = conj(B) w_q`` and ``C_q = d_q d_q^H`` it expands to::

    g(u) = sum_q [ sum_l C_q(l,l) + |t_q|^2
                   + sum_{i<j} 2|C_q(i,j)| cos(xi_ij(u) + angle C_q(i,j))
                   - sum_l 2|t_q||d_q(l)| cos(psi_l(u) + angle d_q(l) - angle t_q) ]

where ``psi_l(u) = kappa * a_l . u`` with ``a_l = (sin th cos ph, cos th)`` and
``xi_ij = psi_i - psi_j``. Each cosine sum over ``q`` is a phasor sum, so the
context stores one complex coefficient per path pair and per path.

All functions broadcast over leading batch axes so that every user of a
scenario can be updated at once.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Region

try:
    from . import _kernels
    DEFAULT_BACKEND = "numba"
except ImportError:  # pragma: no cover
    _kernels = None
    DEFAULT_BACKEND = "numpy"

_ROUNDOFF = 1e-12


@dataclass(frozen=True, eq=False)
class PositionContext:
    """Coefficients of ``g`` for one user (or a stack of users).

    Attributes
    ----------
    d : (..., Q, L) complex
        ``d[q] = conj(B) w_q``.
    t : (..., Q) complex
        Auxiliary row ``t_q``.
    dirs : (..., L, 2) float
        Direction factors of the receive paths.
    kappa : float
        Wavenumber ``2 pi / lambda``.
    """

    d: np.ndarray
    t: np.ndarray
    dirs: np.ndarray
    kappa: float

    def __post_init__(self):
        d, t, dirs = self.d, self.t, self.dirs
        L = d.shape[-1]
        iu, ju = np.triu_indices(L, 1)
        # sum_q C_q(i, j) for i < j, and sum_q d_q(l) conj(t_q)
        pair = np.einsum("...qi,...qj->...ij", d, d.conj())[..., iu, ju]
        path = np.einsum("...ql,...q->...l", d, t.conj())
        put = object.__setattr__
        put(self, "pair_amp", np.abs(pair))
        put(self, "pair_phase", np.angle(pair))
        put(self, "path_amp", np.abs(path))
        put(self, "path_phase", np.angle(path))
        put(self, "pair_dirs", dirs[..., iu, :] - dirs[..., ju, :])
        put(self, "const", np.sum(np.abs(d) ** 2, axis=(-2, -1)) + np.sum(np.abs(t) ** 2, axis=-1))

    @property
    def n_paths(self):
        return self.d.shape[-1]

    def C(self):
        """``C_q = d_q d_q^H``, shape ``(..., Q, L, L)``."""
        return self.d[..., :, None] * self.d[..., None, :].conj()

    def __getitem__(self, idx):
        return PositionContext(self.d[idx], self.t[idx], self.dirs[idx], self.kappa)


def position_context(B, W, t_row, dirs, wavelength=1.0):
    """Build the context from ``B = Sigma G`` (``(..., L_r, N)``), precoders ``W``
    (``(N, Q)``) and auxiliary row(s) ``t_row`` (``(..., Q)``)."""
    d = np.swapaxes(np.asarray(B).conj() @ np.asarray(W), -1, -2)
    return PositionContext(d, np.asarray(t_row, dtype=complex),
                           np.asarray(dirs, dtype=float), 2.0 * np.pi / wavelength)


def _phases(u, ctx):
    u = np.asarray(u, dtype=float)
    psi = ctx.kappa * np.einsum("...lc,...c->...l", ctx.dirs, u)
    xi = ctx.kappa * np.einsum("...pc,...c->...p", ctx.pair_dirs, u)
    return psi + ctx.path_phase, xi + ctx.pair_phase


def objective_g(u, ctx):
    """Position objective ``g(u)`` from the cosine expansion."""
    path_arg, pair_arg = _phases(u, ctx)
    f1 = 2.0 * ctx.pair_amp * np.cos(pair_arg)
    f2 = 2.0 * ctx.path_amp * np.cos(path_arg)
    return ctx.const + f1.sum(axis=-1) - f2.sum(axis=-1)


def gradient_g(u, ctx):
    """``(dg/dx, dg/dy)``."""
    path_arg, pair_arg = _phases(u, ctx)
    w_pair = -2.0 * ctx.kappa * ctx.pair_amp * np.sin(pair_arg)
    w_path = 2.0 * ctx.kappa * ctx.path_amp * np.sin(path_arg)
    return (np.einsum("...p,...pc->...c", w_pair, ctx.pair_dirs)
            + np.einsum("...l,...lc->...c", w_path, ctx.dirs))


def hessian_g(u, ctx):
    """Analytic 2x2 Hessian of ``g``.

    ``kappa^2 [ sum_l f2_l a_l a_l^T - sum_{i<j} f1_ij (a_i - a_j)(a_i - a_j)^T ]``
    """
    path_arg, pair_arg = _phases(u, ctx)
    k2 = ctx.kappa ** 2
    f1 = 2.0 * ctx.pair_amp * np.cos(pair_arg)
    f2 = 2.0 * ctx.path_amp * np.cos(path_arg)
    return k2 * (np.einsum("...l,...la,...lb->...ab", f2, ctx.dirs, ctx.dirs)
                 - np.einsum("...p,...pa,...pb->...ab", f1, ctx.pair_dirs, ctx.pair_dirs))


def delta_k(ctx):
    """Position-independent curvature bound.

    ``4 kappa^2 sum_q ( sum_l |t_q||d_q(l)| + sum_{i=1}^{L-1} sum_{j=1}^{L} |C_q(i,j)| )``;
    the inner double sum runs over all ``j`` as printed, which only enlarges
    the bound. Uses per-``q`` magnitudes.
    """
    mag = np.abs(ctx.d)
    path_term = np.sum(np.abs(ctx.t)[..., None] * mag, axis=(-2, -1))
    # |C_q(i, j)| = |d_q(i)| |d_q(j)|
    pair_term = np.sum(mag[..., :-1].sum(axis=-1) * mag.sum(axis=-1), axis=-1)
    return 4.0 * ctx.kappa ** 2 * (path_term + pair_term)


@dataclass(frozen=True)
class ScaSettings:
    region: Region
    max_iters: int = 100
    rel_tol: float = 1e-5

    def __post_init__(self):
        if self.max_iters < 1 or not self.rel_tol > 0:
            raise ValueError("need max_iters >= 1 and rel_tol > 0")


@dataclass
class ScaStats:
    iterations: int = 0
    backtracks: int = 0


def sca_batch(u0, ctx, lower, upper, max_iters=100, rel_tol=1e-5, stats=None, backend=None):
    """Run SCA for a stack of users sharing a context batch.

    ``u0``, ``lower`` and ``upper`` have shape ``(M, 2)``. Returns the final
    positions. Each step minimises the isotropic quadratic surrogate over the
    box, which is the coordinate-wise clamp of ``u - grad / delta``.

    ``backend`` is ``"numba"`` (default when available) or ``"numpy"``.
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    u = np.clip(np.array(u0, dtype=float), lower, upper)
    delta = np.array(delta_k(ctx), dtype=float, copy=True)
    if (backend or DEFAULT_BACKEND) == "numba":
        it, bt = _kernels.sca_loop(
            u, lower, upper, delta, float(ctx.kappa),
            np.ascontiguousarray(ctx.pair_amp), np.ascontiguousarray(ctx.pair_phase),
            np.ascontiguousarray(ctx.pair_dirs), np.ascontiguousarray(ctx.path_amp),
            np.ascontiguousarray(ctx.path_phase), np.ascontiguousarray(ctx.dirs, dtype=float),
            np.ascontiguousarray(ctx.const), int(max_iters), float(rel_tol))
        if stats is not None:
            stats.iterations += it
            stats.backtracks += bt
        return u
    active = (delta > 0) & np.any(upper > lower, axis=-1)
    if not np.any(active):
        return u
    g = objective_g(u, ctx)
    for _ in range(max_iters):
        if not np.any(active):
            break
        step = gradient_g(u, ctx) / np.where(delta > 0, delta, 1.0)[:, None]
        cand = np.clip(u - step, lower, upper)
        g_new = objective_g(cand, ctx)
        # guard against a bound that fails to majorise: halve the step and retry
        bad = active & (g_new > g + _ROUNDOFF * np.abs(ctx.const))
        ok = active & ~bad
        dec = (g - g_new) / np.maximum(np.abs(g), np.finfo(float).tiny)
        u[ok] = cand[ok]
        g[ok] = g_new[ok]
        active &= ~(ok & (dec <= rel_tol))
        delta[bad] *= 2.0
        if stats is not None:
            stats.iterations += 1
            stats.backtracks += int(bad.sum())
    return u


def sca_optimize_position(u0, ctx, settings: ScaSettings, stats=None):
    """Minimise ``g`` over ``settings.region`` starting from ``u0``."""
    region = settings.region
    u = sca_batch(np.asarray(u0, dtype=float)[None, :], ctx[None], region.lower[None, :],
                  region.upper[None, :], settings.max_iters, settings.rel_tol, stats)
    return u[0]


def direct_objective(u, B, W, t_row, dirs, wavelength=1.0):
    """``sum_q |h(u)^H w_q - t_q|^2`` computed straight from the channel."""
    f = np.exp(1j * 2.0 * np.pi / wavelength * (np.asarray(dirs) @ np.asarray(u, dtype=float)))
    h = np.asarray(B).T @ f.conj()
    return float(np.sum(np.abs(h.conj() @ W - t_row) ** 2))
