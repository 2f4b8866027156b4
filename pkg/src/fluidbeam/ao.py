"""Two-layer penalty method with alternating block updates.

Inner layer: precoders (closed form), auxiliary variables (SINR projection),
antenna positions (SCA), repeated until the penalised objective stalls.
Outer layer: shrink the penalty factor ``rho <- c rho`` until the largest
squared equality residual ``xi`` falls below ``eps_outer``.

The solver works in a normalised frame: channels are divided by
``c_h = sqrt(mean_k ||h_k(u_init)||^2)`` and precoders multiplied by
``c_h / sigma``. In that frame the noise power is one, ``t_{k,q}`` is the
received amplitude in units of the noise standard deviation, and ``rho`` and
``xi`` are dimensionless. Reported powers and SINRs are in physical units.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .beamforming import solve_beamforming
from .channel import Scenario, channel_matrix
from .config import PenaltySettings
from .position import ScaStats, position_context, sca_batch
from .projection import project_rows

log = logging.getLogger(__name__)

PROJECTION_TOL = 1e-10


def penalized_objective(W, T, H, rho):
    """``sum_k ||w_k||^2 + 1/(2 rho) sum_{k,q} |h_k^H w_q - T[k,q]|^2``.

    ``H`` holds the channels ``h_k(u_k)`` as columns.
    """
    if not rho > 0:
        raise ValueError("rho must be positive")
    R = np.asarray(H).conj().T @ np.asarray(W) - np.asarray(T)
    return float(np.sum(np.abs(W) ** 2) + np.sum(np.abs(R) ** 2) / (2.0 * rho))


def violation_xi(W, T, H):
    """``max_{k,q} |h_k^H w_q - T[k,q]|^2``."""
    R = np.asarray(H).conj().T @ np.asarray(W) - np.asarray(T)
    return float(np.max(np.abs(R) ** 2))


@dataclass(frozen=True)
class TraceEntry:
    outer: int
    inner: int
    objective: float
    xi: float
    rho: float
    degenerate_rows: int = 0


@dataclass(frozen=True, eq=False)
class SolveResult:
    W: np.ndarray
    positions: np.ndarray
    total_power: float
    per_user_sinr: np.ndarray
    xi: float
    trace: tuple
    converged: bool
    outer_iterations: int = 0
    inner_iterations: int = 0
    stalled: bool = False
    polished: bool = False
    sca_backtracks: int = 0


class SolverFrame:
    """Scenario data in the normalised frame (noise power 1, mean gain 1)."""

    def __init__(self, scenario: Scenario, positions):
        lengths = {g.n_rx_paths for g in scenario.users}
        wavelengths = {g.wavelength for g in scenario.users}
        if len(lengths) != 1 or len(wavelengths) != 1:
            raise ValueError("all users must share L_r and the wavelength")
        self.scenario = scenario
        self.sigma = float(np.sqrt(scenario.noise_power))
        self.wavelength = wavelengths.pop()
        self.kappa = 2.0 * np.pi / self.wavelength
        self.lower = np.array([g.region.lower for g in scenario.users])
        self.upper = np.array([g.region.upper for g in scenario.users])
        self.dirs = np.array([g.rx_dirs for g in scenario.users])
        raw_B = np.array([g.prm @ np.exp(1j * g.wavenumber * (g.tx_dirs @ scenario.fpa_positions.T))
                          for g in scenario.users])
        H0 = np.einsum("kln,kl->nk", raw_B, self._frv(positions).conj())
        self.gain_scale = float(np.sqrt(np.mean(np.sum(np.abs(H0) ** 2, axis=0))))
        if not self.gain_scale > 0:
            raise ValueError("all channels are zero")
        self.B = raw_B / self.gain_scale
        self.gammas = scenario.sinr_targets
        self.frozen = np.all(self.upper <= self.lower, axis=1)

    def _frv(self, positions):
        return np.exp(1j * self.kappa * np.einsum("klc,kc->kl", self.dirs, positions))

    def channels(self, positions):
        """Normalised channel matrix ``(N, K)``."""
        return np.einsum("kln,kl->nk", self.B, self._frv(positions).conj())

    def to_physical(self, W):
        return W * (self.sigma / self.gain_scale)

    def to_frame(self, W):
        return W * (self.gain_scale / self.sigma)

    def clamp(self, positions):
        return np.clip(positions, self.lower, self.upper)


def mrt_initial_precoders(H, gammas):
    """Matched-filter directions with a common scale.

    The scale is the smallest that meets every SINR target (frame noise 1)
    when that is possible; otherwise it makes noise 1 % of the weakest
    interference, close to the max-min SINR of the fixed directions.
    """
    norms = np.linalg.norm(H, axis=0)
    norms = np.where(norms > 0, norms, 1.0)
    D = H / norms
    G = np.abs(H.conj().T @ D) ** 2
    a = np.diag(G)
    b = G.sum(axis=1) - a
    margin = a - gammas * b
    if np.all(margin > 0):
        s2 = float(np.max(gammas / margin))
    elif np.any(b > 0):
        s2 = 100.0 / float(np.min(b[b > 0]))
    else:
        s2 = 1.0
    return D * np.sqrt(s2)


def power_control(H, W, gammas, noise=1.0):
    """Rescale the columns of ``W`` so every SINR equals its target exactly.

    Keeps the beam directions; returns ``None`` when no positive power
    allocation exists for them.
    """
    norms = np.linalg.norm(W, axis=0)
    if np.any(norms == 0):
        return None
    D = W / norms
    G = np.abs(H.conj().T @ D) ** 2
    M = -G.copy()
    idx = np.diag_indices_from(M)
    M[idx] = np.diag(G) / gammas
    try:
        p = np.linalg.solve(M, np.full(len(gammas), noise))
    except np.linalg.LinAlgError:
        return None
    if not np.all(np.isfinite(p)) or np.any(p <= 0):
        return None
    return D * np.sqrt(p)


@dataclass
class _State:
    W: np.ndarray
    T: np.ndarray
    positions: np.ndarray
    H: np.ndarray
    trace: list = field(default_factory=list)


def initial_state(frame: SolverFrame, positions=None):
    K = frame.scenario.n_users
    if positions is None:
        positions = np.zeros((K, 2))
    positions = frame.clamp(np.asarray(positions, dtype=float))
    H = frame.channels(positions)
    W = mrt_initial_precoders(H, frame.gammas)
    return _State(W, H.conj().T @ W, positions, H)


def inner_step(frame, state, rho, settings, stats=None, update_positions=True):
    """One pass of precoder, auxiliary and position updates. Returns degenerate row count."""
    state.W = solve_beamforming(state.H, state.T, rho)
    T_bar = state.H.conj().T @ state.W
    state.T, _, perturbed = project_rows(T_bar, frame.gammas, 1.0, PROJECTION_TOL)
    if update_positions and not np.all(frame.frozen):
        ctx = position_context(frame.B, state.W, state.T, frame.dirs, frame.wavelength)
        state.positions = sca_batch(state.positions, ctx, frame.lower, frame.upper,
                                    settings.sca_max_iters, settings.sca_rel_tol, stats)
        state.H = frame.channels(state.positions)
    return int(perturbed.sum())


def solve(scenario: Scenario, settings: PenaltySettings = None, init=None) -> SolveResult:
    """Jointly optimise antenna positions and precoders for minimum power.

    Parameters
    ----------
    scenario : Scenario
    settings : PenaltySettings, optional
    init : (K, 2) array, optional
        Starting positions; defaults to each region's origin (clamped).
    """
    settings = settings or PenaltySettings()
    K = scenario.n_users
    start = np.zeros((K, 2)) if init is None else np.asarray(init, dtype=float)
    frame = SolverFrame(scenario, np.clip(start, [g.region.lower for g in scenario.users],
                                          [g.region.upper for g in scenario.users]))
    state = initial_state(frame, start)
    stats = ScaStats()

    rho = settings.rho0
    xi_history = []
    inner_total = 0
    stalled = False
    outer = 0
    for outer in range(settings.max_outer):
        prev = penalized_objective(state.W, state.T, state.H, rho) if outer > 0 else None
        for inner in range(settings.max_inner):
            degenerate = inner_step(frame, state, rho, settings, stats)
            inner_total += 1
            obj = penalized_objective(state.W, state.T, state.H, rho)
            xi = violation_xi(state.W, state.T, state.H)
            state.trace.append(TraceEntry(outer, inner, obj, xi, rho, degenerate))
            if degenerate:
                log.debug("outer %d inner %d: %d degenerate projection(s)", outer, inner, degenerate)
            if prev is not None and (prev - obj) <= settings.eps_inner * abs(prev):
                break
            prev = obj
        xi = violation_xi(state.W, state.T, state.H)
        xi_history.append(xi)
        if xi <= settings.eps_outer:
            break
        w = settings.stall_window
        # optional: give up when xi has not dropped by (1 - stall_ratio) over w outer steps
        if w and len(xi_history) > w and xi_history[-1] > settings.stall_ratio * xi_history[-1 - w]:
            stalled = True
            break
        rho *= settings.c

    return _finish(frame, state, settings, xi_history[-1], outer + 1, inner_total, stalled, stats)


def _finish(frame, state, settings, xi, n_outer, n_inner, stalled, stats):
    W = state.W
    polished = power_control(state.H, W, frame.gammas)
    if polished is not None:
        W = polished
    W_phys = frame.to_physical(W)
    scen = frame.scenario
    H_phys = channel_matrix(state.positions, scen)
    gains = np.abs(H_phys.conj().T @ W_phys) ** 2
    signal = np.diag(gains)
    sinrs = signal / (gains.sum(axis=1) - signal + scen.noise_power)
    feasible = bool(np.all(sinrs >= scen.sinr_targets * (1.0 - 1e-4)))
    return SolveResult(
        W=W_phys,
        positions=state.positions.copy(),
        total_power=float(np.sum(np.abs(W_phys) ** 2)),
        per_user_sinr=sinrs,
        xi=xi,
        trace=tuple(state.trace),
        converged=bool(xi <= settings.eps_outer and feasible),
        outer_iterations=n_outer,
        inner_iterations=n_inner,
        stalled=stalled,
        polished=polished is not None,
        sca_backtracks=stats.backtracks,
    )
