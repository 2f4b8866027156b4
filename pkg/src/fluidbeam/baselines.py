"""Comparison schemes: fixed antennas (FPA), alternating position selection
on a half-wavelength grid (APS) and maximum channel power placement (MCP).

All of them end with a full penalty-method solve at frozen positions, so the
only difference to the proposed scheme (FA) is where the antennas sit.
"""

from __future__ import annotations

import numpy as np

from . import ao
from .beamforming import solve_beamforming
from .channel import Region, Scenario, path_coupling
from .config import PenaltySettings, SchemeId
from .projection import project_rows

TIE_RTOL = 1e-12
MAX_APS_CYCLES = 100


def collapse_regions(scenario: Scenario, points) -> Scenario:
    return scenario.with_regions([Region.point(p) for p in points])


def solve_fa(scenario, settings=None):
    return ao.solve(scenario, settings)


def solve_fpa(scenario, settings=None):
    """Every antenna stays at the origin of its local frame."""
    origin = np.zeros((scenario.n_users, 2))
    return ao.solve(collapse_regions(scenario, origin), settings)


def lattice(region: Region, spacing):
    """Grid points ``x_min + i * spacing`` (same in y) inside ``region``, boundary
    included, in lexicographic (x, then y) order."""
    def axis(lo, hi):
        n = int(np.floor((hi - lo) / spacing + 1e-9))
        return lo + spacing * np.arange(n + 1)

    xs, ys = axis(region.x_min, region.x_max), axis(region.y_min, region.y_max)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel()])


def _first_best(values, maximize=False):
    """Index of the best value, ties (relative ``TIE_RTOL``) to the lowest index."""
    values = np.asarray(values, dtype=float)
    if maximize:
        best = values.max()
        ok = values >= best - TIE_RTOL * abs(best)
    else:
        best = values.min()
        ok = values <= best + TIE_RTOL * abs(best)
    return int(np.flatnonzero(ok)[0])


def channel_gain_map(geom, fpa_positions, points):
    """``||h(u)||^2`` at every row of ``points``."""
    B = path_coupling(geom, fpa_positions)
    F = np.exp(1j * geom.wavenumber * (np.asarray(points) @ geom.rx_dirs.T))
    return np.sum(np.abs(F.conj() @ B) ** 2, axis=1)


def mcp_positions(scenario: Scenario, resolution=1.0 / 50.0):
    """Per-user grid argmax of the channel gain; ``resolution`` in wavelengths."""
    out = []
    for geom in scenario.users:
        pts = lattice(geom.region, resolution * geom.wavelength)
        gains = channel_gain_map(geom, scenario.fpa_positions, pts)
        out.append(pts[_first_best(gains, maximize=True)])
    return np.array(out)


def solve_mcp(scenario, settings=None, resolution=1.0 / 50.0):
    """Each user maximises its own channel power, ignoring interference."""
    return ao.solve(collapse_regions(scenario, mcp_positions(scenario, resolution)), settings)


def _one_pass_score(frame, positions, T, rho):
    """Precoder and auxiliary update at ``positions``; returns (score, W, T)."""
    H = frame.channels(positions)
    W = solve_beamforming(H, T, rho)
    T_new, _, _ = project_rows(H.conj().T @ W, frame.gammas, 1.0, ao.PROJECTION_TOL)
    return ao.penalized_objective(W, T_new, H, rho), W, T_new


def aps_positions(scenario: Scenario, settings: PenaltySettings = None, spacing=0.5):
    """Alternating best-response selection over half-wavelength grids.

    Users are visited in turn; each moves to the candidate with the lowest
    penalised objective after one precoder/auxiliary pass (``rho = rho0``),
    keeping its current point unless another is strictly better. Cycles
    repeat until nobody moves.

    Returns ``(positions, cycles)``.
    """
    settings = settings or PenaltySettings()
    grids = [lattice(g.region, spacing * g.wavelength) for g in scenario.users]
    # start from the grid point nearest the origin
    positions = np.array([grid[_first_best(np.sum(grid ** 2, axis=1))] for grid in grids])
    frame = ao.SolverFrame(scenario, positions)
    state = ao.initial_state(frame, positions)
    rho = settings.rho0
    _, _, T = _one_pass_score(frame, positions, state.T, rho)

    cycles = 0
    for cycles in range(1, MAX_APS_CYCLES + 1):
        moved = False
        for k, grid in enumerate(grids):
            if len(grid) == 1:
                continue
            here = int(np.flatnonzero(np.all(grid == positions[k], axis=1))[0])
            scores, passes = [], []
            for cand in grid:
                trial = positions.copy()
                trial[k] = cand
                score, _, T_new = _one_pass_score(frame, trial, T, rho)
                scores.append(score)
                passes.append(T_new)
            best = _first_best(scores)
            if best != here and scores[best] < scores[here] * (1.0 - TIE_RTOL):
                positions[k] = grid[best]
                moved = True
            else:
                best = here
            T = passes[best]
        if not moved:
            break
    return positions, cycles


def solve_aps(scenario, settings=None, spacing=0.5):
    positions, _ = aps_positions(scenario, settings, spacing)
    return ao.solve(collapse_regions(scenario, positions), settings)


SOLVERS = {
    SchemeId.FA: solve_fa,
    SchemeId.FPA: solve_fpa,
    SchemeId.APS: solve_aps,
    SchemeId.MCP: solve_mcp,
}


def solve_scheme(scheme, scenario, settings=None):
    return SOLVERS[SchemeId(scheme)](scenario, settings)
