"""Field-response channel model for fluid-antenna users.

Geometry is expressed in wavelengths (lambda = 1 by default). Each user has
``L_r`` receive paths and ``L_t`` transmit paths, described by elevation and
azimuth angles, plus a path response matrix coupling them. The downlink
channel of user k at antenna position u is::

    h_k(u) = (f_k(u)^H Sigma_k G_k)^T
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .config import ConfigError, ScenarioConfig

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Region:
    """Axis-aligned rectangle ``[x_min, x_max] x [y_min, y_max]``."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_min <= self.x_max and self.y_min <= self.y_max):
            raise ValueError(f"empty region {self}")

    @classmethod
    def square(cls, size, center=(0.0, 0.0)):
        h = 0.5 * size
        return cls(center[0] - h, center[0] + h, center[1] - h, center[1] + h)

    @classmethod
    def point(cls, u):
        return cls(float(u[0]), float(u[0]), float(u[1]), float(u[1]))

    @property
    def lower(self):
        return np.array([self.x_min, self.y_min])

    @property
    def upper(self):
        return np.array([self.x_max, self.y_max])

    @property
    def is_point(self):
        return self.x_min == self.x_max and self.y_min == self.y_max

    def clamp(self, u):
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def contains(self, u):
        u = np.asarray(u, dtype=float)
        return bool(np.all(u >= self.lower) and np.all(u <= self.upper))


def direction_factors(elevation, azimuth):
    """Stack ``(sin(theta) cos(phi), cos(theta))`` per path, shape ``(L, 2)``."""
    elevation = np.asarray(elevation, dtype=float)
    azimuth = np.asarray(azimuth, dtype=float)
    return np.stack([np.sin(elevation) * np.cos(azimuth), np.cos(elevation)], axis=-1)


@dataclass(frozen=True, eq=False)
class PathGeometry:
    """Multipath description of one user's link.

    Angles are 1-D arrays in radians; ``prm`` has shape ``(L_r, L_t)``.
    """

    rx_elevation: np.ndarray
    rx_azimuth: np.ndarray
    tx_elevation: np.ndarray
    tx_azimuth: np.ndarray
    prm: np.ndarray
    region: Region
    wavelength: float = 1.0
    rx_dirs: np.ndarray = field(init=False, repr=False)
    tx_dirs: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        for name in ("rx_elevation", "rx_azimuth", "tx_elevation", "tx_azimuth"):
            object.__setattr__(self, name, np.atleast_1d(np.asarray(getattr(self, name), dtype=float)))
        prm = np.atleast_2d(np.asarray(self.prm, dtype=complex))
        object.__setattr__(self, "prm", prm)
        if self.rx_elevation.shape != self.rx_azimuth.shape:
            raise ValueError("receive elevation/azimuth length mismatch")
        if self.tx_elevation.shape != self.tx_azimuth.shape:
            raise ValueError("transmit elevation/azimuth length mismatch")
        if prm.shape != (self.rx_elevation.size, self.tx_elevation.size):
            raise ValueError(f"prm shape {prm.shape} does not match "
                             f"L_r={self.rx_elevation.size}, L_t={self.tx_elevation.size}")
        if not self.wavelength > 0:
            raise ValueError("wavelength must be positive")
        object.__setattr__(self, "rx_dirs", direction_factors(self.rx_elevation, self.rx_azimuth))
        object.__setattr__(self, "tx_dirs", direction_factors(self.tx_elevation, self.tx_azimuth))

    @property
    def n_rx_paths(self):
        return self.rx_elevation.size

    @property
    def n_tx_paths(self):
        return self.tx_elevation.size

    @property
    def wavenumber(self):
        return TWO_PI / self.wavelength


@dataclass(frozen=True, eq=False)
class Scenario:
    fpa_positions: np.ndarray
    users: tuple
    noise_power: float
    sinr_targets: np.ndarray
    user_distances: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "fpa_positions", np.atleast_2d(np.asarray(self.fpa_positions, dtype=float)))
        object.__setattr__(self, "users", tuple(self.users))
        object.__setattr__(self, "sinr_targets", np.atleast_1d(np.asarray(self.sinr_targets, dtype=float)))
        object.__setattr__(self, "user_distances", np.atleast_1d(np.asarray(self.user_distances, dtype=float)))
        if not self.noise_power > 0:
            raise ValueError("noise_power must be positive")
        if np.any(self.sinr_targets <= 0):
            raise ValueError("SINR targets must be positive")
        if self.sinr_targets.size != len(self.users):
            raise ValueError("one SINR target per user required")

    @property
    def n_antennas(self):
        return self.fpa_positions.shape[0]

    @property
    def n_users(self):
        return len(self.users)

    @property
    def regions(self):
        return [g.region for g in self.users]

    def with_regions(self, regions):
        from dataclasses import replace

        users = [replace(g, region=r) for g, r in zip(self.users, regions)]
        return replace(self, users=users)

    def with_sinr_targets(self, targets):
        from dataclasses import replace

        targets = np.broadcast_to(np.asarray(targets, dtype=float), (self.n_users,))
        return replace(self, sinr_targets=targets.copy())

    def digest(self):
        """Short hash of the channel realisation (geometry and PRMs only)."""
        sha = hashlib.sha256()
        sha.update(np.ascontiguousarray(self.fpa_positions).tobytes())
        for g in self.users:
            for arr in (g.rx_elevation, g.rx_azimuth, g.tx_elevation, g.tx_azimuth, g.prm):
                sha.update(np.ascontiguousarray(arr).tobytes())
        sha.update(np.ascontiguousarray(self.user_distances).tobytes())
        return sha.hexdigest()[:16]


def path_difference(u, elevation, azimuth):
    """Propagation distance difference of a path between ``u`` and the origin."""
    u = np.asarray(u, dtype=float)
    return u[..., 0] * np.sin(elevation) * np.cos(azimuth) + u[..., 1] * np.cos(elevation)


def receive_frv(u, geom):
    """Receive field response vector ``f(u)``, shape ``(L_r,)``."""
    phase = geom.wavenumber * (geom.rx_dirs @ np.asarray(u, dtype=float))
    return np.exp(1j * phase)


def transmit_frm(fpa_positions, geom):
    """Field response matrix ``G`` at the BS, shape ``(L_t, N)``; column n is g_n."""
    v = np.atleast_2d(np.asarray(fpa_positions, dtype=float))
    phase = geom.wavenumber * (geom.tx_dirs @ v.T)
    return np.exp(1j * phase)


def path_coupling(geom, fpa_positions):
    """``B = Sigma G``, the position-independent part of the channel, ``(L_r, N)``."""
    return geom.prm @ transmit_frm(fpa_positions, geom)


def channel_vector(u, geom, fpa_positions):
    """Channel ``h(u) = (f(u)^H Sigma G)^T`` (plain transpose), shape ``(N,)``."""
    f = receive_frv(u, geom)
    return path_coupling(geom, fpa_positions).T @ f.conj()


def channel_matrix(positions, scenario):
    """Stack per-user channels as columns, ``H[:, k] = h_k(u_k)``, shape ``(N, K)``."""
    return np.stack([channel_vector(u, g, scenario.fpa_positions)
                     for u, g in zip(positions, scenario.users)], axis=1)


def sinr(channels, W, noise_power, k):
    """Receive SINR of user ``k``.

    ``channels`` holds h_q as columns (or is a sequence of vectors) and ``W``
    holds the precoders w_q as columns.
    """
    H = _as_columns(channels)
    gains = np.abs(H[:, k].conj() @ np.asarray(W)) ** 2
    interference = gains.sum() - gains[k]
    return gains[k] / (interference + noise_power)


def sinr_all(channels, W, noise_power):
    H = _as_columns(channels)
    G = np.abs(H.conj().T @ np.asarray(W)) ** 2
    signal = np.diag(G).copy()
    return signal / (G.sum(axis=1) - signal + noise_power)


def _as_columns(channels):
    if isinstance(channels, np.ndarray) and channels.ndim == 2:
        return channels
    return np.stack([np.asarray(h) for h in channels], axis=1)


def ula_positions(n, spacing=0.5):
    """Uniform linear array along x: ``v_n = (n * spacing, 0)``."""
    return np.stack([spacing * np.arange(n), np.zeros(n)], axis=1)


def prm_variance(c0, distance, alpha, n_paths):
    return c0 * distance ** (-alpha) / n_paths


def _user_rng(seed, k):
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(k,)))


def sample_scenario(config: ScenarioConfig, seed) -> Scenario:
    """Draw a random scenario with the statistics of the simulation setup.

    Each user is drawn from its own child stream of ``seed``, so the first
    ``K`` users of a ``K+1``-user scenario coincide with the ``K``-user draw.
    """
    if config.N < 1 or config.K < 1 or config.L < 1 or config.region_size < 0:
        raise ConfigError("invalid scenario configuration")
    lam = config.wavelength
    region = Region.square(config.region_size * lam)
    half_pi = 0.5 * np.pi
    users = []
    dists = np.empty(config.K)
    for k in range(config.K):
        rng = _user_rng(seed, k)
        dists[k] = rng.uniform(config.dist_min_m, config.dist_max_m)
        rx_el, rx_az, tx_el, tx_az = rng.uniform(-half_pi, half_pi, size=(4, config.L))
        var = prm_variance(config.c0, dists[k], config.alpha, config.L)
        diag = rng.normal(scale=np.sqrt(var / 2.0), size=(2, config.L))
        prm = np.diag(diag[0] + 1j * diag[1])
        users.append(PathGeometry(rx_el, rx_az, tx_el, tx_az, prm, region, lam))
    return Scenario(
        fpa_positions=ula_positions(config.N, config.fpa_spacing * lam),
        users=users,
        noise_power=config.noise_power,
        sinr_targets=np.full(config.K, config.sinr_target),
        user_distances=dists,
    )
