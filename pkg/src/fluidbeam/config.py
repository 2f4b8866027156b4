"""Scenario and solver configuration.

Config files are flat INI text with three optional sections::

    [scenario]
    N = 16
    K = 6
    L = 10
    region_size = 2.0      ; side length A of the square moving region, in wavelengths
    sinr_target_db = 10
    noise_dbm = -80
    c0_db = -40
    alpha = 2.8
    dist_min_m = 20
    dist_max_m = 100

    [solver]
    rho0 = 1.0
    c = 0.9
    eps_inner = 1e-4
    eps_outer = 1e-7
    max_inner = 50
    max_outer = 200

    [sweep]
    trials = 50
    seed = 0
    schemes = FA, FPA, APS, MCP
    values = 4, 6, 8, 10, 12, 14
"""

from __future__ import annotations

import configparser
import enum
import math
import warnings
from dataclasses import dataclass, field, fields, replace
from pathlib import Path


class ConfigError(ValueError):
    """Raised for invalid or unreadable configuration."""


class SchemeId(str, enum.Enum):
    FA = "FA"
    FPA = "FPA"
    APS = "APS"
    MCP = "MCP"

    @classmethod
    def parse_list(cls, text):
        out = []
        for tok in str(text).replace(";", ",").split(","):
            tok = tok.strip().upper()
            if not tok:
                continue
            try:
                out.append(cls(tok))
            except ValueError:
                raise ConfigError(f"unknown scheme {tok!r}; expected one of "
                                  f"{', '.join(s.value for s in cls)}") from None
        if not out:
            raise ConfigError("scheme list is empty")
        return tuple(out)


ALL_SCHEMES = (SchemeId.FA, SchemeId.FPA, SchemeId.APS, SchemeId.MCP)


@dataclass(frozen=True)
class PenaltySettings:
    """Two-layer penalty loop parameters.

    ``rho0`` is relative to the solver's internal gain normalisation (mean
    channel gain scaled to one), so the same value suits any path-loss level.
    """

    rho0: float = 1.0
    c: float = 0.9
    eps_inner: float = 1e-4
    eps_outer: float = 1e-7
    max_inner: int = 50
    max_outer: int = 200
    sca_max_iters: int = 100
    sca_rel_tol: float = 1e-5
    stall_window: int = 0       # 0 disables the stall check
    stall_ratio: float = 0.99

    def __post_init__(self):
        if not self.rho0 > 0:
            raise ConfigError("rho0 must be positive")
        if not 0.0 < self.c < 1.0:
            raise ConfigError("c must lie in (0, 1)")
        if not (self.eps_inner > 0 and self.eps_outer > 0 and self.sca_rel_tol > 0):
            raise ConfigError("tolerances must be positive")
        if self.max_inner < 1 or self.max_outer < 1 or self.sca_max_iters < 1:
            raise ConfigError("iteration caps must be >= 1")
        if self.stall_window < 0 or not 0.0 <= self.stall_ratio <= 1.0:
            raise ConfigError("need stall_window >= 0 and stall_ratio in [0, 1]")


@dataclass(frozen=True)
class ScenarioConfig:
    N: int = 16
    K: int = 6
    L: int = 10
    region_size: float = 2.0
    sinr_target_db: float = 10.0
    noise_dbm: float = -80.0
    c0_db: float = -40.0
    alpha: float = 2.8
    dist_min_m: float = 20.0
    dist_max_m: float = 100.0
    trials: int = 1
    seed: int = 0
    schemes: tuple = ALL_SCHEMES
    solver: PenaltySettings = field(default_factory=PenaltySettings)
    wavelength: float = 1.0
    fpa_spacing: float = 0.5

    def __post_init__(self):
        if self.N < 1 or self.K < 1 or self.L < 1:
            raise ConfigError("N, K and L must be >= 1")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not self.region_size >= 0 or not math.isfinite(self.region_size):
            raise ConfigError("region_size must be a finite value >= 0")
        if not 0 < self.dist_min_m <= self.dist_max_m:
            raise ConfigError("need 0 < dist_min_m <= dist_max_m")
        if not self.wavelength > 0:
            raise ConfigError("wavelength must be positive")
        if self.K > self.N:
            warnings.warn(f"K={self.K} users exceed N={self.N} antennas; "
                          "SINR targets may be unattainable", stacklevel=3)

    @property
    def noise_power(self):
        return dbm_to_watt(self.noise_dbm)

    @property
    def sinr_target(self):
        return db_to_linear(self.sinr_target_db)

    @property
    def c0(self):
        return db_to_linear(self.c0_db)


PROFILES = {
    "full": {},
    "desk": {"N": 8, "K": 4, "L": 4, "trials": 50},
}


def db_to_linear(db):
    return 10.0 ** (db / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w):
    return 10.0 * math.log10(w) + 30.0 if w > 0 else -math.inf


_SOLVER_KEYS = {f.name: f.type for f in fields(PenaltySettings)}
_SCENARIO_KEYS = {f.name for f in fields(ScenarioConfig)} - {"solver", "schemes"}
_INT_KEYS = {"N", "K", "L", "trials", "seed", "max_inner", "max_outer",
             "sca_max_iters", "stall_window"}


def _coerce(key, raw):
    try:
        if key in _INT_KEYS:
            return int(raw)
        return float(raw)
    except ValueError:
        raise ConfigError(f"bad value for {key!r}: {raw!r}") from None


def load_config(path, profile=None):
    """Read an INI config file into ``(ScenarioConfig, sweep_values)``.

    ``sweep_values`` is ``None`` when the ``[sweep]`` section has no
    ``values`` key.
    """
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from None
    known = {"scenario", "solver", "sweep"}
    extra = set(parser.sections()) - known
    if extra:
        raise ConfigError(f"unknown section(s): {', '.join(sorted(extra))}")

    scen = dict(PROFILES[profile]) if profile else {}
    solver = {}
    values = None
    if parser.has_section("scenario"):
        for key, raw in parser.items("scenario"):
            if key not in _SCENARIO_KEYS:
                raise ConfigError(f"unknown scenario key {key!r}")
            scen[key] = _coerce(key, raw)
    if parser.has_section("solver"):
        for key, raw in parser.items("solver"):
            if key not in _SOLVER_KEYS:
                raise ConfigError(f"unknown solver key {key!r}")
            solver[key] = _coerce(key, raw)
    if parser.has_section("sweep"):
        for key, raw in parser.items("sweep"):
            if key == "schemes":
                scen["schemes"] = SchemeId.parse_list(raw)
            elif key == "values":
                values = parse_values(raw)
            elif key in ("trials", "seed"):
                scen[key] = _coerce(key, raw)
            else:
                raise ConfigError(f"unknown sweep key {key!r}")
    return ScenarioConfig(solver=PenaltySettings(**solver), **scen), values


def parse_values(text):
    try:
        vals = [float(v) for v in str(text).replace(";", ",").split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"bad value list: {text!r}") from None
    if not vals:
        raise ConfigError("empty value list")
    return vals


def with_profile(config, profile):
    if profile not in PROFILES:
        raise ConfigError(f"unknown profile {profile!r}")
    return replace(config, **PROFILES[profile])
