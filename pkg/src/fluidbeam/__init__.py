"""Transmit power minimisation for multi-user downlink with movable receive antennas.

The main entry points are :func:`fluidbeam.ao.solve` (joint precoder and
antenna position optimisation), the comparison schemes in
:mod:`fluidbeam.baselines` and the Monte-Carlo sweeps in :mod:`fluidbeam.harness`.
"""

__version__ = "0.1.0"

from .ao import SolveResult, solve
from .baselines import solve_scheme
from .channel import PathGeometry, Region, Scenario, channel_matrix, channel_vector, sample_scenario
from .config import ConfigError, PenaltySettings, ScenarioConfig, SchemeId, load_config

__all__ = [
    "ConfigError", "PathGeometry", "PenaltySettings", "Region", "Scenario", "ScenarioConfig",
    "SchemeId", "SolveResult", "channel_matrix", "channel_vector", "load_config",
    "sample_scenario", "solve", "solve_scheme",
]
