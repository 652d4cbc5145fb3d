"""Spatial-modulation based dual-function radar-communications simulator."""

from .allocation import AllocationPattern, CombinationMap, Scheme, make_allocation
from .config import ConfigError, SystemConfig, load_config, table1_config, validate_config
from .harness import ExperimentSpec, ResultTable, run
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "AllocationPattern",
    "BACKEND",
    "CombinationMap",
    "ConfigError",
    "ExperimentSpec",
    "ResultTable",
    "Scheme",
    "SystemConfig",
    "load_config",
    "make_allocation",
    "run",
    "table1_config",
    "validate_config",
]
