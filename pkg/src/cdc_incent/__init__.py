"""Incentive mechanisms for coded distributed computing.

Workers join cluster heads through a hedonic switch-rule game, heads then
compete for the master's rewards in an all-pay auction, and the winning heads
run a polynomial-coded matrix product.
"""
from .config import ConfigError, load_config, load_golden, save_config
from .model import (
    ClusterHeadSpec,
    CostModel,
    Partition,
    RewardSchedule,
    ScenarioConfig,
    ValuationDistribution,
    WorkerSpec,
    validate,
)

__version__ = "0.1.0"

__all__ = [
    "ClusterHeadSpec",
    "ConfigError",
    "CostModel",
    "Partition",
    "RewardSchedule",
    "ScenarioConfig",
    "ValuationDistribution",
    "WorkerSpec",
    "load_config",
    "load_golden",
    "save_config",
    "validate",
    "__version__",
]
