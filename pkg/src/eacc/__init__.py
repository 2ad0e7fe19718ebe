"""Energy-aware cooperative computation (EaCC): simulator, baselines and oracle."""

from .channel import ChannelConfig, NetworkMode
from .control import ControllerConstants, UtilitySpec
from .energy import BatteryModel
from .engine import Policy, ScenarioConfig, Summary, run, run_baseline, run_summary
from .model import ConfigError, ContractViolation, SystemState, update_queue

__all__ = [
    "BatteryModel",
    "ChannelConfig",
    "ConfigError",
    "ContractViolation",
    "ControllerConstants",
    "NetworkMode",
    "Policy",
    "ScenarioConfig",
    "Summary",
    "SystemState",
    "UtilitySpec",
    "run",
    "run_baseline",
    "run_summary",
    "update_queue",
]
