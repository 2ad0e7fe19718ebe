"""Battery levels, energy credits, and cumulative energy accounting.

Credits are the virtual counters that gate the Q -> Z transfer. A device whose
battery is at or above its threshold receives ``credit_rate_above`` credits per
slot for every flow it serves; below the threshold it receives none.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import ConfigError, ContractViolation


@dataclass(frozen=True)
class BatteryModel:
    initial_level: float = 1.0
    threshold: float = 0.4
    credit_rate_above: float = 100.0
    drain_per_processed: float = 0.0
    drain_per_transmitted: float = 0.0
    joules_per_processed: float = 0.0
    joules_per_transmitted: float = 0.0

    def validate(self, where: str = "battery") -> None:
        for name in ("initial_level", "threshold"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{where}.{name}: must lie in [0, 1], got {v!r}")
        for name in (
            "credit_rate_above",
            "drain_per_processed",
            "drain_per_transmitted",
            "joules_per_processed",
            "joules_per_transmitted",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{where}.{name}: must be finite and >= 0, got {v!r}")


def generate_credits(battery_level: float, model: BatteryModel) -> float:
    if not 0.0 <= battery_level <= 1.0:
        raise ContractViolation(f"battery level must lie in [0, 1], got {battery_level!r}")
    return model.credit_rate_above if battery_level >= model.threshold else 0.0


def drain_battery(
    level: float,
    processed: float,
    transmitted: float,
    model: BatteryModel,
    work_factor: float = 1.0,
) -> tuple[float, float]:
    """Linear per-packet drain. ``work_factor`` scales the processing terms.

    Returns ``(new_level, joules)``.
    """
    if processed < 0 or transmitted < 0:
        raise ContractViolation("processed and transmitted amounts must be >= 0")
    proc_drain = processed * model.drain_per_processed * work_factor if processed else 0.0
    proc_joules = processed * model.joules_per_processed * work_factor if processed else 0.0
    new_level = max(level - proc_drain - transmitted * model.drain_per_transmitted, 0.0)
    return new_level, proc_joules + transmitted * model.joules_per_transmitted


@dataclass
class EnergyLedger:
    n: int
    cumulative_joules: np.ndarray = field(init=False)
    per_slot: list[np.ndarray] = field(init=False, default_factory=list)

    def __post_init__(self) -> None:
        self.cumulative_joules = np.zeros(self.n)

    def record(self, joules) -> None:
        joules = np.asarray(joules, dtype=float)
        if np.any(joules < 0):
            raise ContractViolation("energy consumption cannot be negative")
        self.per_slot.append(joules.copy())
        self.cumulative_joules = self.cumulative_joules + joules

    def history(self) -> np.ndarray:
        """Cumulative joules after each recorded slot, shape ``(slots, n)``."""
        if not self.per_slot:
            return np.zeros((0, self.n))
        return np.cumsum(np.vstack(self.per_slot), axis=0)
