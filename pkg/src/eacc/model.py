"""Queue state of the cooperative system and the per-slot queue recursions.

Every device ``n`` keeps three queues per flow ``k`` it helps:

* ``U[n, k]`` -- packets received from the source, waiting for computation,
* ``Q[n, k]`` -- processed packets waiting for energy credits,
* ``Z[n, k]`` -- packets cleared by the energy filter, waiting for delivery
  (to the application when ``n == k``, over a D2D link otherwise).

The source keeps one queue ``S[k]`` per flow. Packets are fluid (real-valued).
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace
from typing import NamedTuple

import numpy as np


class ContractViolation(ValueError):
    """Raised when an operation is called outside its precondition."""


class ConfigError(ValueError):
    """Invalid scenario parameters; the message names the offending key."""


def update_queue(backlog: float, service: float, arrival: float) -> tuple[float, float]:
    """One step of ``max(b - s, 0) + a``; returns ``(new_backlog, served)``."""
    for name, v in (("backlog", backlog), ("service", service), ("arrival", arrival)):
        if not math.isfinite(v) or v < 0:
            raise ContractViolation(f"{name} must be finite and >= 0, got {v!r}")
    served = min(backlog, service)
    return backlog - served + arrival, served


@dataclass
class SystemState:
    slot: int
    s: np.ndarray
    u: np.ndarray
    q: np.ndarray
    z: np.ndarray
    batteries: np.ndarray
    credits: np.ndarray
    reported_u: np.ndarray
    # Advanced in place by the engine; copy() snapshots it.
    rng: np.random.Generator = field(
        default_factory=lambda: np.random.Generator(np.random.PCG64(0)), repr=False
    )

    @property
    def n(self) -> int:
        return self.s.shape[0]

    @classmethod
    def zeros(cls, n: int, batteries=None, rng: np.random.Generator | None = None) -> "SystemState":
        mat = lambda: np.zeros((n, n))  # noqa: E731
        bat = np.ones(n) if batteries is None else np.asarray(batteries, dtype=float).copy()
        return cls(
            slot=0,
            s=np.zeros(n),
            u=mat(),
            q=mat(),
            z=mat(),
            batteries=bat,
            credits=mat(),
            reported_u=mat(),
            rng=np.random.Generator(np.random.PCG64(0)) if rng is None else rng,
        )

    def copy(self) -> "SystemState":
        return replace(
            self,
            s=self.s.copy(),
            u=self.u.copy(),
            q=self.q.copy(),
            z=self.z.copy(),
            batteries=self.batteries.copy(),
            credits=self.credits.copy(),
            reported_u=self.reported_u.copy(),
            rng=copy.deepcopy(self.rng),
        )

    def check(self) -> None:
        for name in ("s", "u", "q", "z", "credits", "reported_u"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ContractViolation(f"state.{name} has negative or non-finite entries")
        if np.any(self.batteries < 0) or np.any(self.batteries > 1):
            raise ContractViolation("battery levels must lie in [0, 1]")


@dataclass
class DecisionVector:
    """One slot of control: admitted ``y``, computation ``d``, energy ``e``,
    source transmissions ``x`` and D2D transmissions ``h`` (packets/slot)."""

    y: np.ndarray
    d: np.ndarray
    e: np.ndarray
    x: np.ndarray
    h: np.ndarray
    alpha: np.ndarray

    @classmethod
    def zeros(cls, n: int, alpha=None) -> "DecisionVector":
        a = np.ones((n, n)) if alpha is None else np.asarray(alpha, dtype=float)
        return cls(
            y=np.zeros(n),
            d=np.zeros((n, n)),
            e=np.zeros((n, n)),
            x=np.zeros((n, n)),
            h=np.zeros((n, n)),
            alpha=a,
        )

    def check(self) -> None:
        for name in ("y", "d", "e", "x", "h"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ContractViolation(f"decision.{name} has negative or non-finite entries")
        if np.any(self.alpha <= 0):
            raise ContractViolation("alpha entries must be positive")
        if np.any(np.diag(self.h) != 0):
            raise ContractViolation("h[n, n] must be 0")


class Transfers(NamedTuple):
    """Packets actually moved in one slot (after capping at backlog)."""

    source: np.ndarray  # actual x[n, k]
    computed: np.ndarray  # actual d[n, k]
    filtered: np.ndarray  # actual e[n, k]
    sent: np.ndarray  # actual h[n, k], n != k
    delivered: np.ndarray  # per target device


def _served(backlog: np.ndarray, service: np.ndarray) -> np.ndarray:
    return np.minimum(backlog, service)


_OFF_DIAGONAL: dict[int, np.ndarray] = {}


def _off_diagonal(n: int) -> np.ndarray:
    mask = _OFF_DIAGONAL.get(n)
    if mask is None:
        mask = _OFF_DIAGONAL[n] = ~np.eye(n, dtype=bool)
    return mask


def transfer(
    state: SystemState, decision: DecisionVector, relay_raw: bool = False
) -> tuple[SystemState, Transfers]:
    """Apply one slot of decisions; every service term reads start-of-slot backlogs.

    With ``relay_raw`` the off-diagonal pipelines skip computation and energy:
    packets at ``U[n, k]`` leave directly over D2D with rate ``h[n, k]`` and land
    in the receiver's own ``U[k, k]``.
    """
    n = state.n
    off = _off_diagonal(n)

    # S[k] is served by every source link carrying flow k; a shortfall is split
    # in proportion to the offered rates.
    offered = decision.x.sum(axis=0)
    s_served = _served(state.s, offered)
    frac = np.divide(s_served, offered, out=np.zeros(n), where=offered > 0)
    actual_x = decision.x * frac[None, :]

    if relay_raw:
        computed = np.where(off, 0.0, _served(state.u, decision.d))
        sent = np.where(off, _served(state.u, decision.h), 0.0)
        filtered = np.where(off, 0.0, _served(state.q, decision.e))
        z_out = np.where(off, 0.0, state.z)
        delivered = np.diag(z_out).copy()
        new_u = state.u - computed - sent + actual_x
        new_u[np.diag_indices(n)] += sent.sum(axis=0)
    else:
        computed = _served(state.u, decision.d)
        filtered = _served(state.q, decision.e)
        z_out = np.where(off, _served(state.z, decision.h), state.z)
        sent = np.where(off, z_out, 0.0)
        delivered = np.diag(z_out) + sent.sum(axis=0)
        new_u = state.u - computed + actual_x

    new = replace(
        state,
        s=state.s - s_served + decision.y,
        u=new_u,
        q=state.q - filtered + computed * decision.alpha,
        z=state.z - z_out + filtered,
    )
    return new, Transfers(actual_x, computed, filtered, sent, delivered)


def apply_decision(
    state: SystemState, decision: DecisionVector, relay_raw: bool = False
) -> tuple[SystemState, np.ndarray]:
    """Advance all queues one slot; returns the new state and per-device
    packets handed to the application."""
    new, moved = transfer(state, decision, relay_raw=relay_raw)
    return new, moved.delivered


def total_backlog(state: SystemState) -> float:
    return float(state.s.sum() + state.u.sum() + state.q.sum() + state.z.sum())
