"""Slotted simulation of EaCC and the two baselines."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Iterator, Optional

import numpy as np

from . import control
from .channel import (
    ActivationSet,
    ChannelConfig,
    ChannelState,
    NetworkMode,
    draw_channels,
    feasible_activations,
)
from .control import ControllerConstants, UtilitySpec
from .energy import BatteryModel, drain_battery
from .model import ConfigError, DecisionVector, SystemState, total_backlog, transfer

PACKET_BYTES = 500
SLOT_SECONDS = 0.02


class Policy(enum.Enum):
    EACC = "eacc"
    NO_COOPERATION = "no-coop"
    COOPERATION_ONLY = "coop"


def _vec(v, n) -> tuple[float, ...]:
    return tuple(float(a) for a in np.broadcast_to(np.asarray(v, dtype=float), (n,)))


def _grid(v, n) -> tuple[tuple[float, ...], ...]:
    a = np.broadcast_to(np.asarray(v, dtype=float), (n, n))
    return tuple(tuple(float(c) for c in row) for row in a)


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything needed to reproduce one run.

    ``arrivals``, when given, replaces flow control by fixed per-slot arrivals
    (the exogenous-traffic setting used for stability checks). ``warmup`` slots
    are excluded from the summary's time averages.
    """

    n_devices: int
    constants: ControllerConstants
    channel: ChannelConfig
    battery: tuple[BatteryModel, ...]
    alpha: tuple[tuple[float, ...], ...]
    work_factor: tuple[float, ...]
    receivers: tuple[int, ...]
    mode: NetworkMode = NetworkMode.CELLULAR_D2D
    arrivals: Optional[tuple[float, ...]] = None
    report_period: int = 5
    slots: int = 1000
    seed: int = 0
    policy: Policy = Policy.EACC
    enumeration_limit: int = 4
    warmup: int = 0

    @classmethod
    def build(
        cls,
        n: int,
        *,
        mode: NetworkMode = NetworkMode.CELLULAR_D2D,
        m: float = 500.0,
        r_max=100.0,
        d_max=100.0,
        e_max=100.0,
        utility: UtilitySpec | None = None,
        source_p=1.0,
        source_rate=100.0,
        d2d_p=1.0,
        d2d_rate=100.0,
        battery: BatteryModel | list[BatteryModel] | None = None,
        alpha=1.0,
        work_factor=1.0,
        receivers=None,
        arrivals=None,
        **run_kw,
    ) -> "ScenarioConfig":
        if battery is None:
            battery = BatteryModel()
        bats = tuple(battery) if isinstance(battery, (list, tuple)) else (battery,) * n
        cfg = cls(
            n_devices=n,
            constants=ControllerConstants.uniform(n, m, r_max, d_max, e_max, utility),
            channel=ChannelConfig.uniform(n, source_p, source_rate, d2d_p, d2d_rate),
            battery=bats,
            alpha=_grid(alpha, n),
            work_factor=_vec(work_factor, n),
            receivers=tuple(range(n)) if receivers is None else tuple(int(r) for r in receivers),
            mode=mode,
            arrivals=None if arrivals is None else _vec(arrivals, n),
            **run_kw,
        )
        cfg.validate()
        return cfg

    def validate(self) -> None:
        n = self.n_devices
        if not (isinstance(n, int) and n >= 1):
            raise ConfigError("topology.n: must be an integer >= 1")
        if self.channel.n != n or len(self.constants.r_max) != n or len(self.constants.d_max) != n:
            raise ConfigError("topology.n: dimensions of channel/constants do not match")
        if len(self.constants.e_max) != n or any(len(r) != n for r in self.constants.e_max):
            raise ConfigError("constants.e_max: must be n x n")
        self.channel.validate()
        self.constants.validate()
        if len(self.battery) != n:
            raise ConfigError("battery: need one model per device")
        for i, b in enumerate(self.battery):
            b.validate(f"battery[{i}]")
        a = np.asarray(self.alpha)
        if a.shape != (n, n) or np.any(~(a > 0)) or np.any(~np.isfinite(a)):
            raise ConfigError("workload.alpha: must be an n x n grid of positive reals")
        wf = np.asarray(self.work_factor)
        if wf.shape != (n,) or np.any(~(wf >= 1)):
            raise ConfigError("workload.work_factor: must be >= 1 per device (inf allowed)")
        if len(set(self.receivers)) != len(self.receivers) or any(
            not 0 <= r < n for r in self.receivers
        ):
            raise ConfigError("topology.receivers: must be distinct device indices in [0, n)")
        if self.arrivals is not None:
            ar = np.asarray(self.arrivals)
            if ar.shape != (n,) or np.any(~np.isfinite(ar)) or np.any(ar < 0):
                raise ConfigError("workload.arrivals: must be n finite non-negative rates")
        if self.report_period < 1:
            raise ConfigError("run.report_period: must be >= 1")
        if self.slots < 0:
            raise ConfigError("run.slots: must be >= 0")
        if not 0 <= self.warmup:
            raise ConfigError("run.warmup: must be >= 0")
        if self.enumeration_limit < 1:
            raise ConfigError("run.enumeration_limit: must be >= 1")

    @property
    def d_max_effective(self) -> np.ndarray:
        """Per-device processing budget after dividing by the work factor."""
        return np.asarray(self.constants.d_max) / np.asarray(self.work_factor)


@dataclass
class TraceRecord:
    slot: int
    decision: DecisionVector
    delivered: np.ndarray
    backlog_total: float
    s: np.ndarray
    u: np.ndarray
    q: np.ndarray
    z: np.ndarray
    batteries: np.ndarray
    joules: np.ndarray
    activation: ActivationSet
    processed: np.ndarray
    transmitted: np.ndarray
    credits: np.ndarray  # as refreshed at the start of the slot
    activations: Optional[list[ActivationSet]] = None  # None when scheduled greedily


@dataclass
class Summary:
    mean_delivered_rate: np.ndarray
    mean_admitted_rate: np.ndarray
    sum_utility: float
    mean_backlog: float
    cumulative_joules: np.ndarray
    slots: int
    warmup: int = 0

    def delivered_bps(self, packet_bytes: int = PACKET_BYTES, slot_seconds: float = SLOT_SECONDS):
        return self.mean_delivered_rate * packet_bytes * 8 / slot_seconds


@dataclass
class _Prepared:
    alpha: np.ndarray
    d_max_eff: np.ndarray
    e_max: np.ndarray
    work_factor: np.ndarray
    arrivals: Optional[np.ndarray]
    receivers: np.ndarray
    diag_only: np.ndarray
    source_p: np.ndarray
    source_rate: np.ndarray
    d2d_p: np.ndarray
    d2d_rate: np.ndarray
    threshold: np.ndarray
    credit_rate: np.ndarray
    activation_cache: dict = field(default_factory=dict)


def _prepare(config: ScenarioConfig) -> _Prepared:
    # Cached on the (frozen) instance; hashing the config every slot is costly.
    prep = config.__dict__.get("_prepared")
    if prep is not None:
        return prep
    n = config.n_devices
    ch = config.channel
    prep = _Prepared(
        alpha=np.asarray(config.alpha, dtype=float),
        d_max_eff=config.d_max_effective,
        e_max=np.asarray(config.constants.e_max, dtype=float),
        work_factor=np.asarray(config.work_factor, dtype=float),
        arrivals=None if config.arrivals is None else np.asarray(config.arrivals, dtype=float),
        receivers=np.asarray(config.receivers, dtype=int),
        diag_only=np.eye(n, dtype=bool),
        source_p=np.asarray(ch.source_p, dtype=float),
        source_rate=np.asarray(ch.source_rate, dtype=float),
        d2d_p=np.asarray(ch.d2d_p, dtype=float),
        d2d_rate=np.asarray(ch.d2d_rate, dtype=float),
        threshold=np.array([b.threshold for b in config.battery]),
        credit_rate=np.array([b.credit_rate_above for b in config.battery]),
    )
    object.__setattr__(config, "_prepared", prep)
    return prep


def initial_state(config: ScenarioConfig) -> SystemState:
    return SystemState.zeros(
        config.n_devices,
        batteries=[b.initial_level for b in config.battery],
        rng=np.random.Generator(np.random.PCG64(config.seed)),
    )


def _activations(config: ScenarioConfig, prep: _Prepared, channels: ChannelState):
    key = channels.key()
    acts = prep.activation_cache.get(key)
    if acts is None:
        acts = feasible_activations(config.mode, channels, config.enumeration_limit)
        prep.activation_cache[key] = acts
    return acts


def decide(
    state: SystemState, config: ScenarioConfig, channels: ChannelState
) -> tuple[DecisionVector, ActivationSet, Optional[list[ActivationSet]]]:
    """One slot of control for the configured policy.

    Reads ``state.reported_u`` and ``state.credits`` as already refreshed for
    this slot. Returns the decision, the chosen activation, and the activation
    list used (``None`` when the greedy scheduler ran).
    """
    prep = _prepare(config)
    n = config.n_devices
    policy = config.policy
    const = config.constants

    y = np.zeros(n)
    if prep.arrivals is not None:
        y[prep.receivers] = prep.arrivals[prep.receivers]
    else:
        for k in prep.receivers:
            y[k] = control.flow_control(float(state.s[k]), const, int(k))

    if policy is Policy.EACC:
        mask, weights = None, state.z
    elif policy is Policy.NO_COOPERATION:
        mask, weights = prep.diag_only, np.zeros((n, n))
    else:
        diag_u = np.diag(state.u)
        mask = None
        weights = np.where(prep.diag_only, 0.0, state.u - diag_u[None, :])

    acts = None
    if n <= config.enumeration_limit:
        acts = _activations(config, prep, channels)
        x, h, chosen = control.schedule(state.s, state.reported_u, weights, acts, mask)
    else:
        x, h, chosen = control.schedule_greedy(
            config.mode, channels, state.s, state.reported_u, weights, mask
        )

    if policy is Policy.EACC:
        u, q, z = state.u, state.q, state.z
    else:
        # Only each device's own pipeline computes.
        u = np.where(prep.diag_only, state.u, 0.0)
        q = np.where(prep.diag_only, state.q, 0.0)
        z = np.where(prep.diag_only, state.z, 0.0)
    d = control.computation_control_all(u, q, prep.alpha, prep.d_max_eff)
    e = control.energy_control_all(q, z, state.credits, prep.e_max)
    return DecisionVector(y=y, d=d, e=e, x=x, h=h, alpha=prep.alpha), chosen, acts


def step(state: SystemState, config: ScenarioConfig) -> tuple[SystemState, TraceRecord]:
    """Advance one slot: channels, stale reports, credits, controllers, queues, batteries."""
    prep = _prepare(config)
    n = config.n_devices
    t = state.slot

    channels = draw_channels(state.rng, prep.source_p, prep.source_rate, prep.d2d_p, prep.d2d_rate)

    reported = state.u.copy() if t % config.report_period == 0 else state.reported_u
    # Same rule as energy.generate_credits, for all devices at once.
    per_device = np.where(state.batteries >= prep.threshold, prep.credit_rate, 0.0)
    credits = np.repeat(per_device[:, None], n, axis=1)
    pre = replace(state, reported_u=reported, credits=credits)

    decision, chosen, acts = decide(pre, config, channels)
    post, moved = transfer(pre, decision, relay_raw=config.policy is Policy.COOPERATION_ONLY)

    processed = moved.computed.sum(axis=1)
    transmitted = moved.sent.sum(axis=1)
    batteries = np.empty(n)
    joules = np.empty(n)
    for i in range(n):
        batteries[i], joules[i] = drain_battery(
            float(state.batteries[i]),
            float(processed[i]),
            float(transmitted[i]),
            config.battery[i],
            float(prep.work_factor[i]),
        )

    new = replace(
        post,
        slot=t + 1,
        batteries=batteries,
        credits=credits - moved.filtered,
    )
    record = TraceRecord(
        slot=t,
        decision=decision,
        delivered=moved.delivered,
        backlog_total=total_backlog(new),
        s=new.s,
        u=new.u,
        q=new.q,
        z=new.z,
        batteries=batteries,
        joules=joules,
        activation=chosen,
        processed=processed,
        transmitted=transmitted,
        credits=credits,
        activations=acts,
    )
    return new, record


def iter_run(config: ScenarioConfig, state: SystemState | None = None) -> Iterator[TraceRecord]:
    """Yield one record per slot, starting from the all-zero state."""
    config.validate()
    state = initial_state(config) if state is None else state
    for _ in range(config.slots):
        state, rec = step(state, config)
        yield rec


class SummaryAccumulator:
    def __init__(self, config: ScenarioConfig):
        n = config.n_devices
        self.config = config
        self.count = 0
        self.slots = 0
        self.delivered = np.zeros(n)
        self.admitted = np.zeros(n)
        self.backlog = 0.0
        self.joules = np.zeros(n)

    def add(self, rec: TraceRecord) -> None:
        self.slots += 1
        self.joules += rec.joules
        if rec.slot < self.config.warmup:
            return
        self.count += 1
        self.delivered += rec.delivered
        self.admitted += rec.decision.y
        self.backlog += rec.backlog_total

    def result(self) -> Summary:
        n = self.config.n_devices
        if self.count == 0:
            return Summary(np.zeros(n), np.zeros(n), 0.0, 0.0, self.joules.copy(), self.slots,
                           self.config.warmup)
        ybar = self.admitted / self.count
        rx = list(self.config.receivers)
        util = float(np.sum(self.config.constants.utility.value(ybar[rx]))) if rx else 0.0
        return Summary(
            mean_delivered_rate=self.delivered / self.count,
            mean_admitted_rate=ybar,
            sum_utility=util,
            mean_backlog=self.backlog / self.count,
            cumulative_joules=self.joules.copy(),
            slots=self.slots,
            warmup=self.config.warmup,
        )


def summarize(records, config: ScenarioConfig) -> Summary:
    acc = SummaryAccumulator(config)
    for rec in records:
        acc.add(rec)
    return acc.result()


def run(config: ScenarioConfig) -> tuple[list[TraceRecord], Summary]:
    trace = list(iter_run(config))
    return trace, summarize(trace, config)


def run_summary(config: ScenarioConfig) -> Summary:
    """Like ``run`` but keeps no trace; for long runs."""
    return summarize(iter_run(config), config)


def run_baseline(config: ScenarioConfig, kind: Policy) -> Summary:
    if kind is Policy.EACC:
        raise ValueError("run_baseline expects NO_COOPERATION or COOPERATION_ONLY")
    return run_summary(replace(config, policy=kind))
