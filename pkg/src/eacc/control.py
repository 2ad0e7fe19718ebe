"""Per-slot EaCC controllers: flow, computation, energy, and scheduling.

Each controller maximizes one queue-weighted linear (or concave, for flow
control) term; together they maximize ``decision_objective`` slot by slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import EMPTY, ActivationSet, ChannelState, NetworkMode, SourceLink, on_links
from .model import ConfigError, ContractViolation, DecisionVector, SystemState


@dataclass(frozen=True)
class UtilitySpec:
    """``log``: g(y) = ln(y + epsilon).  ``power``: g(y) = y ** exponent."""

    kind: str = "log"
    epsilon: float = 1e-6
    exponent: float = 0.5

    def validate(self) -> None:
        if self.kind == "log":
            if not self.epsilon > 0:
                raise ConfigError("constants.epsilon: must be > 0")
        elif self.kind == "power":
            if not 0 < self.exponent < 1:
                raise ConfigError("constants.exponent: must lie in (0, 1)")
        else:
            raise ConfigError(f"constants.utility: unknown kind {self.kind!r}")

    def value(self, y):
        y = np.asarray(y, dtype=float)
        if self.kind == "log":
            return np.log(y + self.epsilon)
        return np.power(y, self.exponent)

    def maximizer(self, s: float, m: float, r_max: float) -> float:
        """argmax of ``m * g(y) - s * y`` over ``[0, r_max]``."""
        if s <= 0:
            return r_max
        if self.kind == "log":
            y = m / s - self.epsilon
        else:
            th = self.exponent
            y = (m * th / s) ** (1.0 / (1.0 - th))
        return min(max(y, 0.0), r_max)


@dataclass(frozen=True)
class ControllerConstants:
    m: float
    r_max: tuple[float, ...]
    d_max: tuple[float, ...]
    e_max: tuple[tuple[float, ...], ...]
    utility: UtilitySpec = UtilitySpec()

    @classmethod
    def uniform(cls, n: int, m=500.0, r_max=100.0, d_max=100.0, e_max=100.0, utility=None):
        vec = lambda v: tuple(float(a) for a in np.broadcast_to(np.asarray(v, float), (n,)))  # noqa: E731
        grid = np.broadcast_to(np.asarray(e_max, float), (n, n))
        return cls(
            float(m),
            vec(r_max),
            vec(d_max),
            tuple(tuple(float(c) for c in row) for row in grid),
            utility or UtilitySpec(),
        )

    def validate(self) -> None:
        if not (math.isfinite(self.m) and self.m >= 1):
            raise ConfigError("constants.M: must be finite and >= 1")
        for name in ("r_max", "d_max"):
            v = np.asarray(getattr(self, name))
            if np.any(~(v > 0)) or np.any(~np.isfinite(v)):
                raise ConfigError(f"constants.{name}: must be positive and finite")
        e = np.asarray(self.e_max)
        if np.any(~(e > 0)) or np.any(~np.isfinite(e)):
            raise ConfigError("constants.e_max: must be positive and finite")
        self.utility.validate()


def flow_control(s_n: float, constants: ControllerConstants, n: int = 0) -> float:
    """Admission for flow ``n``: maximizes ``M g(y) - S_n y`` subject to ``y <= R_n``."""
    if s_n < 0:
        raise ContractViolation("source backlog must be >= 0")
    return constants.utility.maximizer(s_n, constants.m, constants.r_max[n])


def _first_positive_argmax(score: np.ndarray) -> int | None:
    k = int(np.argmax(score))
    return k if score[k] > 0 else None


def computation_control(u_row, q_row, alpha_row, d_max_n: float) -> np.ndarray:
    u_row = np.asarray(u_row, float)
    w = u_row - np.asarray(q_row, float) * np.asarray(alpha_row, float)
    d = np.zeros_like(u_row)
    k = _first_positive_argmax(w)
    if k is not None:
        d[k] = d_max_n
    return d


def energy_control(q_row, z_row, credits_row, e_max_row) -> np.ndarray:
    """Single-winner transfer through the energy filter.

    Each target's capacity is its cap clipped by the available credits; the
    winner maximizes weight times capacity, which reduces to the largest
    weight whenever the capacities are equal.
    """
    w = np.asarray(q_row, float) - np.asarray(z_row, float)
    cap = np.minimum(np.asarray(e_max_row, float), np.asarray(credits_row, float))
    e = np.zeros_like(w)
    k = _first_positive_argmax(np.where(w > 0, w * cap, 0.0))
    if k is not None:
        e[k] = cap[k]
    return e


def computation_control_all(u, q, alpha, d_max) -> np.ndarray:
    """``computation_control`` applied to every device (row) at once."""
    w = u - q * alpha
    return _winner_rows(w, np.zeros(w.shape) + np.asarray(d_max, float)[:, None])


def energy_control_all(q, z, credits, e_max) -> np.ndarray:
    """``energy_control`` applied to every device (row) at once."""
    w = q - z
    cap = np.minimum(e_max, credits)
    return _winner_rows(np.where(w > 0, w * cap, 0.0), cap)


def _winner_rows(score: np.ndarray, amount: np.ndarray) -> np.ndarray:
    rows = np.arange(score.shape[0])
    k = np.argmax(score, axis=1)
    out = np.zeros(score.shape)
    win = score[rows, k] > 0
    out[rows[win], k[win]] = amount[rows[win], k[win]]
    return out


def _link_scores(s, reported_u, z, target_mask):
    """Best flow and weight per source link, and D2D weights."""
    w = np.asarray(s, float)[None, :] - np.asarray(reported_u, float)
    if target_mask is not None:
        w = np.where(target_mask, w, -np.inf)
    best_k = np.argmax(w, axis=1)
    best_w = np.maximum(w[np.arange(w.shape[0]), best_k], 0.0)
    zw = np.maximum(np.asarray(z, float), 0.0)
    return best_k, best_w, zw


def _induced(n: int, act: ActivationSet, best_k, best_w, zw):
    x = np.zeros((n, n))
    h = np.zeros((n, n))
    for link, rate in zip(act.active, act.rates):
        if isinstance(link, SourceLink):
            if best_w[link.n] > 0:
                x[link.n, best_k[link.n]] = rate
        elif zw[link.n, link.k] > 0:
            h[link.n, link.k] = rate
    return x, h


def _score(act: ActivationSet, best_w, zw) -> float:
    total = 0.0
    for link, rate in zip(act.active, act.rates):
        if isinstance(link, SourceLink):
            total += rate * best_w[link.n]
        else:
            total += rate * zw[link.n, link.k]
    return total


def schedule(
    s, reported_u, z, activations: list[ActivationSet], target_mask=None
) -> tuple[np.ndarray, np.ndarray, ActivationSet]:
    """Max-weight choice of ``(x, h)`` over the given activation sets.

    Source link ``n`` carries flow ``argmax_k (S_k - U_nk)`` when that weight is
    positive; D2D link ``n -> k`` is weighted by ``z[n, k]``. ``target_mask``
    restricts which flows each source link may carry.
    """
    if not activations:
        raise ContractViolation("activation list must not be empty")
    n = len(s)
    best_k, best_w, zw = _link_scores(s, reported_u, z, target_mask)
    best, best_score = None, 0.0
    for act in activations:
        sc = _score(act, best_w, zw)
        if sc > best_score:
            best, best_score = act, sc
    if best is None:
        return np.zeros((n, n)), np.zeros((n, n)), EMPTY
    x, h = _induced(n, best, best_k, best_w, zw)
    return x, h, best


def schedule_greedy(
    mode: NetworkMode, channels: ChannelState, s, reported_u, z, target_mask=None
) -> tuple[np.ndarray, np.ndarray, ActivationSet]:
    """Same result as ``schedule`` over ``feasible_activations`` without
    enumerating them; works for any number of devices."""
    n = len(s)
    best_k, best_w, zw = _link_scores(s, reported_u, z, target_mask)
    src, d2d = on_links(channels)
    src_act = [(l, float(channels.source_rate[l.n])) for l in src]
    d2d_act = [(l, float(channels.d2d_rate[l.n, l.k])) for l in d2d]

    if mode is NetworkMode.WIFI_D2D:
        best, best_score = None, 0.0
        for link, rate in src_act + d2d_act:
            sc = rate * (best_w[link.n] if isinstance(link, SourceLink) else zw[link.n, link.k])
            if sc > best_score:
                best, best_score = (link, rate), sc
        if best is None:
            return np.zeros((n, n)), np.zeros((n, n)), EMPTY
        act = ActivationSet((best[0],), (best[1],))
    else:
        base = ActivationSet(tuple(l for l, _ in src_act), tuple(r for _, r in src_act))
        base_score = _score(base, best_w, zw)
        extra, extra_score = None, 0.0
        for link, rate in d2d_act:
            sc = rate * zw[link.n, link.k]
            if sc > extra_score:
                extra, extra_score = (link, rate), sc
        if base_score + extra_score <= 0:
            return np.zeros((n, n)), np.zeros((n, n)), EMPTY
        act = base
        if extra is not None:
            act = ActivationSet(base.active + (extra[0],), base.rates + (extra[1],))
    x, h = _induced(n, act, best_k, best_w, zw)
    return x, h, act


def decision_objective(
    state: SystemState, decision: DecisionVector, constants: ControllerConstants
) -> float:
    """Per-slot drift-plus-penalty surrogate that the four controllers maximize."""
    g = constants.utility.value(decision.y)
    flow = float(np.sum(constants.m * g - state.s * decision.y))
    comp = float(np.sum(decision.d * (state.u - state.q * decision.alpha)))
    energy = float(np.sum(decision.e * (state.q - state.z)))
    sched = float(np.sum(decision.x * (state.s[None, :] - state.u)) + np.sum(decision.h * state.z))
    return flow + comp + energy + sched


def controller_decision(
    state: SystemState,
    constants: ControllerConstants,
    activations: list[ActivationSet],
    alpha: np.ndarray,
    d_max_eff=None,
    receivers=None,
) -> tuple[DecisionVector, ActivationSet]:
    """All four controllers on one state, using the state's stored credits
    and reported backlogs. Handy for verification and tests."""
    n = state.n
    receivers = range(n) if receivers is None else receivers
    d_max_eff = np.asarray(constants.d_max if d_max_eff is None else d_max_eff, float)
    y = np.zeros(n)
    for k in receivers:
        y[k] = flow_control(state.s[k], constants, k)
    x, h, chosen = schedule(state.s, state.reported_u, state.z, activations)
    d = np.vstack([computation_control(state.u[i], state.q[i], alpha[i], d_max_eff[i]) for i in range(n)])
    e = np.vstack(
        [energy_control(state.q[i], state.z[i], state.credits[i], constants.e_max[i]) for i in range(n)]
    )
    return DecisionVector(y=y, d=d, e=e, x=x, h=h, alpha=np.asarray(alpha, float)), chosen
