"""Two-state (ON/OFF) link realizations and the protocol-model activation sets.

Two network modes are supported. In ``CELLULAR_D2D`` the source links use
orthogonal cellular spectrum and all run concurrently, while the D2D links share
one Wi-Fi Direct channel. In ``WIFI_D2D`` every link, source or D2D, shares a
single medium, so at most one link is active per slot.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import NamedTuple, Union

import numpy as np

from .model import ConfigError, ContractViolation


class EnumerationLimitError(ContractViolation):
    """Too many devices for exhaustive activation enumeration."""


class NetworkMode(enum.Enum):
    CELLULAR_D2D = "cellular_d2d"
    WIFI_D2D = "wifi_d2d"


class SourceLink(NamedTuple):
    n: int


class D2DLink(NamedTuple):
    n: int
    k: int


LinkId = Union[SourceLink, D2DLink]


@dataclass(frozen=True)
class ChannelConfig:
    """Per-link ON probabilities and ON rates (packets/slot).

    D2D grids are indexed ``[n][k]`` for the directed link ``n -> k``; the
    diagonal is ignored.
    """

    source_p: tuple[float, ...]
    source_rate: tuple[float, ...]
    d2d_p: tuple[tuple[float, ...], ...]
    d2d_rate: tuple[tuple[float, ...], ...]

    @property
    def n(self) -> int:
        return len(self.source_p)

    @classmethod
    def uniform(cls, n: int, source_p=1.0, source_rate=1.0, d2d_p=1.0, d2d_rate=1.0):
        def vec(v):
            return tuple(float(a) for a in np.broadcast_to(np.asarray(v, dtype=float), (n,)))

        def grid(v):
            a = np.array(np.broadcast_to(np.asarray(v, dtype=float), (n, n)))
            np.fill_diagonal(a, 0.0)
            return tuple(tuple(float(c) for c in row) for row in a)

        return cls(vec(source_p), vec(source_rate), grid(d2d_p), grid(d2d_rate))

    def validate(self) -> None:
        n = self.n
        if len(self.source_rate) != n or len(self.d2d_p) != n or len(self.d2d_rate) != n:
            raise ConfigError("channel: dimensions inconsistent with number of devices")
        if any(len(r) != n for r in self.d2d_p) or any(len(r) != n for r in self.d2d_rate):
            raise ConfigError("channel: D2D grids must be n x n")
        sp, dp = np.asarray(self.source_p), np.asarray(self.d2d_p)
        if np.any(~np.isfinite(sp)) or np.any(sp < 0) or np.any(sp > 1):
            raise ConfigError("channel.source_p: probabilities must lie in [0, 1]")
        if np.any(~np.isfinite(dp)) or np.any(dp < 0) or np.any(dp > 1):
            raise ConfigError("channel.d2d_p: probabilities must lie in [0, 1]")
        for name in ("source_rate", "d2d_rate"):
            r = np.asarray(getattr(self, name))
            if np.any(~np.isfinite(r)) or np.any(r < 0):
                raise ConfigError(f"channel.{name}: rates must be finite and >= 0")
        for n_, (p, c) in enumerate(zip(self.source_p, self.source_rate)):
            if p > 0 and c <= 0:
                raise ConfigError(f"channel.source_rate: link {n_} can be ON with zero rate")
        off = ~np.eye(n, dtype=bool)
        if np.any((dp > 0) & (np.asarray(self.d2d_rate) <= 0) & off):
            raise ConfigError("channel.d2d_rate: a D2D link can be ON with zero rate")


@dataclass(frozen=True)
class ChannelState:
    source_on: np.ndarray
    d2d_on: np.ndarray
    source_rate: np.ndarray
    d2d_rate: np.ndarray

    @property
    def n(self) -> int:
        return self.source_on.shape[0]

    def key(self) -> tuple[bytes, bytes]:
        return self.source_on.tobytes(), self.d2d_on.tobytes()


@dataclass(frozen=True)
class ActivationSet:
    """Links transmitting together in one slot, with their rates."""

    active: tuple[LinkId, ...]
    rates: tuple[float, ...]

    def rate(self, link: LinkId) -> float:
        return self.rates[self.active.index(link)]

    def __len__(self) -> int:
        return len(self.active)


EMPTY = ActivationSet((), ())


def sample_channels(rng: np.random.Generator, config: ChannelConfig, t: int) -> ChannelState:
    """Draw one slot's link states; each link is independently ON with its own
    probability. Same generator state gives the same realization."""
    if t < 0:
        raise ContractViolation("slot index must be >= 0")
    sp = np.asarray(config.source_p)
    dp = np.asarray(config.d2d_p)
    for key, p in (("source_p", sp), ("d2d_p", dp)):
        if np.any(~(p >= 0)) or np.any(~(p <= 1)):
            raise ConfigError(f"channel.{key}: ON probabilities must lie in [0, 1]")
    return draw_channels(
        rng, sp, np.asarray(config.source_rate), dp, np.asarray(config.d2d_rate)
    )


def draw_channels(rng, source_p, source_rate, d2d_p, d2d_rate) -> ChannelState:
    """Unchecked core of ``sample_channels`` on pre-built arrays."""
    n = source_p.shape[0]
    draws = rng.random(n + n * n)
    source_on = draws[:n] < source_p
    d2d_on = draws[n:].reshape(n, n) < d2d_p
    np.fill_diagonal(d2d_on, False)
    return ChannelState(
        source_on=source_on,
        d2d_on=d2d_on,
        source_rate=np.where(source_on, source_rate, 0.0),
        d2d_rate=np.where(d2d_on, d2d_rate, 0.0),
    )


def fixed_channels(config: ChannelConfig) -> ChannelState:
    """Every link with positive probability switched ON (the mean-free view)."""
    sp = np.asarray(config.source_p) > 0
    dp = (np.asarray(config.d2d_p) > 0) & ~np.eye(config.n, dtype=bool)
    return ChannelState(
        sp, dp, np.where(sp, config.source_rate, 0.0), np.where(dp, config.d2d_rate, 0.0)
    )


def on_links(channels: ChannelState) -> tuple[list[SourceLink], list[D2DLink]]:
    n = channels.n
    src = [SourceLink(i) for i in range(n) if channels.source_on[i]]
    d2d = [D2DLink(i, j) for i in range(n) for j in range(n) if i != j and channels.d2d_on[i, j]]
    return src, d2d


def feasible_activations(
    mode: NetworkMode, channels: ChannelState, enumeration_limit: int = 4
) -> list[ActivationSet]:
    """All activation sets allowed by the protocol model, in a fixed order.

    ``WIFI_D2D``: the empty set, then each ON source link, then each ON D2D link.
    ``CELLULAR_D2D``: every ON source link together with no D2D link or exactly
    one ON D2D link. With no ON link at all only the empty set remains.
    """
    if channels.n > enumeration_limit:
        raise EnumerationLimitError(
            f"{channels.n} devices exceed the enumeration limit {enumeration_limit}; "
            "use control.schedule_greedy"
        )
    src, d2d = on_links(channels)
    src_rates = [float(channels.source_rate[l.n]) for l in src]

    def d2d_rate(l: D2DLink) -> float:
        return float(channels.d2d_rate[l.n, l.k])

    if mode is NetworkMode.WIFI_D2D:
        out = [EMPTY]
        out += [ActivationSet((l,), (r,)) for l, r in zip(src, src_rates)]
        out += [ActivationSet((l,), (d2d_rate(l),)) for l in d2d]
        return out

    base = ActivationSet(tuple(src), tuple(src_rates))
    out = [base]
    out += [ActivationSet(base.active + (l,), base.rates + (d2d_rate(l),)) for l in d2d]
    return out
