"""Named scenario builders shared by the tests and the experiment scripts.

Rates are in packets per slot. Helpers are the devices that are not
receivers; they contribute processing and D2D relaying.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .channel import NetworkMode
from .energy import BatteryModel
from .engine import Policy, ScenarioConfig


def three_device_example(receiver: int = 0, *, slots: int = 10_000, seed: int = 0, policy=Policy.EACC):
    """Three devices, unit source links, half a packet of processing each."""
    return ScenarioConfig.build(
        3,
        mode=NetworkMode.CELLULAR_D2D,
        source_rate=1.0,
        d2d_rate=10.0,
        d_max=0.5,
        receivers=[receiver],
        slots=slots,
        seed=seed,
        policy=policy,
    )


def processing_bound(
    helpers: int,
    *,
    receivers: int = 1,
    link_rate: float = 8.0,
    p_on: float = 1.0,
    d_max: float = 1.0,
    slots: int = 10_000,
    seed: int = 0,
    policy=Policy.EACC,
):
    """Receivers first, then helpers, all on one shared medium.

    Processing (``d_max`` per device) is the bottleneck until the medium
    fills up: a relayed packet costs two transmissions, a direct one costs one.
    """
    n = receivers + helpers
    return ScenarioConfig.build(
        n,
        mode=NetworkMode.WIFI_D2D,
        source_rate=link_rate,
        d2d_rate=link_rate,
        source_p=p_on,
        d2d_p=p_on,
        d_max=d_max,
        receivers=list(range(receivers)),
        slots=slots,
        seed=seed,
        policy=policy,
    )


def medium_cap(helpers: int, link_rate: float, d_max: float = 1.0) -> float:
    """Best single-receiver rate of ``processing_bound`` with every link ON.

    Direct traffic ``a <= d_max`` costs ``a`` slot fractions per unit; relayed
    traffic ``b <= helpers * d_max`` costs two. Time budget: ``a + 2b <= c``.
    """
    a = min(d_max, link_rate)
    b = min(helpers * d_max, max(link_rate - a, 0.0) / 2.0)
    return a + b


def battery_gate(receiver_level: float, *, slots: int = 10_000, seed: int = 0, policy=Policy.EACC):
    """A receiver at a fixed battery level with one fully charged helper."""
    bats = [BatteryModel(initial_level=receiver_level), BatteryModel(initial_level=1.0)]
    return ScenarioConfig.build(
        2,
        mode=NetworkMode.CELLULAR_D2D,
        source_rate=4.0,
        d2d_rate=8.0,
        d_max=1.0,
        battery=bats,
        receivers=[0],
        slots=slots,
        seed=seed,
        policy=policy,
    )


def stability_scenarios(slots: int = 100_000) -> list[ScenarioConfig]:
    """Fixed-arrival scenarios whose arrivals sit inside the capacity region."""
    out = []
    out.append(
        replace(three_device_example(0, slots=slots), arrivals=(1.2, 0.0, 0.0))
    )
    out.append(
        ScenarioConfig.build(
            2,
            mode=NetworkMode.WIFI_D2D,
            source_rate=8.0,
            d2d_rate=8.0,
            source_p=0.9,
            d2d_p=0.9,
            d_max=1.0,
            receivers=[0],
            arrivals=[1.6, 0.0],
            slots=slots,
        )
    )
    out.append(
        ScenarioConfig.build(
            3,
            mode=NetworkMode.WIFI_D2D,
            source_rate=12.0,
            d2d_rate=12.0,
            d_max=1.0,
            receivers=[0, 1],
            arrivals=[1.2, 1.2, 0.0],
            slots=slots,
        )
    )
    out.append(
        ScenarioConfig.build(
            2,
            mode=NetworkMode.CELLULAR_D2D,
            source_rate=[2.0, 3.0],
            source_p=[0.7, 0.8],
            d2d_rate=6.0,
            d2d_p=0.6,
            d_max=[1.0, 2.0],
            e_max=5.0,
            receivers=[0, 1],
            arrivals=[1.0, 1.2],
            slots=slots,
        )
    )
    out.append(
        ScenarioConfig.build(
            3,
            mode=NetworkMode.CELLULAR_D2D,
            source_rate=2.0,
            d2d_rate=4.0,
            d2d_p=0.5,
            d_max=1.0,
            alpha=[[1.0, 2.0, 2.0], [2.0, 1.0, 2.0], [2.0, 2.0, 1.0]],
            e_max=3.0,
            receivers=[0],
            arrivals=[1.8, 0.0, 0.0],
            slots=slots,
        )
    )
    return out


def unequal_pair(m: float, *, slots: int = 40_000, seed: int = 0, policy=Policy.EACC):
    """Two receivers with unequal processing (10 and 30) over a fast D2D link.

    Device 1's surplus processing can serve device 0's flow, so the optimum
    balances both flows at 20 packets/slot each. Link rates are large compared
    with ``m / y``, so small ``m`` leaves too little queue differential to
    route through the helper.
    """
    return ScenarioConfig.build(
        2,
        mode=NetworkMode.CELLULAR_D2D,
        m=m,
        source_rate=40.0,
        d2d_rate=100.0,
        d_max=[10.0, 30.0],
        receivers=[0, 1],
        slots=slots,
        warmup=slots // 2,
        seed=seed,
        policy=policy,
    )


def energy_constrained(
    work_factor: float, e_cap: float | None, *, slots: int = 2_000, seed: int = 0
) -> ScenarioConfig:
    """Device 0 processes and relays device 1's flow under a given work factor.

    Device 1 has no source link, so every packet it receives is computed on
    device 0; ``e_cap`` limits device 0's energy filter for that flow.
    """
    e_max = np.full((2, 2), 100.0)
    if e_cap is not None:
        e_max[0, 1] = e_cap
    bat = BatteryModel(joules_per_processed=1.0, joules_per_transmitted=0.1)
    return ScenarioConfig.build(
        2,
        mode=NetworkMode.CELLULAR_D2D,
        source_rate=[10.0, 10.0],
        source_p=[1.0, 0.0],
        d2d_rate=10.0,
        d_max=100.0,
        e_max=e_max,
        battery=bat,
        work_factor=[work_factor, 1.0],
        receivers=[1],
        slots=slots,
        seed=seed,
    )
