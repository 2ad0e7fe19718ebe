"""Random small (state, slot) cases for brute-force max-weight checks."""

import numpy as np

from eacc.channel import NetworkMode, draw_channels
from eacc.energy import BatteryModel
from eacc.engine import ScenarioConfig, _activations, _prepare, decide
from eacc.model import SystemState


def random_case(g: np.random.Generator):
    """Returns ``(state, decision, activations, config)`` for one EaCC slot."""
    n = int(g.integers(1, 3))
    mode = NetworkMode.WIFI_D2D if g.random() < 0.5 else NetworkMode.CELLULAR_D2D
    credit = float(g.integers(0, 11))
    cfg = ScenarioConfig.build(
        n,
        mode=mode,
        m=float(g.integers(1, 60)),
        r_max=g.integers(1, 11, n).astype(float),
        d_max=g.integers(1, 6, n).astype(float),
        e_max=g.integers(1, 6, (n, n)).astype(float),
        source_p=g.uniform(0.2, 1.0, n),
        source_rate=g.integers(1, 11, n).astype(float),
        d2d_p=g.uniform(0.2, 1.0, (n, n)),
        d2d_rate=g.integers(1, 11, (n, n)).astype(float),
        alpha=g.choice([0.5, 1.0, 2.0], (n, n)),
        battery=BatteryModel(credit_rate_above=credit),
        receivers=[k for k in range(n) if g.random() < 0.8],
    )
    prep = _prepare(cfg)
    ch = draw_channels(g, prep.source_p, prep.source_rate, prep.d2d_p, prep.d2d_rate)
    u = g.uniform(0, 20, (n, n))
    state = SystemState(
        slot=int(g.integers(0, 1000)),
        s=g.uniform(0, 20, n),
        u=u,
        q=g.uniform(0, 20, (n, n)),
        z=g.uniform(0, 20, (n, n)),
        batteries=np.ones(n),
        credits=np.where(g.random((n, n)) < 0.8, credit, g.uniform(0, credit + 1e-9, (n, n))),
        reported_u=u.copy(),
    )
    decision, _, acts = decide(state, cfg, ch)
    return state, decision, _activations(cfg, prep, ch), cfg
