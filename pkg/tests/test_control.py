import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from eacc.channel import ChannelConfig, NetworkMode, fixed_channels, feasible_activations, sample_channels
from eacc.control import (
    ControllerConstants,
    UtilitySpec,
    computation_control,
    computation_control_all,
    decision_objective,
    energy_control,
    energy_control_all,
    flow_control,
    schedule,
    schedule_greedy,
)
from eacc.model import ContractViolation, DecisionVector, SystemState

C = ControllerConstants.uniform(2)


@pytest.mark.parametrize("s, y", [(100, 5), (0, 100), (10, 50)])
def test_flow_control_examples(s, y):
    assert flow_control(s, C) == pytest.approx(y, abs=1e-5)


def test_flow_control_matches_grid_search():
    # Reference: dense grid maximizer of M ln(y + eps) - s y on [0, R].
    ys = np.linspace(0, 100, 1_000_001)
    for s in (3.0, 17.0, 250.0):
        ref = ys[np.argmax(500 * np.log(ys + 1e-6) - s * ys)]
        assert flow_control(s, C) == pytest.approx(ref, abs=1e-3)


def test_power_utility_maximizer():
    c = ControllerConstants.uniform(1, utility=UtilitySpec("power", exponent=0.5))
    ys = np.linspace(0, 100, 1_000_001)
    ref = ys[np.argmax(500 * np.sqrt(ys) - 40 * ys)]
    assert flow_control(40.0, c) == pytest.approx(ref, abs=1e-3)


@given(st.floats(0, 1e5), st.floats(0, 1e5))
def test_flow_control_bounded_and_monotone(a, b):
    lo, hi = sorted((a, b))
    ya, yb = flow_control(lo, C), flow_control(hi, C)
    assert 0 <= yb <= ya <= 100


def test_flow_control_rejects_negative_backlog():
    with pytest.raises(ContractViolation):
        flow_control(-1.0, C)


@pytest.mark.parametrize(
    "u, q, d",
    [([40, 70], [10, 90], [100, 0]), ([1, 2], [5, 5], [0, 0]), ([30, 30], [0, 0], [100, 0])],
)
def test_computation_control_examples(u, q, d):
    assert computation_control(u, q, [1, 1], 100).tolist() == d


@pytest.mark.parametrize(
    "credits, e",
    [([50, 50], [50, 0]), ([10, 50], [10, 0])],
)
def test_energy_control_examples(credits, e):
    assert energy_control([20, 5], [3, 9], credits, [50, 50]).tolist() == e


def test_energy_control_equal_queues():
    assert energy_control([7, 7], [7, 7], [50, 50], [50, 50]).tolist() == [0, 0]


def test_energy_winner_weighs_capacity():
    # Larger weight but no credits loses to a smaller weight with credits.
    assert energy_control([20, 5], [0, 0], [0, 50], [50, 50]).tolist() == [0, 50]


small = st.lists(st.floats(0, 100), min_size=3, max_size=3)


@given(small, small, small, small)
def test_row_controllers_agree_with_vectorized(u, q, z, cr):
    u, q, z, cr = map(np.array, (u, q, z, cr))
    alpha = np.ones(3)
    emax = np.full(3, 40.0)
    d = computation_control(u, q, alpha, 7.0)
    e = energy_control(q, z, cr, emax)
    assert (np.count_nonzero(d) <= 1) and d.sum() <= 7.0
    assert (np.count_nonzero(e) <= 1) and np.all(e <= np.minimum(emax, cr))
    d_all = computation_control_all(u[None], q[None], alpha[None], np.array([7.0]))
    e_all = energy_control_all(q[None], z[None], cr[None], emax[None])
    assert np.array_equal(d_all[0], d) and np.array_equal(e_all[0], e)


def _all_on(n, mode, rate=100.0):
    ch = fixed_channels(ChannelConfig.uniform(n, source_rate=rate, d2d_rate=rate))
    return ch, feasible_activations(mode, ch)


def test_schedule_source_example():
    _, acts = _all_on(2, NetworkMode.WIFI_D2D)
    x, h, chosen = schedule([50, 0], np.zeros((2, 2)), np.zeros((2, 2)), acts)
    assert x[0, 0] == 100 and x.sum() == 100 and h.sum() == 0


def test_schedule_d2d_example():
    _, acts = _all_on(2, NetworkMode.WIFI_D2D)
    z = np.zeros((2, 2))
    z[1, 0] = 30
    x, h, _ = schedule([0, 0], np.zeros((2, 2)), z, acts)
    assert h[1, 0] == 100 and x.sum() == 0


def test_schedule_all_zero():
    _, acts = _all_on(2, NetworkMode.WIFI_D2D)
    x, h, chosen = schedule([0, 0], np.zeros((2, 2)), np.zeros((2, 2)), acts)
    assert chosen.active == () and x.sum() == 0 and h.sum() == 0


def test_schedule_rejects_empty_list():
    with pytest.raises(ContractViolation):
        schedule([0], np.zeros((1, 1)), np.zeros((1, 1)), [])


def _score(x, h, s, ru, z):
    return float(np.sum(x * (np.asarray(s)[None, :] - ru)) + np.sum(h * z))


@pytest.mark.parametrize("mode", list(NetworkMode))
@pytest.mark.parametrize("seed", range(30))
def test_schedule_is_max_over_activations_and_greedy_agrees(mode, seed):
    g = np.random.default_rng(seed)
    n = 3
    cfg = ChannelConfig.uniform(n, source_p=0.6, d2d_p=0.5, source_rate=g.uniform(1, 5, n), d2d_rate=4.0)
    ch = sample_channels(g, cfg, 0)
    acts = feasible_activations(mode, ch)
    s, ru, z = g.uniform(0, 10, n), g.uniform(0, 10, (n, n)), g.uniform(0, 10, (n, n))
    x, h, chosen = schedule(s, ru, z, acts)
    best = _score(x, h, s, ru, z)
    for act in acts:
        xa, ha, _ = schedule(s, ru, z, [act])
        assert _score(xa, ha, s, ru, z) <= best + 1e-9
    xg, hg, _ = schedule_greedy(mode, ch, s, ru, z)
    assert _score(xg, hg, s, ru, z) == pytest.approx(best)


def test_scaling_leaves_choices_unchanged():
    g = np.random.default_rng(1)
    _, acts = _all_on(2, NetworkMode.CELLULAR_D2D, rate=3.0)
    s, u, q, z = g.uniform(0, 9, 2), g.uniform(0, 9, (2, 2)), g.uniform(0, 9, (2, 2)), g.uniform(0, 9, (2, 2))
    for lam in (0.1, 7.0):
        a = schedule(s, u, z, acts)
        b = schedule(lam * s, lam * u, lam * z, acts)
        assert a[2] == b[2]
        for i in range(2):
            assert np.array_equal(computation_control(u[i], q[i], [1, 1], 5), computation_control(lam * u[i], lam * q[i], [1, 1], 5))
            assert np.array_equal(energy_control(q[i], z[i], [9, 9], [9, 9]) > 0, energy_control(lam * q[i], lam * z[i], [9, 9], [9, 9]) > 0)


def test_decision_objective_zero_decision_floor():
    st_ = SystemState.zeros(2)
    st_.s[:] = [3, 4]
    val = decision_objective(st_, DecisionVector.zeros(2), C)
    assert val == pytest.approx(2 * 500 * math.log(1e-6))


def test_decision_objective_single_queue():
    c = ControllerConstants.uniform(1)
    st_ = SystemState.zeros(1)
    st_.s[:] = 10
    dec = DecisionVector.zeros(1)
    dec.y[:] = 2
    assert decision_objective(st_, dec, c) == pytest.approx(500 * math.log(2 + 1e-6) - 20)
