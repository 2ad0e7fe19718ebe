from dataclasses import replace

import numpy as np
import pytest

from eacc import scenarios
from eacc.channel import NetworkMode
from eacc.energy import BatteryModel
from eacc.engine import Policy, ScenarioConfig, initial_state, iter_run, run, run_baseline, run_summary, step
from eacc.model import ConfigError, total_backlog


def test_zero_demand_stays_empty():
    cfg = ScenarioConfig.build(3, receivers=[], slots=200)
    trace, summary = run(cfg)
    assert all(r.backlog_total == 0 and r.decision.y.sum() == 0 for r in trace)
    assert summary.mean_delivered_rate.sum() == 0


def test_no_processing_throttles_admission():
    cfg = ScenarioConfig.build(1, source_rate=100, work_factor=np.inf, slots=1000)
    trace, _ = run(cfg)
    y = np.array([r.decision.y[0] for r in trace])
    u = np.array([r.u[0, 0] for r in trace])
    # Each source burst into U briefly lowers S, so y falls as a trend.
    blocks = y.reshape(10, 100).mean(axis=1)
    assert np.all(np.diff(blocks) < 0)
    assert blocks[-1] < 0.2 * blocks[0]
    assert np.all(np.diff(u) >= -1e-12)
    growth = np.diff(u[::100])
    assert growth[-1] < growth[0]
    assert all(r.decision.d.sum() == 0 for r in trace)


def test_three_device_example_reaches_one_and_a_half():
    s = run_summary(scenarios.three_device_example(1))
    assert 1.425 <= s.mean_delivered_rate[1] <= 1.5


def test_no_cooperation_three_device_example():
    s = run_baseline(scenarios.three_device_example(1), Policy.NO_COOPERATION)
    assert s.mean_delivered_rate[1] == pytest.approx(0.5, rel=0.05)


def test_zero_slots():
    trace, summary = run(replace(scenarios.three_device_example(), slots=0))
    assert trace == []
    assert summary.slots == 0 and summary.mean_delivered_rate.sum() == 0 and summary.mean_backlog == 0


def test_reruns_are_identical():
    cfg = scenarios.processing_bound(2, p_on=0.7, slots=500, seed=4)
    a, b = run_summary(cfg), run_summary(cfg)
    for f in ("mean_delivered_rate", "mean_admitted_rate", "cumulative_joules"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    assert a.mean_backlog == b.mean_backlog


def test_different_seeds_differ():
    a = run_summary(scenarios.processing_bound(1, p_on=0.7, slots=500, seed=1))
    b = run_summary(scenarios.processing_bound(1, p_on=0.7, slots=500, seed=2))
    assert not np.array_equal(a.mean_admitted_rate, b.mean_admitted_rate)


def test_processing_bound_pair_doubles():
    e = run_summary(scenarios.processing_bound(1))
    n = run_baseline(scenarios.processing_bound(1), Policy.NO_COOPERATION)
    assert e.mean_delivered_rate[0] / n.mean_delivered_rate[0] >= 1.8


def test_stale_reports_refresh_on_period():
    cfg = replace(scenarios.processing_bound(1, p_on=0.8, slots=0), report_period=3)
    state = initial_state(cfg)
    for t in range(30):
        before = state
        state, rec = step(state, cfg)
        if t % 3 == 0:
            assert np.array_equal(state.reported_u, before.u)
        else:
            assert np.array_equal(state.reported_u, before.reported_u)


def test_record_backlog_matches_state():
    cfg = scenarios.three_device_example(slots=0)
    state = initial_state(cfg)
    for _ in range(50):
        state, rec = step(state, cfg)
        assert rec.backlog_total == pytest.approx(total_backlog(state))
        assert np.all(rec.delivered >= 0)


@pytest.mark.parametrize("policy", list(Policy))
def test_delivered_never_exceeds_admitted(policy):
    cfg = scenarios.processing_bound(2, p_on=0.6, slots=3000, policy=policy)
    delivered = admitted = np.zeros(3)
    for rec in iter_run(cfg):
        delivered = delivered + rec.delivered
        admitted = admitted + rec.decision.y
        assert np.all(delivered <= admitted + 1e-9)


def test_credit_gate_blocks_energy_transfer():
    cfg = scenarios.battery_gate(0.3, slots=300)
    for rec in iter_run(cfg):
        assert np.all(rec.decision.e[0] == 0)


def test_battery_and_ledger_monotone():
    bat = BatteryModel(drain_per_processed=1e-4, drain_per_transmitted=1e-4, joules_per_processed=1.0, joules_per_transmitted=0.5)
    cfg = ScenarioConfig.build(2, source_rate=4, d2d_rate=4, d_max=2, battery=bat, slots=2000)
    prev_b, total = np.ones(2), np.zeros(2)
    for rec in iter_run(cfg):
        assert np.all(rec.batteries <= prev_b) and np.all((rec.batteries >= 0) & (rec.batteries <= 1))
        assert np.all(rec.joules >= 0)
        prev_b = rec.batteries
        total += rec.joules
    assert total.sum() > 0


def test_battery_drain_eventually_cuts_credits():
    bat = BatteryModel(drain_per_processed=1e-3)
    cfg = ScenarioConfig.build(1, source_rate=4, d_max=2, battery=bat, slots=2000)
    trace, _ = run(cfg)
    assert trace[-1].batteries[0] < 0.4
    assert trace[-1].credits.sum() == 0


def test_no_cooperation_uses_own_pipeline_only():
    cfg = scenarios.processing_bound(2, p_on=0.7, slots=500, policy=Policy.NO_COOPERATION)
    for rec in iter_run(cfg):
        off = ~np.eye(3, dtype=bool)
        assert rec.decision.x[off].sum() == 0 and rec.decision.h.sum() == 0


def test_cooperation_only_cannot_relieve_processing():
    e = run_baseline(scenarios.processing_bound(2), Policy.COOPERATION_ONLY)
    n = run_baseline(scenarios.processing_bound(2), Policy.NO_COOPERATION)
    assert e.mean_delivered_rate[0] / n.mean_delivered_rate[0] <= 1.2


def _diversity(seed, policy):
    return ScenarioConfig.build(
        2,
        mode=NetworkMode.CELLULAR_D2D,
        source_rate=4.0,
        source_p=[0.3, 1.0],
        d2d_rate=8.0,
        d_max=10.0,
        receivers=[0],
        slots=3000,
        seed=seed,
        policy=policy,
    )


@pytest.mark.parametrize("seed", range(3))
def test_cooperation_only_gains_from_diversity(seed):
    c = run_summary(_diversity(seed, Policy.COOPERATION_ONLY)).mean_delivered_rate[0]
    n = run_summary(_diversity(seed, Policy.NO_COOPERATION)).mean_delivered_rate[0]
    assert c >= n


@pytest.mark.parametrize("mode", list(NetworkMode))
def test_greedy_path_matches_enumeration(mode):
    cfg = ScenarioConfig.build(4, mode=mode, source_p=0.6, d2d_p=0.5, source_rate=3, d2d_rate=5, d_max=1,
                               receivers=[0, 1], slots=1500, seed=9)
    a = run(cfg)[0]
    b = run(replace(cfg, enumeration_limit=3))[0]
    assert all(np.array_equal(r.delivered, s.delivered) and np.array_equal(r.u, s.u) for r, s in zip(a, b))
    assert b[0].activations is None and a[0].activations is not None


def test_large_network_runs_greedy():
    s = run_summary(scenarios.processing_bound(5, slots=2000))
    assert s.mean_delivered_rate[0] > 3


@pytest.mark.parametrize(
    "kw, key",
    [
        ({"source_p": 1.5}, "source_p"),
        ({"receivers": [3]}, "receivers"),
        ({"work_factor": 0.5}, "work_factor"),
        ({"report_period": 0}, "report_period"),
        ({"m": 0.5}, "M"),
    ],
)
def test_invalid_config_names_key(kw, key):
    with pytest.raises(ConfigError, match=key):
        ScenarioConfig.build(2, **kw)


def test_run_baseline_rejects_eacc():
    with pytest.raises(ValueError):
        run_baseline(scenarios.three_device_example(slots=1), Policy.EACC)


def test_bps_conversion():
    s = run_summary(scenarios.three_device_example(0, slots=2000))
    assert s.delivered_bps()[0] == pytest.approx(s.mean_delivered_rate[0] * 500 * 8 / 0.02)
