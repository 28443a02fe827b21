import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goiot.config import default_radio
from goiot.engine import VirtualQueue, VirtualQueueSet
from goiot.errors import EmptySelection
from goiot.fl import (FLAction, FLGrid, FLParams, FLScenario, FLState, LearningCurveModel, evaluate_grid,
                      iteration_energy, iteration_latency, iteration_power, make_queues, solve_fl_slot,
                      surrogate_accuracy_step, target_at)
from goiot.physics import cpu_energy, rate_for_power

RADIO = default_radio("fl")
PARAMS = FLParams()
INF = math.inf


def queues(latency=0.0, accuracy=0.0, target=0.7):
    return VirtualQueueSet([VirtualQueue("latency", 0.2, value=latency),
                            VirtualQueue("accuracy", target, "exceed", value=accuracy, weight=100.0)])


def test_schedule_step():
    s = FLState(0.5)
    assert s.target(0) == 0.7 and s.target(449) == 0.7 and s.target(450) == 0.8
    assert target_at(((0, 0.1), (5, 0.2), (9, 0.3)), 7) == 0.2


def test_latency_limits_and_errors():
    act = FLAction([0], bits=8, batch=32, local_frequency=INF, power=INF, es_frequency=INF)
    assert iteration_latency(act, np.ones(1), PARAMS, RADIO) == 0.0
    with pytest.raises(EmptySelection):
        iteration_latency(FLAction([], [], [], [], [], 1e9), np.ones(2), PARAMS, RADIO)
    with pytest.raises(ValueError):
        FLAction([0], bits=0, batch=1, local_frequency=1, power=1, es_frequency=1)


def test_two_identical_devices_same_latency_as_one():
    one = FLAction([0], 8, 32, 1e9, 0.1, 5e9)
    two = FLAction([0, 1], 8, 32, 1e9, 0.1, 5e9)
    g = np.array([1e-8, 1e-8])
    assert iteration_latency(two, g, PARAMS, RADIO) == iteration_latency(one, g, PARAMS, RADIO)


def test_latency_hand_computed():
    g = np.array([2e-9, 5e-9])
    act = FLAction([0, 1], bits=[8, 16], batch=[32, 16], local_frequency=[1e9, 5e8], power=[0.1, 0.05],
                   es_frequency=5e9)
    snr = lambda p, h: p * h / (1e-17 * 1e6)  # noqa: E731
    t0 = 32 * 1e6 / 1e9 + 1.6e6 * 8 / 32 / (1e6 * math.log2(1 + snr(0.1, 2e-9)))
    t1 = 16 * 1e6 / 5e8 + 1.6e6 * 16 / 32 / (1e6 * math.log2(1 + snr(0.05, 5e-9)))
    assert iteration_latency(act, g, PARAMS, RADIO) == pytest.approx(max(t0, t1) + 1e8 / 5e9, rel=1e-12)


def test_power_hand_sum_and_cubic_law():
    g = np.array([2e-9, 5e-9])
    act = FLAction([0, 1], 8, 32, [1e9, 5e8], 0.1, 5e9)
    cyc = 32 * 1e6
    comp = cpu_energy(1e9, cyc / 1e9, 1e-27) + cpu_energy(5e8, cyc / 5e8, 1e-27)
    tx = sum(0.1 * 4e5 / rate_for_power(0.1, h, RADIO) for h in g)
    srv = cpu_energy(5e9, 1e8 / 5e9, 1e-29)
    assert iteration_power(act, g, PARAMS, RADIO) == pytest.approx(comp + tx + srv, rel=1e-12)
    assert iteration_power(FLAction([], [], [], [], [], 1e9), g, PARAMS, RADIO) == 0.0
    # doubling the frequency over the same busy time (twice the batch): compute power x8
    base = iteration_energy(FLAction([0], 8, 16, 5e8, 0.1, 5e9), g, PARAMS, RADIO)["compute"]
    fast = iteration_energy(FLAction([0], 8, 32, 1e9, 0.1, 5e9), g, PARAMS, RADIO)["compute"]
    assert fast == pytest.approx(8 * base)


def test_surrogate_examples():
    m = LearningCurveModel(A_max=0.95, eta=0.05, c_q=0.2, c_s=0.3, noise_sd=0.0)
    full = FLAction(np.arange(10), bits=64, batch=1, local_frequency=1, power=1, es_frequency=1)
    assert surrogate_accuracy_step(FLState(0.5), full, m, 0.0, 10).accuracy == pytest.approx(0.5225)
    s = FLState(0.42, 3)
    assert surrogate_accuracy_step(s, FLAction([], [], [], [], [], 1.0), m, 1.0, 10) == FLState(0.42, 4)
    ceiling = m.ceiling(2.0**-8, 0.5)
    act = FLAction(np.arange(5), 8, 1, 1, 1, 1)
    assert surrogate_accuracy_step(FLState(ceiling), act, m, 0.0, 10).accuracy == pytest.approx(ceiling)


def test_geometric_contraction_half_life():
    m = LearningCurveModel(noise_sd=0.0)
    act = FLAction(np.arange(10), 32, 1, 1, 1, 1)
    a_inf = m.ceiling(2.0**-32, 1.0)
    s = FLState(0.1)
    half = math.log(2) / m.eta
    gaps = []
    for _ in range(200):
        s = surrogate_accuracy_step(s, act, m, 0.0, 10)
        gaps.append(abs(s.accuracy - a_inf))
    assert np.all(np.diff(gaps) <= 0)
    k = int(round(half))
    # ln2/eta is the continuous-time half life; (1-eta)^k differs from 1/2 by O(eta)
    assert gaps[2 * k] / gaps[k] == pytest.approx(0.5, abs=0.03)


@settings(max_examples=200, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_accuracy_stays_bounded(seed):
    rng = np.random.default_rng(seed)
    m = LearningCurveModel(noise_sd=0.3)
    s = FLState(float(rng.uniform(0, 0.95)))
    for _ in range(30):
        g = int(rng.integers(0, 11))
        act = FLAction(np.arange(g), rng.integers(1, 33, g), 1, 1, 1, 1)
        s = surrogate_accuracy_step(s, act, m, float(rng.standard_normal()), 10)
        assert 0.0 <= s.accuracy <= m.A_max


def test_grid_matches_scalar_models():
    rng = np.random.default_rng(0)
    gains = rng.exponential(1e-9, PARAMS.n_devices)
    grid = FLGrid.build(PARAMS)
    power, latency, predicted, order = evaluate_grid(grid, FLState(0.5), gains, PARAMS, RADIO)
    model = PARAMS.model()
    for i in rng.choice(len(grid), 50, replace=False):
        g = int(grid.sizes[i])
        act = FLAction(np.sort(order[:g]), grid.bits[i], PARAMS.batch_size, grid.local_frequency[i], grid.power[i],
                       grid.es_frequency[i])
        assert power[i] == pytest.approx(iteration_power(act, gains, PARAMS, RADIO), rel=1e-12)
        assert latency[i] == pytest.approx(iteration_latency(act, gains, PARAMS, RADIO), rel=1e-12)
        nxt = surrogate_accuracy_step(FLState(0.5), act, model, 0.0, PARAMS.n_devices)
        assert predicted[i] == pytest.approx(nxt.accuracy, rel=1e-12)


def test_selection_is_best_channels():
    gains = np.array([1e-9, 5e-9, 3e-9, 2e-9])
    params = FLParams(n_devices=4)
    act = solve_fl_slot(FLState(0.1), queues(accuracy=50.0), 1.0, gains, params, RADIO)
    ranked = np.argsort(-gains)[:act.size]
    assert set(act.selection) == set(ranked)


def test_limiting_regimes():
    gains = np.random.default_rng(1).exponential(1e-9, 10)
    skip = FLParams(allow_skip=True)
    act = solve_fl_slot(FLState(0.9), queues(), 1e6, gains, skip, RADIO)
    assert act.size == 0
    act = solve_fl_slot(FLState(0.9), queues(), 1e6, gains, PARAMS, RADIO)
    assert act.size == 1
    act = solve_fl_slot(FLState(0.3), queues(accuracy=1e6), 1.0, gains, PARAMS, RADIO)
    assert act.size == PARAMS.n_devices and act.bits.min() == max(PARAMS.bits_grid)


def test_queues_follow_schedule():
    params = FLParams()
    sc = FLScenario(params, RADIO, 10.0, np.random.default_rng(0))
    recs = [sc.step(t) for t in range(460)]
    assert recs[449]["target"] == 0.7 and recs[450]["target"] == 0.8
    assert sc.queues["accuracy"].target == 0.8
    assert make_queues(params)["latency"].target == 0.2
