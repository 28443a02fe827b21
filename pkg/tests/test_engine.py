import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goiot.engine import (Direction, SlotObjective, VirtualQueue, VirtualQueueSet, argmin_dpp, dpp_values,
                          drift_plus_penalty, mean_rate_stability, solve_slot_exhaustive, update_virtual_queue)
from goiot.errors import EmptyActionSpace, TraceTooShort

finite = st.floats(-1e6, 1e6, allow_nan=False)


def test_queue_update_examples():
    q = VirtualQueue("d", target=1.0)
    q = update_virtual_queue(q, 3.0)
    assert q.value == 2.0
    q = update_virtual_queue(q, 0.0)
    assert q.value == 1.0
    q = update_virtual_queue(q, -5.0)
    assert q.value == 0.0
    up = update_virtual_queue(VirtualQueue("a", 0.9, Direction.EXCEED), 0.7)
    assert up.value == pytest.approx(0.2)


def test_queue_rejects_nonfinite_metric_and_negative_state():
    with pytest.raises(ValueError):
        update_virtual_queue(VirtualQueue("d", 1.0), float("nan"))
    with pytest.raises(ValueError):
        VirtualQueue("d", 1.0, value=-1.0)
    with pytest.raises(ValueError):
        VirtualQueue("d", 1.0, weight=0.0)


@settings(max_examples=300, deadline=None)
@given(target=finite, metrics=st.lists(finite, min_size=1, max_size=50),
       direction=st.sampled_from(list(Direction)))
def test_queue_never_negative(target, metrics, direction):
    q = VirtualQueue("x", target, direction)
    for m in metrics:
        q = update_virtual_queue(q, m)
        assert q.value >= 0


def test_weight_scales_pressure_not_dynamics():
    a = update_virtual_queue(VirtualQueue("x", 0.0, weight=1.0), 2.0)
    b = update_virtual_queue(VirtualQueue("x", 0.0, weight=7.0), 2.0)
    assert a.value == b.value == 2.0
    assert b.pressure == 14.0


def test_queue_set_update_requires_every_metric():
    qs = VirtualQueueSet([VirtualQueue("a", 1.0), VirtualQueue("b", 0.5, Direction.EXCEED)])
    with pytest.raises(KeyError):
        qs.update({"a": 2.0})
    qs.update({"a": 2.0, "b": 0.0})
    assert qs.snapshot() == {"queue_a": 1.0, "queue_b": 0.5}
    qs.retarget("b", 0.0)
    assert qs["b"].target == 0.0 and qs.value("b") == 0.5


def test_drift_plus_penalty_value():
    obj = SlotObjective(2.0, [(3.0, 0.5), (1.0, -1.0)])
    assert drift_plus_penalty(10.0, obj) == pytest.approx(20.0 + 1.5 - 1.0)
    with pytest.raises(ValueError):
        drift_plus_penalty(-1.0, obj)


def test_exhaustive_first_minimizer_wins():
    acts = ["a", "b", "c"]
    costs = {"a": 2.0, "b": 1.0, "c": 1.0}
    best = solve_slot_exhaustive(acts, lambda a: SlotObjective(costs[a]), V=1.0)
    assert best == "b"
    with pytest.raises(EmptyActionSpace):
        solve_slot_exhaustive([], lambda a: SlotObjective(0.0), V=1.0)


def test_zero_queues_reduce_to_cost_argmin():
    cost = np.array([3.0, 1.0, 2.0])
    gaps = np.array([[5.0], [9.0], [-1.0]])
    assert argmin_dpp(1.0, cost, [0.0], gaps) == 1


def test_large_queue_forces_constraint_satisfying_action():
    cost = np.array([0.0, 1.0])
    gaps = np.array([[1.0], [-1.0]])
    assert argmin_dpp(1.0, cost, [100.0], gaps) == 1


@settings(max_examples=300, deadline=None)
@given(n=st.integers(1, 30), m=st.integers(0, 4), seed=st.integers(0, 2**32 - 1),
       V=st.floats(0, 1e3), scale=st.floats(1e-3, 1e3))
def test_argmin_invariant_under_positive_scaling(n, m, seed, V, scale):
    rng = np.random.default_rng(seed)
    # integer-valued data keeps the scaled objective exactly proportional
    cost = rng.integers(-20, 20, n).astype(float)
    gaps = rng.integers(-20, 20, (n, m)).astype(float)
    q = rng.integers(0, 20, m).astype(float)
    V = float(round(V))
    scale = 2.0 ** round(np.log2(scale))
    assert argmin_dpp(V, cost, q, gaps) == argmin_dpp(V * scale, cost, q * scale, gaps)


def test_argmin_deterministic_and_lowest_index_on_ties():
    cost = np.array([1.0, 0.0, 0.0, 0.0])
    gaps = np.zeros((4, 1))
    assert [int(argmin_dpp(1.0, cost, [1.0], gaps)) for _ in range(5)] == [1] * 5


def test_dpp_values_batched_queue_rows():
    cost = np.ones((2, 3))
    gaps = np.ones((2, 3, 1))
    vals = dpp_values(1.0, cost, np.array([[1.0], [5.0]]), gaps)
    assert np.allclose(vals[0], 2.0) and np.allclose(vals[1], 6.0)


def test_stability_on_linear_and_bounded_traces():
    t = np.arange(1, 1001, dtype=float)
    growing = mean_rate_stability(t)
    assert growing.slope == pytest.approx(1.0) and not growing.stable
    bounded = mean_rate_stability(5 + np.sin(t))
    assert bounded.stable and abs(bounded.slope) < 1e-2
    with pytest.raises(TraceTooShort):
        mean_rate_stability(np.zeros(99))
