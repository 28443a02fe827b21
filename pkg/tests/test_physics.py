import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from goiot.errors import InfeasiblePower, ZeroGain
from goiot.physics import (ChannelState, DeviceProfile, RadioConfig, SlotClock, bits_for_power, cpu_energy,
                           draw_gains, pathloss, pathloss_rayleigh_gain, place_ring, place_uniform, power_for_bits,
                           powers_for_bits, rate_for_power)

RADIO = RadioConfig()


def test_slot_clock_ticks():
    clk = SlotClock(duration=0.01)
    assert clk.tick() == 1 and clk.tick() == 2
    assert clk.time == pytest.approx(0.02)
    with pytest.raises(ValueError):
        SlotClock(duration=0)


def test_device_profile_rejects_nonpositive():
    with pytest.raises(ValueError):
        DeviceProfile(0, (0.0, 0.0), 0.0, 1e-27, 0.1)
    d = DeviceProfile(0, (3.0, 4.0), 1e9, 1e-27, 0.1)
    assert d.distance_to((0, 0)) == pytest.approx(5.0)


def test_channel_state_gain_nonnegative():
    with pytest.raises(ValueError):
        ChannelState(0, -1.0, 0)


def test_pathloss_clamped_inside_reference():
    assert pathloss(0.5, RADIO) == 1.0
    assert pathloss(10.0, RADIO) == pytest.approx(1e-3)


def test_gain_is_pathloss_times_fading():
    assert pathloss_rayleigh_gain(10.0, RADIO, 2.0) == pytest.approx(2e-3)


def test_fading_has_unit_mean():
    rng = np.random.default_rng(3)
    g = draw_gains(np.full(200_000, 1.0), RADIO, rng)
    # exponential(1): sd of the mean is 1/sqrt(n)
    assert abs(g.mean() - 1.0) < 5 / math.sqrt(g.size)


def test_power_for_bits_inverts_shannon():
    gain, duration = 1e-6, 1e-3
    p = power_for_bits(200, gain, RADIO, duration)
    assert bits_for_power(p, gain, RADIO, duration) == pytest.approx(200)
    # hand value: (2^(200/100) - 1) * N0 * B / g
    assert p == pytest.approx(3 * 1e-17 * 1e5 / 1e-6)


def test_power_for_bits_errors():
    assert power_for_bits(0, 0.0, RADIO, 1e-3) == 0.0
    with pytest.raises(ZeroGain):
        power_for_bits(10, 0.0, RADIO, 1e-3)
    with pytest.raises(InfeasiblePower):
        power_for_bits(10_000, 1e-12, RADIO, 1e-3, max_power=0.1)
    ch = ChannelState(0, 1e-6, 0)
    assert power_for_bits(100, ch, RADIO, 1e-3) == pytest.approx(power_for_bits(100, 1e-6, RADIO, 1e-3))


@settings(max_examples=200, deadline=None)
@given(bits=st.integers(0, 2000), gain=st.floats(1e-12, 1.0))
def test_vectorized_power_matches_scalar(bits, gain):
    v = powers_for_bits(np.array([bits]), np.array([gain]), RADIO, 1e-3)[0]
    assert v == pytest.approx(power_for_bits(bits, gain, RADIO, 1e-3), rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(b1=st.integers(0, 1000), b2=st.integers(0, 1000), gain=st.floats(1e-10, 1e-2))
def test_power_monotone_in_bits(b1, b2, gain):
    lo, hi = sorted((b1, b2))
    assert power_for_bits(lo, gain, RADIO, 1e-3) <= power_for_bits(hi, gain, RADIO, 1e-3)


def test_rate_zero_at_zero_power():
    assert rate_for_power(0.0, 1e-6, RADIO) == 0.0


def test_cpu_energy_cubic():
    e1 = cpu_energy(1e9, 0.01, 1e-27)
    assert e1 == pytest.approx(1e-27 * 1e27 * 0.01)
    assert cpu_energy(2e9, 0.01, 1e-27) == pytest.approx(8 * e1)
    with pytest.raises(ValueError):
        cpu_energy(-1.0, 1.0, 1e-27)


def test_placements_inside_regions():
    rng = np.random.default_rng(0)
    pos = place_uniform(500, 10.0, rng)
    assert pos.shape == (500, 2) and pos.min() >= 0 and pos.max() <= 10
    ring = place_ring(500, (0.0, 0.0), 2.0, 5.0, rng)
    r = np.hypot(ring[:, 0], ring[:, 1])
    assert r.min() >= 2.0 - 1e-12 and r.max() <= 5.0 + 1e-12
