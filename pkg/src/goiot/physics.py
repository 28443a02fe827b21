"""Physical layer shared by all scenarios: slotted time, devices, channels, radio and CPU energy."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfeasiblePower, ZeroGain


@dataclass
class SlotClock:
    index: int = 0
    duration: float = 1e-2

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("slot duration must be positive")
        if self.index < 0:
            raise ValueError("slot index must be nonnegative")

    def tick(self) -> int:
        self.index += 1
        return self.index

    @property
    def time(self) -> float:
        return self.index * self.duration


@dataclass(frozen=True)
class DeviceProfile:
    id: int
    position: tuple[float, float]
    max_cpu_frequency: float
    cpu_energy_coefficient: float
    max_transmit_power: float

    def __post_init__(self):
        for name in ("max_cpu_frequency", "cpu_energy_coefficient", "max_transmit_power"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")

    def distance_to(self, point) -> float:
        return float(np.hypot(self.position[0] - point[0], self.position[1] - point[1]))


@dataclass(frozen=True)
class ChannelState:
    device_id: int
    gain: float
    slot: int

    def __post_init__(self):
        if not self.gain >= 0:
            raise ValueError("channel gain must be nonnegative")


@dataclass(frozen=True)
class RadioConfig:
    # none of these constants come from the experiments being reproduced; all overridable
    bandwidth_per_device: float = 1e5
    noise_psd: float = 1e-17
    pathloss_exponent: float = 3.0
    reference_distance: float = 1.0

    def __post_init__(self):
        if not (self.bandwidth_per_device > 0 and self.noise_psd > 0 and self.reference_distance > 0):
            raise ValueError("bandwidth, noise_psd and reference_distance must be positive")
        if self.pathloss_exponent < 2:
            raise ValueError("pathloss_exponent must be >= 2")

    @property
    def noise_power(self) -> float:
        return self.noise_psd * self.bandwidth_per_device


def pathloss(distance, radio: RadioConfig):
    """Deterministic path-loss term, clamped to 1 inside the reference distance."""
    d = np.asarray(distance, dtype=float)
    with np.errstate(divide="ignore"):
        pl = np.minimum(1.0, (radio.reference_distance / d) ** radio.pathloss_exponent)
    return pl if pl.ndim else float(pl)


def pathloss_rayleigh_gain(distance, radio: RadioConfig, fading_draw):
    """Channel power gain: path loss times a unit-mean exponential fading draw.

    The squared magnitude of unit-variance Rayleigh fading is exponential with mean 1,
    so ``fading_draw`` should come from ``rng.exponential(1.0)``.
    """
    if np.any(np.asarray(distance) < 0):
        raise ValueError("distance must be nonnegative")
    g = pathloss(distance, radio) * np.asarray(fading_draw, dtype=float)
    return g if np.ndim(g) else float(g)


def draw_gains(distances, radio: RadioConfig, rng: np.random.Generator) -> np.ndarray:
    """One independent fading realization per device."""
    distances = np.asarray(distances, dtype=float)
    return pathloss_rayleigh_gain(distances, radio, rng.exponential(1.0, size=distances.shape))


def draw_channels(distances, radio: RadioConfig, rng: np.random.Generator, slot: int) -> list[ChannelState]:
    gains = draw_gains(distances, radio, rng)
    return [ChannelState(device_id=k, gain=float(g), slot=slot) for k, g in enumerate(gains)]


def _gain_of(channel) -> float:
    return channel.gain if isinstance(channel, ChannelState) else float(channel)


def power_for_bits(bits, channel, radio: RadioConfig, duration: float, max_power: float | None = None) -> float:
    """Transmit power needed to push ``bits`` through the channel within ``duration`` seconds.

    Inverts the Shannon rate r = B log2(1 + p h / (N0 B)).
    """
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    if bits == 0:
        return 0.0
    gain = _gain_of(channel)
    if gain <= 0:
        raise ZeroGain(f"cannot send {bits} bits over a zero-gain channel")
    bw = radio.bandwidth_per_device
    power = float(np.expm1(np.log(2.0) * bits / (duration * bw)) * radio.noise_psd * bw / gain)
    if max_power is not None and power > max_power:
        raise InfeasiblePower(f"{bits} bits need {power:.3g} W > cap {max_power:.3g} W")
    return power


def powers_for_bits(bits, gains, radio: RadioConfig, duration: float) -> np.ndarray:
    """Vectorized ``power_for_bits`` without cap checks; zero bits cost zero, zero gain costs inf."""
    bits = np.asarray(bits, dtype=float)
    gains = np.asarray(gains, dtype=float)
    bw = radio.bandwidth_per_device
    with np.errstate(divide="ignore"):
        p = np.expm1(np.log(2.0) * bits / (duration * bw)) * radio.noise_psd * bw / gains
    return np.where(bits > 0, p, 0.0)


def rate_for_power(power, gains, radio: RadioConfig):
    """Achievable rate in bit/s at the given transmit power."""
    bw = radio.bandwidth_per_device
    return bw * np.log2(1.0 + np.asarray(power, dtype=float) * np.asarray(gains, dtype=float) / radio.noise_power)


def bits_for_power(power, gains, radio: RadioConfig, duration: float):
    return rate_for_power(power, gains, radio) * duration


def cpu_energy(frequency, duration, kappa):
    """Cubic CPU model: kappa * f^3 * busy time."""
    if np.any(np.asarray(frequency) < 0):
        raise ValueError("frequency must be nonnegative")
    e = kappa * np.asarray(frequency, dtype=float) ** 3 * np.asarray(duration, dtype=float)
    return e if np.ndim(e) else float(e)


def place_uniform(n: int, side: float, rng: np.random.Generator) -> np.ndarray:
    """``n`` positions drawn uniformly in the square [0, side]^2."""
    return rng.uniform(0.0, side, size=(n, 2))


def place_ring(n: int, center, r_min: float, r_max: float, rng: np.random.Generator) -> np.ndarray:
    """Positions uniform over the annulus r_min <= |x - center| <= r_max."""
    r = np.sqrt(rng.uniform(r_min**2, r_max**2, size=n))
    theta = rng.uniform(0.0, 2 * np.pi, size=n)
    return np.column_stack([center[0] + r * np.cos(theta), center[1] + r * np.sin(theta)])
