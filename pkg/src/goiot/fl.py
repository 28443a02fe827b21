"""Goal-oriented federated learning with a surrogate learning curve.

Each iteration the controller picks the participating devices (the g best channels), the
quantization bits of the uploaded models, local and edge CPU frequencies and the transmit power,
minimizing long-term power under an average per-iteration latency bound and an accuracy target
that follows a step schedule. Test accuracy evolves by the surrogate in
:func:`surrogate_accuracy_step` instead of real training.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .engine import Direction, VirtualQueue, VirtualQueueSet, dpp_values
from .errors import EmptySelection
from .physics import RadioConfig, draw_gains, rate_for_power

FULL_PRECISION_BITS = 32


@dataclass(frozen=True)
class LearningCurveModel:
    A_max: float = 0.95
    eta: float = 0.03
    c_q: float = 0.15
    c_s: float = 0.25
    noise_sd: float = 0.005

    def __post_init__(self):
        if min(self.A_max, self.eta, self.c_q, self.c_s, self.noise_sd) < 0 or self.A_max > 1:
            raise ValueError("learning-curve parameters must be nonnegative with A_max <= 1")

    def ceiling(self, mean_quant, participation):
        """Asymptotic accuracy for mean 2^-b over participants and participation fraction g/K."""
        return self.A_max - self.c_q * np.asarray(mean_quant) - self.c_s * (1.0 - np.asarray(participation))


@dataclass(frozen=True)
class FLState:
    accuracy: float
    iteration: int = 0
    schedule: tuple[tuple[int, float], ...] = ((0, 0.7), (450, 0.8))

    def target(self, iteration: int | None = None) -> float:
        it = self.iteration if iteration is None else iteration
        return target_at(self.schedule, it)


def target_at(schedule, iteration: int) -> float:
    current = schedule[0][1]
    for start, value in schedule:
        if iteration >= start:
            current = value
    return current


@dataclass
class FLAction:
    selection: np.ndarray  # device indices; empty means the iteration is skipped
    bits: np.ndarray
    batch: np.ndarray
    local_frequency: np.ndarray
    power: np.ndarray
    es_frequency: float

    def __post_init__(self):
        self.selection = np.asarray(self.selection, dtype=int)
        n = self.selection.size
        self.bits, self.batch, self.local_frequency, self.power = (
            np.broadcast_to(np.asarray(x, dtype=float), (n,)).copy()
            for x in (self.bits, self.batch, self.local_frequency, self.power)
        )
        if n and np.any(self.bits < 1):
            raise ValueError("selected devices need at least one quantization bit")

    @property
    def size(self) -> int:
        return int(self.selection.size)


@dataclass
class FLParams:
    n_devices: int = 10
    iterations_period: float = 1.0  # seconds of wall clock per FL iteration
    latency_bound: float = 0.2
    schedule: list = field(default_factory=lambda: [[0, 0.7], [450, 0.8]])
    initial_accuracy: float = 0.1
    A_max: float = 0.95
    eta: float = 0.03
    c_q: float = 0.15
    c_s: float = 0.25
    noise_sd: float = 0.005
    model_size_bits: float = 1.6e6  # full-precision payload
    cycles_per_sample: float = 1e6
    batch_size: int = 32
    aggregation_cycles: float = 1e8
    max_local_frequency: float = 1.5e9
    local_kappa: float = 1e-27
    max_es_frequency: float = 1e10
    es_kappa: float = 1e-29
    max_transmit_power: float = 0.2
    bits_grid: list = field(default_factory=lambda: [2, 4, 8, 16, 32])
    frequency_levels: int = 4
    power_levels: int = 4
    power_span: float = 100.0
    allow_skip: bool = False
    distance_min: float = 50.0
    distance_max: float = 250.0
    latency_weight: float = 1.0
    accuracy_weight: float = 100.0

    def model(self) -> LearningCurveModel:
        return LearningCurveModel(self.A_max, self.eta, self.c_q, self.c_s, self.noise_sd)

    def schedule_tuple(self) -> tuple[tuple[int, float], ...]:
        return tuple((int(s), float(v)) for s, v in self.schedule)

    def local_frequencies(self) -> np.ndarray:
        return np.linspace(self.max_local_frequency / self.frequency_levels, self.max_local_frequency,
                           self.frequency_levels)

    def es_frequencies(self) -> np.ndarray:
        return np.linspace(self.max_es_frequency / self.frequency_levels, self.max_es_frequency,
                           self.frequency_levels)

    def transmit_powers(self) -> np.ndarray:
        return np.geomspace(self.max_transmit_power / self.power_span, self.max_transmit_power, self.power_levels)


def payload_bits(model_size_bits: float, bits):
    """Quantizing to b bits shrinks the full-precision payload by b/32."""
    return model_size_bits * np.asarray(bits, dtype=float) / FULL_PRECISION_BITS


def iteration_latency(action: FLAction, gains, params: FLParams, radio: RadioConfig) -> float:
    """Slowest participant's compute + upload time, plus the aggregation time at the server."""
    if action.size == 0:
        raise EmptySelection("latency undefined for an empty selection")
    g = np.asarray(gains, dtype=float)[action.selection]
    with np.errstate(divide="ignore"):
        compute = action.batch * params.cycles_per_sample / action.local_frequency
        upload = payload_bits(params.model_size_bits, action.bits) / rate_for_power(action.power, g, radio)
        aggregate = params.aggregation_cycles / action.es_frequency
    return float(np.max(compute + upload) + aggregate)


def iteration_energy(action: FLAction, gains, params: FLParams, radio: RadioConfig) -> dict:
    if action.size == 0:
        return {"compute": 0.0, "transmit": 0.0, "server": 0.0}
    g = np.asarray(gains, dtype=float)[action.selection]
    cycles = action.batch * params.cycles_per_sample
    upload = payload_bits(params.model_size_bits, action.bits) / rate_for_power(action.power, g, radio)
    return {
        "compute": float(np.sum(params.local_kappa * action.local_frequency**2 * cycles)),
        "transmit": float(np.sum(action.power * upload)),
        "server": float(params.es_kappa * action.es_frequency**2 * params.aggregation_cycles),
    }


def iteration_power(action: FLAction, gains, params: FLParams, radio: RadioConfig) -> float:
    """Average power over one iteration period: device compute, uplink and server aggregation."""
    return sum(iteration_energy(action, gains, params, radio).values()) / params.iterations_period


def surrogate_accuracy_step(state: FLState, action: FLAction, model: LearningCurveModel, noise_draw: float,
                            n_devices: int) -> FLState:
    """Geometric contraction toward the ceiling set by quantization and participation."""
    if action.size == 0:
        return replace(state, iteration=state.iteration + 1)
    ceiling = model.ceiling(np.mean(2.0 ** -action.bits), action.size / n_devices)
    acc = state.accuracy + model.eta * (ceiling - state.accuracy) + model.noise_sd * noise_draw
    return replace(state, accuracy=float(np.clip(acc, 0.0, model.A_max)), iteration=state.iteration + 1)


def make_queues(params: FLParams) -> VirtualQueueSet:
    return VirtualQueueSet([
        VirtualQueue("latency", params.latency_bound, Direction.STAY_BELOW, weight=params.latency_weight),
        VirtualQueue("accuracy", target_at(params.schedule_tuple(), 0), Direction.EXCEED,
                     weight=params.accuracy_weight),
    ])


@dataclass
class FLGrid:
    """Structured candidate set: top-g channel subsets x bits x local freq x power x server freq."""

    sizes: np.ndarray
    bits: np.ndarray
    local_frequency: np.ndarray
    power: np.ndarray
    es_frequency: np.ndarray

    @classmethod
    def build(cls, params: FLParams) -> "FLGrid":
        g0 = 0 if params.allow_skip else 1
        axes = np.meshgrid(np.arange(g0, params.n_devices + 1), np.asarray(params.bits_grid, dtype=float),
                           params.local_frequencies(), params.transmit_powers(), params.es_frequencies(),
                           indexing="ij")
        return cls(*(a.ravel() for a in axes))

    def __len__(self):
        return self.sizes.size


def evaluate_grid(grid: FLGrid, state: FLState, gains, params: FLParams, radio: RadioConfig):
    """Power, latency and predicted next accuracy of every candidate (noise-free surrogate)."""
    gains = np.asarray(gains, dtype=float)
    order = np.argsort(-gains, kind="stable")
    g_sorted = gains[order]
    K = params.n_devices
    # uplink time of the rank-r device at each power level: (levels, K)
    inv_rate = 1.0 / rate_for_power(params.transmit_powers()[:, None], g_sorted[None, :], radio)
    cum_inv_rate = np.concatenate([np.zeros((inv_rate.shape[0], 1)), np.cumsum(inv_rate, axis=1)], axis=1)
    p_idx = np.searchsorted(params.transmit_powers(), grid.power)
    g = grid.sizes
    active = g > 0
    payload = payload_bits(params.model_size_bits, grid.bits)
    slowest = inv_rate[p_idx, np.maximum(g - 1, 0)]

    cycles = params.batch_size * params.cycles_per_sample
    latency = cycles / grid.local_frequency + payload * slowest + params.aggregation_cycles / grid.es_frequency
    energy = (g * params.local_kappa * grid.local_frequency**2 * cycles
              + grid.power * payload * cum_inv_rate[p_idx, g]
              + params.es_kappa * grid.es_frequency**2 * params.aggregation_cycles)
    power = np.where(active, energy, 0.0) / params.iterations_period
    latency = np.where(active, latency, 0.0)

    model = params.model()
    ceiling = model.ceiling(2.0 ** -grid.bits, g / K)
    predicted = np.where(active, state.accuracy + model.eta * (ceiling - state.accuracy), state.accuracy)
    return power, latency, np.clip(predicted, 0.0, model.A_max), order


def solve_fl_slot(state: FLState, queues: VirtualQueueSet, V: float, gains, params: FLParams, radio: RadioConfig,
                  grid: FLGrid | None = None) -> FLAction:
    """Exhaustive drift-plus-penalty minimization over the structured candidate grid."""
    grid = grid or FLGrid.build(params)
    power, latency, predicted, order = evaluate_grid(grid, state, gains, params, radio)
    lat_q, acc_q = queues["latency"], queues["accuracy"]
    gaps = np.column_stack([lat_q.gap(latency), acc_q.gap(predicted)])
    vals = dpp_values(V, power, [lat_q.pressure, acc_q.pressure], gaps)
    i = int(np.argmin(vals))
    g = int(grid.sizes[i])
    return FLAction(
        selection=np.sort(order[:g]),
        bits=grid.bits[i],
        batch=params.batch_size,
        local_frequency=grid.local_frequency[i],
        power=grid.power[i],
        es_frequency=float(grid.es_frequency[i]),
    )


COLUMNS = [
    "slot", "accuracy", "target", "power", "latency", "selection_size", "mean_bits", "local_frequency",
    "es_frequency", "tx_power", "queue_latency", "queue_accuracy",
]


class FLScenario:
    columns = COLUMNS
    queue_names = ("latency", "accuracy")

    def __init__(self, params: FLParams, radio: RadioConfig, V: float, rng: np.random.Generator):
        self.params = params
        self.radio = radio
        self.V = V
        self.model = params.model()
        self.grid = FLGrid.build(params)
        place_rng, self.channel_rng, self.noise_rng = rng.spawn(3)
        self.distances = place_rng.uniform(params.distance_min, params.distance_max, params.n_devices)
        self.state = FLState(params.initial_accuracy, 0, params.schedule_tuple())
        self.queues = make_queues(params)

    def step(self, slot: int) -> dict:
        gains = draw_gains(self.distances, self.radio, self.channel_rng)
        target = self.state.target()
        self.queues.retarget("accuracy", target)
        action = solve_fl_slot(self.state, self.queues, self.V, gains, self.params, self.radio, self.grid)
        noise = float(self.noise_rng.standard_normal())
        if action.size:
            latency = iteration_latency(action, gains, self.params, self.radio)
            power = iteration_power(action, gains, self.params, self.radio)
        else:
            latency = power = 0.0
        self.state = surrogate_accuracy_step(self.state, action, self.model, noise, self.params.n_devices)
        self.queues.update({"latency": latency, "accuracy": self.state.accuracy})
        return {
            "slot": slot,
            "accuracy": self.state.accuracy,
            "target": target,
            "power": power,
            "latency": latency,
            "selection_size": action.size,
            "mean_bits": float(np.mean(action.bits)) if action.size else 0.0,
            "local_frequency": float(np.mean(action.local_frequency)) if action.size else 0.0,
            "es_frequency": action.es_frequency if action.size else 0.0,
            "tx_power": float(np.mean(action.power)) if action.size else 0.0,
            **self.queues.snapshot(),
        }
