"""Goal-oriented edge inference.

Each device runs a three-stage fluid pipeline: a local queue of raw images, a transmit queue
of encoded bits, and a remote queue of images waiting for classification at the edge server.
Images can instead be classified on the device (the offload flag), at a local accuracy penalty.
Every slot the controller picks compression level, offload flag, local CPU frequency, transmit
power and an edge-server CPU share per device, minimizing long-term energy under an average
end-to-end delay bound and a long-term accuracy target.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .engine import Direction, VirtualQueue, VirtualQueueSet, dpp_values
from .errors import InfeasibleAction
from .physics import RadioConfig, draw_gains, rate_for_power


@dataclass(frozen=True)
class CompressionLevel:
    bits_per_image: float
    encode_cycles: float
    accuracy: float


@dataclass(frozen=True)
class CompressionProfile:
    family: str
    levels: tuple[CompressionLevel, ...]
    local_accuracy_penalty: float = 0.05

    def __post_init__(self):
        levels = tuple(sorted((CompressionLevel(*lv) if not isinstance(lv, CompressionLevel) else lv
                               for lv in self.levels), key=lambda lv: lv.bits_per_image))
        object.__setattr__(self, "levels", levels)
        if len(levels) < 2:
            raise ValueError("a compression profile needs at least 2 levels")
        acc = [lv.accuracy for lv in levels]
        if any(b < a for a, b in zip(acc, acc[1:])):
            raise ValueError("accuracy must be non-decreasing in bits per image")
        if not all(0 <= a <= 1 for a in acc):
            raise ValueError("accuracies must lie in [0, 1]")

    @property
    def bits(self) -> np.ndarray:
        return np.array([lv.bits_per_image for lv in self.levels])

    @property
    def cycles(self) -> np.ndarray:
        return np.array([lv.encode_cycles for lv in self.levels])

    @property
    def accuracies(self) -> np.ndarray:
        return np.array([lv.accuracy for lv in self.levels])

    @property
    def local_accuracy(self) -> float:
        return self.levels[-1].accuracy - self.local_accuracy_penalty


# Synthetic accuracy-vs-size tables: a learned task-oriented encoder against plain downsampling
# at the same payload sizes. Only their ordering matters for the experiments.
GOAL_ORIENTED = CompressionProfile(
    "goal_oriented",
    (
        CompressionLevel(2000, 5e5, 0.92),
        CompressionLevel(4000, 5e5, 0.95),
        CompressionLevel(8000, 5e5, 0.97),
        CompressionLevel(16000, 5e5, 0.98),
    ),
)
DOWNSAMPLING = CompressionProfile(
    "downsampling",
    (
        CompressionLevel(2000, 5e5, 0.88),
        CompressionLevel(4000, 5e5, 0.91),
        CompressionLevel(8000, 5e5, 0.93),
        CompressionLevel(16000, 5e5, 0.94),
    ),
)
FAMILIES = {p.family: p for p in (GOAL_ORIENTED, DOWNSAMPLING)}


@dataclass
class InferenceParams:
    n_devices: int = 5
    arrival_rate: float = 60.0  # images/s per device
    arrivals: str = "deterministic"
    slot_duration: float = 0.01
    delay_bound: float = 0.2
    accuracy_target: float = 0.95
    family: str = "goal_oriented"
    levels: list | None = None  # overrides the family table: [[bits, encode_cycles, accuracy], ...]
    local_accuracy_penalty: float = 0.05
    local_classify_cycles: float = 1e7
    remote_classify_cycles: float = 1e7
    max_local_frequency: float = 1e9
    local_kappa: float = 1e-27
    max_es_frequency: float = 1e10
    es_kappa: float = 1e-29
    max_transmit_power: float = 0.2
    frequency_levels: int = 8
    power_levels: int = 8
    power_span: float = 1e3  # ratio between the largest and smallest nonzero power level
    delay_weight: float = 1.0
    accuracy_weight: float = 100.0
    distance_min: float = 300.0
    distance_max: float = 600.0

    def __post_init__(self):
        if self.arrivals not in ("deterministic", "poisson"):
            raise ValueError("arrivals must be 'deterministic' or 'poisson'")
        if self.levels is None and self.family not in FAMILIES:
            raise ValueError(f"unknown compression family {self.family!r}")

    def profile(self) -> CompressionProfile:
        if self.levels is not None:
            return CompressionProfile(self.family, tuple(CompressionLevel(*lv) for lv in self.levels),
                                      self.local_accuracy_penalty)
        base = FAMILIES[self.family]
        return CompressionProfile(base.family, base.levels, self.local_accuracy_penalty)

    @property
    def total_arrival_rate(self) -> float:
        return self.n_devices * self.arrival_rate

    @property
    def occupancy_bound(self) -> float:
        """Little's law: average images in the system allowed by the delay bound."""
        return self.total_arrival_rate * self.delay_bound

    def local_frequencies(self) -> np.ndarray:
        return np.linspace(0.0, self.max_local_frequency, self.frequency_levels)

    def es_frequencies(self) -> np.ndarray:
        # equal per-device caps keep the shares summing to at most the server maximum
        return np.linspace(0.0, self.max_es_frequency / self.n_devices, self.frequency_levels)

    def transmit_powers(self) -> np.ndarray:
        nz = np.geomspace(self.max_transmit_power / self.power_span, self.max_transmit_power,
                          self.power_levels - 1)
        return np.concatenate([[0.0], nz])


@dataclass
class QueueState:
    local: np.ndarray
    tx_bits: np.ndarray
    tx_images: np.ndarray
    remote: np.ndarray

    @classmethod
    def empty(cls, n: int) -> "QueueState":
        return cls(*(np.zeros(n) for _ in range(4)))

    def copy(self) -> "QueueState":
        return QueueState(self.local.copy(), self.tx_bits.copy(), self.tx_images.copy(), self.remote.copy())

    def occupancy(self) -> np.ndarray:
        """Images in the system per device."""
        return self.local + self.tx_images + self.remote

    def total_occupancy(self) -> float:
        return float(np.sum(self.occupancy()))


@dataclass
class InferenceAction:
    level: np.ndarray
    offload: np.ndarray
    local_frequency: np.ndarray
    power: np.ndarray
    es_frequency: np.ndarray


def e2e_delay_estimate(state: QueueState, arrival_rate: float) -> float:
    """Little's law: images in the system over the arrival rate feeding them."""
    if arrival_rate <= 0:
        raise ValueError("arrival rate must be positive")
    return state.total_occupancy() / arrival_rate


def _check_caps(action: InferenceAction, params: InferenceParams, n_levels: int) -> None:
    eps = 1e-9
    if np.any(action.local_frequency < 0) or np.any(action.local_frequency > params.max_local_frequency * (1 + eps)):
        raise InfeasibleAction("local CPU frequency outside [0, max]")
    if np.any(action.power < 0) or np.any(action.power > params.max_transmit_power * (1 + eps)):
        raise InfeasibleAction("transmit power outside [0, max]")
    if np.any(action.es_frequency < 0) or np.sum(action.es_frequency) > params.max_es_frequency * (1 + eps):
        raise InfeasibleAction("edge-server frequency shares exceed the server maximum")
    if np.any(action.level < 0) or np.any(action.level >= n_levels):
        raise InfeasibleAction("compression level index out of range")


def step_inference_slot(state: QueueState, action: InferenceAction, arrivals, gains, params: InferenceParams,
                        radio: RadioConfig, profile: CompressionProfile | None = None):
    """Advance every device's pipeline by one slot.

    Service is computed on the queues present at the start of the slot; arrivals and the output of
    each stage join the next queue at the end, so a lone image needs three slots to complete.
    Returns the new state and a dict of slot metrics.
    """
    profile = profile or params.profile()
    _check_caps(action, params, len(profile.levels))
    tau = params.slot_duration
    lvl = np.asarray(action.level, dtype=int)
    off = np.asarray(action.offload, dtype=bool)
    f_loc = np.asarray(action.local_frequency, dtype=float)
    f_es = np.asarray(action.es_frequency, dtype=float)
    p = np.asarray(action.power, dtype=float)

    cyc = np.where(off, profile.cycles[lvl], params.local_classify_cycles)
    served_local = np.minimum(state.local, f_loc * tau / cyc)
    e_local = params.local_kappa * f_loc**2 * served_local * cyc

    rate = rate_for_power(p, gains, radio)
    bits_out = np.minimum(state.tx_bits, rate * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_tx = np.where(rate > 0, p * bits_out / rate, 0.0)
        img_out = np.where(state.tx_bits > 0, bits_out * state.tx_images / state.tx_bits, 0.0)

    served_remote = np.minimum(state.remote, f_es * tau / params.remote_classify_cycles)
    e_es = params.es_kappa * f_es**2 * served_remote * params.remote_classify_cycles

    new = QueueState(
        local=state.local - served_local + np.asarray(arrivals, dtype=float),
        tx_bits=state.tx_bits - bits_out + np.where(off, served_local * profile.bits[lvl], 0.0),
        tx_images=state.tx_images - img_out + np.where(off, served_local, 0.0),
        remote=state.remote - served_remote + img_out,
    )
    # fluid round-off must not leave tiny negative backlogs
    for arr in (new.local, new.tx_bits, new.tx_images, new.remote):
        np.maximum(arr, 0.0, out=arr)

    acc = np.where(off, profile.accuracies[lvl], profile.local_accuracy)
    processed = float(served_local.sum())
    completed = served_remote + np.where(off, 0.0, served_local)
    n_bar = params.total_arrival_rate * tau
    target = params.accuracy_target
    metrics = {
        "arrivals": float(np.sum(arrivals)),
        "processed": processed,
        "completed": float(completed.sum()),
        "energy_device": float(e_local.sum() + e_tx.sum()),
        "energy_es": float(e_es.sum()),
        "energy": float(e_local.sum() + e_tx.sum() + e_es.sum()),
        "occupancy": new.total_occupancy(),
        "delay": e2e_delay_estimate(new, params.total_arrival_rate),
        "accuracy": float(np.dot(served_local, acc) / processed) if processed > 0 else float("nan"),
        # per-image accuracy surplus rescaled to a nominal slot; its long-run mean >= target
        # is the per-image accuracy constraint
        "accuracy_metric": target + float(np.dot(served_local, acc - target)) / n_bar,
        "offload_fraction": float(np.mean(off)),
        "mean_bits": float(np.mean(profile.bits[lvl])),
        "local_queue": float(new.local.sum()),
        "tx_queue_bits": float(new.tx_bits.sum()),
        "remote_queue": float(new.remote.sum()),
    }
    return new, metrics


def make_queues(params: InferenceParams) -> VirtualQueueSet:
    return VirtualQueueSet([
        VirtualQueue("delay", params.occupancy_bound, Direction.STAY_BELOW, weight=params.delay_weight),
        VirtualQueue("accuracy", params.accuracy_target, Direction.EXCEED, weight=params.accuracy_weight),
    ])


@dataclass
class CandidateGrid:
    """Discretized per-device decisions, split into the three separable pipeline stages."""

    level: np.ndarray
    offload: np.ndarray
    local_frequency: np.ndarray
    power: np.ndarray
    es_frequency: np.ndarray
    # per local-stage candidate: cycles per image, accuracy, bits queued per image, completes locally
    cycles: np.ndarray = field(default=None, repr=False)
    accuracy: np.ndarray = field(default=None, repr=False)
    queued_bits: np.ndarray = field(default=None, repr=False)
    completes: np.ndarray = field(default=None, repr=False)

    @classmethod
    def build(cls, params: InferenceParams, profile: CompressionProfile) -> "CandidateGrid":
        lv, off, f = np.meshgrid(np.arange(len(profile.levels)), np.array([True, False]),
                                 params.local_frequencies(), indexing="ij")
        lv, off, f = lv.ravel(), off.ravel(), f.ravel()
        return cls(
            lv, off, f, params.transmit_powers(), params.es_frequencies(),
            cycles=np.where(off, profile.cycles[lv], params.local_classify_cycles),
            accuracy=np.where(off, profile.accuracies[lv], profile.local_accuracy),
            queued_bits=np.where(off, profile.bits[lv], 0.0),
            completes=np.where(off, 0.0, 1.0),
        )


def stage_objectives(state: QueueState, queues: VirtualQueueSet, V: float, gains, params: InferenceParams,
                     radio: RadioConfig, grid: CandidateGrid, bits_ref: float):
    """Drift-plus-penalty values of every candidate of each stage, one row per device.

    Physical backlogs enter through their own quadratic drift (tx backlog measured in units of
    ``bits_ref``); the delay queue rewards completions and the accuracy queue rewards accurate
    images. Terms that do not depend on the action are dropped; each stage's value depends only
    on its own decision, so the joint argmin is the per-stage argmin.
    """
    tau = params.slot_duration
    n_bar = params.total_arrival_rate * tau
    n = state.local.size
    Y = np.full(n, queues.pressure("delay"))
    Z = np.full(n, queues.pressure("accuracy"))
    q_tx = state.tx_bits / bits_ref**2

    # local stage
    s = np.minimum(state.local[:, None], grid.local_frequency * tau / grid.cycles)
    energy = params.local_kappa * grid.local_frequency**2 * s * grid.cycles
    gaps = np.stack([-s, grid.queued_bits * s, -grid.completes * s,
                     -s * (grid.accuracy - params.accuracy_target) / n_bar], axis=-1)
    local_vals = dpp_values(V, energy, np.column_stack([state.local, q_tx, Y, Z]), gaps)

    # transmit stage
    rate = rate_for_power(grid.power[None, :], np.asarray(gains)[:, None], radio)
    bits_out = np.minimum(state.tx_bits[:, None], rate * tau)
    with np.errstate(divide="ignore", invalid="ignore"):
        e_tx = np.where(rate > 0, grid.power * bits_out / rate, 0.0)
        per_bit = np.where(state.tx_bits > 0, state.tx_images / state.tx_bits, 0.0)
    gaps = np.stack([-bits_out, bits_out * per_bit[:, None]], axis=-1)
    tx_vals = dpp_values(V, e_tx, np.column_stack([q_tx, state.remote]), gaps)

    # remote stage
    r = np.minimum(state.remote[:, None], grid.es_frequency * tau / params.remote_classify_cycles)
    e_es = params.es_kappa * grid.es_frequency**2 * r * params.remote_classify_cycles
    gaps = np.stack([-r, -r], axis=-1)
    es_vals = dpp_values(V, e_es, np.column_stack([state.remote, Y]), gaps)
    return local_vals, tx_vals, es_vals


def solve_inference_slot(state: QueueState, queues: VirtualQueueSet, V: float, gains, params: InferenceParams,
                         radio: RadioConfig, grid: CandidateGrid | None = None,
                         profile: CompressionProfile | None = None) -> InferenceAction:
    """Per-device, per-stage exhaustive drift-plus-penalty minimization over the candidate grid."""
    profile = profile or params.profile()
    grid = grid or CandidateGrid.build(params, profile)
    bits_ref = float(np.median(profile.bits))
    local_vals, tx_vals, es_vals = stage_objectives(state, queues, V, gains, params, radio, grid, bits_ref)
    i = np.argmin(local_vals, axis=-1)
    j = np.argmin(tx_vals, axis=-1)
    k = np.argmin(es_vals, axis=-1)
    return InferenceAction(
        level=grid.level[i],
        offload=grid.offload[i],
        local_frequency=grid.local_frequency[i],
        power=grid.power[j],
        es_frequency=grid.es_frequency[k],
    )


COLUMNS = [
    "slot", "arrivals", "processed", "completed", "energy", "energy_device", "energy_es", "delay", "occupancy",
    "accuracy", "accuracy_metric", "offload_fraction", "mean_bits", "local_queue", "tx_queue_bits",
    "remote_queue", "queue_delay", "queue_accuracy",
]


class InferenceScenario:
    columns = COLUMNS
    queue_names = ("delay", "accuracy")

    def __init__(self, params: InferenceParams, radio: RadioConfig, V: float, rng: np.random.Generator):
        self.params = params
        self.radio = radio
        self.V = V
        self.profile = params.profile()
        self.grid = CandidateGrid.build(params, self.profile)
        place_rng, self.channel_rng, self.arrival_rng = rng.spawn(3)
        self.distances = place_rng.uniform(params.distance_min, params.distance_max, params.n_devices)
        self.state = QueueState.empty(params.n_devices)
        self.queues = make_queues(params)

    def arrivals(self) -> np.ndarray:
        lam = self.params.arrival_rate * self.params.slot_duration
        if self.params.arrivals == "poisson":
            return self.arrival_rng.poisson(lam, self.params.n_devices).astype(float)
        return np.full(self.params.n_devices, lam)

    def step(self, slot: int) -> dict:
        gains = draw_gains(self.distances, self.radio, self.channel_rng)
        action = solve_inference_slot(self.state, self.queues, self.V, gains, self.params, self.radio,
                                      self.grid, self.profile)
        self.state, m = step_inference_slot(self.state, action, self.arrivals(), gains, self.params, self.radio,
                                            self.profile)
        self.queues.update({"delay": m["occupancy"], "accuracy": m["accuracy_metric"]})
        return {"slot": slot, **m, **self.queues.snapshot()}
