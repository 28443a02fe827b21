"""Cooperative effective sensing.

N devices sample a field spanned by the first F real 2-D Fourier atoms. Each slot the
allocator picks per-device quantization bits (0 = the device does not sample at all) and
the matching transmit power, minimizing total power subject to an estimation-MSE budget.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

from .errors import Infeasible, RankDeficient, SubspaceTooLarge
from .physics import RadioConfig, bits_for_power, draw_gains, place_uniform, powers_for_bits

INACTIVE = math.inf  # quantization variance of a device that collects nothing
COND_LIMIT = 1e12
PRIOR_PRECISION = 1.0  # unit-norm coefficients: each has variance <= 1


# ---------------------------------------------------------------- field / basis


@lru_cache(maxsize=None)
def fourier_frequencies(max_frequency: int) -> tuple[tuple[int, int], ...]:
    """Half-plane frequency vectors ordered by |k|^2; ties go to the larger k1 first.

    (1, 0) therefore precedes (0, 1), so atoms 2 and 3 vary along x.
    """
    ks = [
        (k1, k2)
        for k1 in range(0, max_frequency + 1)
        for k2 in range(-max_frequency, max_frequency + 1)
        if k1 > 0 or k2 > 0
    ]
    return tuple(sorted(ks, key=lambda k: (k[0] ** 2 + k[1] ** 2, -k[0], -k[1])))


def max_atoms(max_frequency: int) -> int:
    return 1 + 2 * len(fourier_frequencies(max_frequency))


def build_fourier_basis(positions, F: int, side: float = 10.0, *, normalization: str = "mean_square",
                        max_frequency: int = 8) -> np.ndarray:
    """First ``F`` real Fourier atoms on [0, side]^2 evaluated at ``positions`` (N x 2).

    ``normalization="mean_square"`` scales atoms to unit mean square over the square (DC atom = 1);
    ``"l2"`` scales them to unit L2 norm over the square (DC atom = 1/side).
    """
    if F < 1:
        raise ValueError("subspace dimension must be >= 1")
    if F > max_atoms(max_frequency):
        raise SubspaceTooLarge(f"F={F} exceeds {max_atoms(max_frequency)} atoms at max_frequency={max_frequency}")
    pos = np.atleast_2d(np.asarray(positions, dtype=float))
    if np.any(pos < 0) or np.any(pos > side):
        raise ValueError("positions must lie inside the square")
    if normalization == "mean_square":
        scale = 1.0
    elif normalization == "l2":
        scale = 1.0 / side
    else:
        raise ValueError(f"unknown normalization {normalization!r}")

    cols = [np.full(pos.shape[0], scale)]
    for k1, k2 in fourier_frequencies(max_frequency):
        if len(cols) >= F:
            break
        phase = 2 * np.pi * (k1 * pos[:, 0] + k2 * pos[:, 1]) / side
        cols.append(np.sqrt(2) * scale * np.cos(phase))
        if len(cols) < F:
            cols.append(np.sqrt(2) * scale * np.sin(phase))
    return np.column_stack(cols[:F])


@dataclass(frozen=True)
class FieldModel:
    subspace_dimension: int
    coefficients: np.ndarray
    area_side: float = 10.0

    def __post_init__(self):
        a = np.asarray(self.coefficients, dtype=float)
        if a.shape != (self.subspace_dimension,):
            raise ValueError("coefficient vector length must equal the subspace dimension")
        if not np.isclose(np.linalg.norm(a), 1.0):
            raise ValueError("field coefficients must have unit norm")

    @classmethod
    def random(cls, F: int, rng: np.random.Generator, area_side: float = 10.0) -> "FieldModel":
        a = rng.standard_normal(F)
        return cls(F, a / np.linalg.norm(a), area_side)

    def evaluate(self, basis: np.ndarray) -> np.ndarray:
        return basis @ self.coefficients


@dataclass(frozen=True)
class ObservationModel:
    basis_matrix: np.ndarray
    noise_variance: float = 1e-4

    def __post_init__(self):
        if not self.noise_variance > 0:
            raise ValueError("noise variance must be positive")
        if not np.all(np.isfinite(self.basis_matrix)):
            raise ValueError("basis rows must be finite")

    @property
    def n_devices(self) -> int:
        return self.basis_matrix.shape[0]

    @property
    def subspace_dimension(self) -> int:
        return self.basis_matrix.shape[1]


@dataclass(frozen=True)
class EffectivenessSpec:
    mse_max: float = 1e-2
    target: float = 0.0

    def __post_init__(self):
        if not self.mse_max > 0:
            raise ValueError("mse_max must be positive")
        if not 0 <= self.target < 1:
            raise ValueError("effectiveness target must lie in [0, 1)")

    @property
    def mse_budget(self) -> float:
        return self.mse_max * (1.0 - self.target)

    def effectiveness(self, mse: float) -> float:
        return (self.mse_max - mse) / self.mse_max


@dataclass(frozen=True)
class SensingAction:
    bits: np.ndarray
    powers: np.ndarray
    mse: float = math.nan

    @property
    def active(self) -> np.ndarray:
        return self.bits > 0

    @property
    def active_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    @property
    def total_power(self) -> float:
        return float(np.sum(self.powers))


# ---------------------------------------------------------------- estimation


def quantization_noise_variance(bits: int, dynamic_range: float = 2.0) -> float:
    """Uniform quantizer, additive-noise model: (D / 2^b)^2 / 12; zero bits -> INACTIVE."""
    if bits < 0:
        raise ValueError("bits must be nonnegative")
    if bits == 0:
        return INACTIVE
    step = dynamic_range / 2.0**bits
    return step * step / 12.0


def observation_variances(bits, noise_variance: float, dynamic_range: float = 2.0) -> np.ndarray:
    """Per-device total variance (inf where inactive), vectorized over ``bits``."""
    b = np.asarray(bits)
    with np.errstate(over="ignore"):
        q = (dynamic_range / np.exp2(b.astype(float))) ** 2 / 12.0
    return np.where(b > 0, noise_variance + q, np.inf)


def _mse_from_info(info: np.ndarray) -> float:
    eig = np.linalg.eigvalsh(info)
    if eig[0] <= eig[-1] / COND_LIMIT:
        raise RankDeficient("information matrix is numerically singular")
    return float(np.sum(1.0 / eig))


def estimation_mse(active_basis, per_observation_variance) -> float:
    """Weighted least-squares coefficient MSE, trace[(Phi^T R^-1 Phi)^-1]."""
    phi = np.atleast_2d(np.asarray(active_basis, dtype=float))
    r = np.asarray(per_observation_variance, dtype=float)
    m, f = phi.shape
    if m < f:
        raise RankDeficient(f"{m} observations for {f} unknowns")
    if np.any(r <= 0):
        raise ValueError("observation variances must be positive")
    return _mse_from_info(phi.T @ (phi / r[:, None]))


# ---------------------------------------------------------------- allocation


@dataclass(frozen=True)
class SensingProblem:
    """Everything one slot's allocation depends on."""

    obs: ObservationModel
    spec: EffectivenessSpec
    gains: np.ndarray
    radio: RadioConfig = RadioConfig()
    duration: float = 1e-3
    max_power: float = 0.1
    b_max: int = 12
    dynamic_range: float = 2.0

    @property
    def n(self) -> int:
        return self.obs.n_devices

    def power_table(self) -> np.ndarray:
        """(N, b_max+1) power needed for every bit count; inf where it breaks the power cap."""
        b = np.arange(self.b_max + 1)
        p = powers_for_bits(b[None, :], np.asarray(self.gains)[:, None], self.radio, self.duration)
        return np.where(p <= self.max_power, p, np.inf)

    def variances(self, bits) -> np.ndarray:
        return observation_variances(bits, self.obs.noise_variance, self.dynamic_range)

    @cached_property
    def weight_table(self) -> np.ndarray:
        """Inverse observation variance per bit count (0 for an inactive device)."""
        v = self.variances(np.arange(self.b_max + 1))
        return np.where(np.isfinite(v), 1.0 / v, 0.0)

    def mse(self, bits) -> float:
        return _mse_w(self, _weights(self, bits))

    def feasible(self, bits) -> bool:
        return self.mse(bits) <= self.spec.mse_budget

    def action(self, bits) -> SensingAction:
        bits = np.asarray(bits, dtype=int)
        table = self.power_table()
        powers = table[np.arange(self.n), bits]
        return SensingAction(bits=bits, powers=powers, mse=self.mse(bits))


def _weights(problem: SensingProblem, bits) -> np.ndarray:
    return problem.weight_table[np.asarray(bits)]


def _mse_w(problem: SensingProblem, w: np.ndarray) -> float:
    phi = problem.obs.basis_matrix
    if np.count_nonzero(w) < phi.shape[1]:
        return math.inf
    try:
        return _mse_from_info(phi.T @ (phi * w[:, None]))
    except RankDeficient:
        return math.inf


def _rank_one_stats(phi: np.ndarray, info: np.ndarray):
    """P = info^-1 together with phi_k' P phi_k and |P phi_k|^2 for every row."""
    lam, vec = np.linalg.eigh(info)
    P = (vec / lam) @ vec.T
    Pphi = phi @ P
    return P, np.einsum("ij,ij->i", Pphi, phi), np.einsum("ij,ij->i", Pphi, Pphi)


def _predicted_mse(problem: SensingProblem, w: np.ndarray, w_new: np.ndarray) -> np.ndarray:
    """MSE after changing only device k's weight to w_new[k], for every k (Sherman-Morrison)."""
    phi = problem.obs.basis_matrix
    P, a, c = _rank_one_stats(phi, phi.T @ (phi * w[:, None]))
    delta = w_new - w
    denom = 1.0 + delta * a
    with np.errstate(divide="ignore", invalid="ignore"):
        pred = np.trace(P) - delta * c / denom
    return np.where(denom > 1e-9, pred, np.inf)


def _greedy_grow(problem: SensingProblem, table: np.ndarray, start=None, banned=None) -> np.ndarray:
    phi = problem.obs.basis_matrix
    n, f = phi.shape
    bits = np.zeros(n, dtype=int) if start is None else np.array(start, dtype=int)
    banned = np.zeros(n, dtype=bool) if banned is None else banned
    w = _weights(problem, bits)
    budget = problem.spec.mse_budget
    idx = np.arange(n)
    # regularized inverse; its trace lower-bounds the true MSE, so exact checks wait until it fits
    lam, vec = np.linalg.eigh(PRIOR_PRECISION * np.eye(f) + phi.T @ (phi * w[:, None]))
    P = (vec / lam) @ vec.T
    while True:
        if np.trace(P) <= budget and _mse_w(problem, w) <= budget:
            return bits
        Pphi = phi @ P
        a = np.einsum("ij,ij->i", Pphi, phi)
        c = np.einsum("ij,ij->i", Pphi, Pphi)
        nxt = np.minimum(bits + 1, problem.b_max)
        delta = _weights(problem, nxt) - w
        gain = delta * c / (1.0 + delta * a)
        dp = table[idx, nxt] - table[idx, bits]
        ok = (bits < problem.b_max) & np.isfinite(dp) & ~banned
        if not ok.any():
            raise Infeasible("MSE budget unreachable at the bit/power caps")
        with np.errstate(divide="ignore", invalid="ignore"):
            util = np.where(ok, gain / np.maximum(dp, 1e-300), -np.inf)
        k = int(np.argmax(util))
        bits[k] += 1
        w[k] += delta[k]
        u = Pphi[k]
        P = P - np.outer(u, u) * (delta[k] / (1.0 + delta[k] * a[k]))


def _descend(problem: SensingProblem, table: np.ndarray, bits: np.ndarray, drop_device: bool) -> np.ndarray:
    """Repeatedly apply the most power-saving removal that keeps the MSE budget.

    ``drop_device`` switches whole devices off; otherwise single bits are removed.
    Candidates are screened with rank-one updates and confirmed with an exact evaluation.
    """
    bits = bits.copy()
    idx = np.arange(problem.n)
    budget = problem.spec.mse_budget
    while True:
        w = _weights(problem, bits)
        new_bits = np.zeros_like(bits) if drop_device else np.maximum(bits - 1, 0)
        w_new = _weights(problem, new_bits)
        pred = _predicted_mse(problem, w, w_new)
        saving = table[idx, bits] - table[idx, new_bits]
        cand = np.flatnonzero((bits > 0) & (pred <= budget * (1 + 1e-9)))
        for k in cand[np.argsort(-saving[cand], kind="stable")]:
            trial = bits.copy()
            trial[k] = new_bits[k]
            if problem.feasible(trial):
                bits = trial
                break
        else:
            return bits


def _prune(problem: SensingProblem, table: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Drop devices, then single bits, whenever feasibility survives; biggest saving first."""
    return _descend(problem, table, _descend(problem, table, bits, drop_device=True), drop_device=False)


def _drop_and_refill(problem: SensingProblem, table: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Switch off one device and let the greedy re-grow the rest; keep the change if it saves power."""
    idx = np.arange(problem.n)
    best = bits
    best_power = float(table[idx, bits].sum())
    improved = True
    while improved:
        improved = False
        for k in np.argsort(-table[idx, best], kind="stable"):
            if best[k] == 0:
                continue
            start = best.copy()
            start[k] = 0
            try:
                trial = _prune(problem, table, _greedy_grow(problem, table, start, banned=idx == k))
            except Infeasible:
                continue
            p = float(table[idx, trial].sum())
            if p < best_power * (1 - 1e-12):
                best, best_power = trial, p
                improved = True
                break
    return best


def _swap_pass(problem: SensingProblem, table: np.ndarray, bits: np.ndarray) -> np.ndarray:
    """Single-swap local exchange: move one bit from device i to device j if that saves power."""
    bits = bits.copy()
    n = problem.n
    idx = np.arange(n)
    while True:
        base = float(table[idx, bits].sum())
        best, best_power = None, base * (1 - 1e-12)
        for i in np.flatnonzero(bits > 0):
            for j in np.flatnonzero(bits < problem.b_max):
                if j == i:
                    continue
                trial = bits.copy()
                trial[i] -= 1
                trial[j] += 1
                p = float(table[idx, trial].sum())
                if p < best_power and problem.feasible(trial):
                    best, best_power = trial, p
        if best is None:
            return bits
        bits = _prune(problem, table, best)


def allocate_problem(problem: SensingProblem, local_search: bool = False) -> SensingAction:
    table = problem.power_table()
    bits = _prune(problem, table, _greedy_grow(problem, table))
    bits = _drop_and_refill(problem, table, bits)
    if local_search:
        bits = _swap_pass(problem, table, bits)
    return problem.action(bits)


def allocate_bits_power(gains, spec: EffectivenessSpec, obs: ObservationModel, radio: RadioConfig = RadioConfig(),
                        *, duration: float = 1e-3, max_power: float = 0.1, b_max: int = 12,
                        dynamic_range: float = 2.0, local_search: bool = False) -> SensingAction:
    """Greedy marginal-utility bit allocation followed by pruning.

    Each step grants one bit to the device with the largest (MSE decrease) / (power increase);
    the MSE decrease is scored on the prior-regularized error so rank-deficient starts are ranked too.
    """
    gains = np.asarray([getattr(g, "gain", g) for g in gains], dtype=float)
    problem = SensingProblem(obs, spec, gains, radio, duration, max_power, b_max, dynamic_range)
    return allocate_problem(problem, local_search)


MAX_ENUMERATION = 4**6


def brute_force_problem(problem: SensingProblem) -> SensingAction:
    n, f = problem.n, problem.obs.subspace_dimension
    levels = problem.b_max + 1
    if levels**n > MAX_ENUMERATION:
        raise ValueError(f"{levels}^{n} bit vectors exceed the enumeration bound {MAX_ENUMERATION}")
    grid = np.array(list(itertools.product(range(levels), repeat=n)), dtype=int)  # lexicographic
    table = problem.power_table()
    power = table[np.arange(n)[None, :], grid].sum(axis=1)

    var = problem.variances(grid)
    w = np.where(np.isfinite(var), 1.0 / var, 0.0)
    phi = problem.obs.basis_matrix
    info = np.einsum("ki,mk,kj->mij", phi, w, phi)
    enough = np.count_nonzero(grid, axis=1) >= f
    mse = np.full(grid.shape[0], np.inf)
    if enough.any():
        sub = info[enough]
        eig = np.linalg.eigvalsh(sub)
        good = eig[:, 0] > eig[:, -1] / COND_LIMIT
        vals = np.full(sub.shape[0], np.inf)
        vals[good] = np.sum(1.0 / eig[good], axis=1)
        mse[enough] = vals
    feasible = (mse <= problem.spec.mse_budget) & np.isfinite(power)
    if not feasible.any():
        raise Infeasible("no enumerated bit vector meets the MSE budget")
    cand = np.flatnonzero(feasible)
    best = cand[np.argmin(power[cand])]
    return problem.action(grid[best])


def brute_force_allocation(gains, spec: EffectivenessSpec, obs: ObservationModel, radio: RadioConfig = RadioConfig(),
                           *, duration: float = 1e-3, max_power: float = 0.1, b_max: int = 3,
                           dynamic_range: float = 2.0) -> SensingAction:
    """Exhaustive minimum-power allocation for small instances; ties go to the smallest bit vector."""
    gains = np.asarray([getattr(g, "gain", g) for g in gains], dtype=float)
    return brute_force_problem(SensingProblem(obs, spec, gains, radio, duration, max_power, b_max, dynamic_range))


def equal_bits_problem(problem: SensingProblem) -> SensingAction:
    table = problem.power_table()
    for b in range(1, problem.b_max + 1):
        bits = np.full(problem.n, b)
        if not np.all(np.isfinite(table[:, b])):
            break
        if problem.feasible(bits):
            return problem.action(bits)
    raise Infeasible("equal-bits baseline cannot meet the MSE budget")


def _bits_at_power(problem: SensingProblem, p: float) -> np.ndarray:
    raw = bits_for_power(p, problem.gains, problem.radio, problem.duration)
    return np.minimum(np.floor(raw + 1e-9).astype(int), problem.b_max)


def equal_power_problem(problem: SensingProblem, iterations: int = 100) -> SensingAction:
    """Common transmit power for every device, minimized by bisection (in log-power)."""
    hi = problem.max_power
    if not problem.feasible(_bits_at_power(problem, hi)):
        raise Infeasible("equal-power baseline cannot meet the MSE budget at the power cap")
    lo = hi * 1e-15
    if problem.feasible(_bits_at_power(problem, lo)):
        hi = lo
    for _ in range(iterations):
        mid = math.sqrt(lo * hi)
        if problem.feasible(_bits_at_power(problem, mid)):
            hi = mid
        else:
            lo = mid
        if hi / lo < 1 + 1e-12:
            break
    bits = _bits_at_power(problem, hi)
    powers = np.where(bits > 0, hi, 0.0)
    return SensingAction(bits=bits, powers=powers, mse=problem.mse(bits))


def baseline_equal_bits(gains, spec, obs, radio=RadioConfig(), **kw) -> SensingAction:
    gains = np.asarray([getattr(g, "gain", g) for g in gains], dtype=float)
    return equal_bits_problem(SensingProblem(obs, spec, gains, radio, **kw))


def baseline_equal_power(gains, spec, obs, radio=RadioConfig(), **kw) -> SensingAction:
    gains = np.asarray([getattr(g, "gain", g) for g in gains], dtype=float)
    return equal_power_problem(SensingProblem(obs, spec, gains, radio, **kw))


# ---------------------------------------------------------------- scenario

@dataclass
class SensingParams:
    n_devices: int = 30
    area_side: float = 10.0
    subspace_dimension: int = 10
    noise_variance: float = 1e-4
    mse_max: float = 1e-2
    effectiveness_target: float = 0.3
    dynamic_range: float = 2.0
    b_max: int = 12
    slot_duration: float = 1e-3
    max_power: float = 0.1
    max_frequency: int = 8
    normalization: str = "mean_square"
    local_search: bool = False
    baselines: bool = True

    def spec(self) -> EffectivenessSpec:
        return EffectivenessSpec(self.mse_max, self.effectiveness_target)


SENSING_COLUMNS = [
    "slot", "effectiveness_target", "mse", "empirical_error", "effectiveness", "active_count", "total_power",
    "equal_bits_power", "equal_power_power", "feasible",
]


class SensingScenario:
    """Devices fixed for the run around an access point at the center; fading redrawn every slot.

    Each slot also draws a fresh field and simulates the noisy quantized observations, so the
    empirical squared coefficient error can be checked against the predicted MSE.
    """

    columns = SENSING_COLUMNS
    queue_names = ()

    def __init__(self, params: SensingParams, radio: RadioConfig, V: float, rng: np.random.Generator):
        self.params = params
        self.radio = radio
        self.V = V  # no long-term constraint here: each slot is solved on its own
        place_rng, self.channel_rng, self.field_rng = rng.spawn(3)
        self.positions = place_uniform(params.n_devices, params.area_side, place_rng)
        center = (params.area_side / 2, params.area_side / 2)
        self.distances = np.hypot(self.positions[:, 0] - center[0], self.positions[:, 1] - center[1])
        basis = build_fourier_basis(self.positions, params.subspace_dimension, params.area_side,
                                    normalization=params.normalization, max_frequency=params.max_frequency)
        self.obs = ObservationModel(basis, params.noise_variance)
        self.spec = params.spec()

    def problem(self, gains) -> SensingProblem:
        p = self.params
        return SensingProblem(self.obs, self.spec, np.asarray(gains, dtype=float), self.radio, p.slot_duration,
                              p.max_power, p.b_max, p.dynamic_range)

    def empirical_error(self, bits) -> float:
        """Squared coefficient error of the weighted least-squares estimate on a fresh field."""
        field = FieldModel.random(self.params.subspace_dimension, self.field_rng, self.params.area_side)
        var = observation_variances(bits, self.params.noise_variance, self.params.dynamic_range)
        active = np.isfinite(var)
        phi = self.obs.basis_matrix[active]
        y = phi @ field.coefficients + np.sqrt(var[active]) * self.field_rng.standard_normal(phi.shape[0])
        w = 1.0 / var[active]
        est = np.linalg.solve(phi.T @ (w[:, None] * phi), phi.T @ (w * y))
        return float(np.sum((est - field.coefficients) ** 2))

    def step(self, slot: int) -> dict:
        gains = draw_gains(self.distances, self.radio, self.channel_rng)
        problem = self.problem(gains)
        rec = {"slot": slot, "effectiveness_target": self.spec.target}
        try:
            action = allocate_problem(problem, self.params.local_search)
        except Infeasible:
            return {**rec, "mse": math.nan, "empirical_error": math.nan, "effectiveness": math.nan,
                    "active_count": math.nan, "total_power": math.nan, "equal_bits_power": math.nan,
                    "equal_power_power": math.nan, "feasible": 0}
        rec.update(mse=action.mse, empirical_error=self.empirical_error(action.bits),
                   effectiveness=self.spec.effectiveness(action.mse), active_count=action.active_count,
                   total_power=action.total_power)
        for col, fn in (("equal_bits_power", equal_bits_problem), ("equal_power_power", equal_power_problem)):
            if not self.params.baselines:
                rec[col] = math.nan
                continue
            try:
                rec[col] = fn(problem).total_power
            except Infeasible:
                rec[col] = math.nan
        rec["feasible"] = 1
        return rec
