"""Drift-plus-penalty machinery: virtual queues, per-slot objective, exhaustive minimizers.

Long-term constraints live in :class:`VirtualQueue` objects. Each slot the controller picks
the action minimizing ``V * cost + sum(queue * gap)``, where ``gap`` is the signed per-slot
constraint violation of the candidate action (positive means violating).
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import EmptyActionSpace, TraceTooShort


class Direction(str, enum.Enum):
    STAY_BELOW = "stay_below"
    EXCEED = "exceed"


@dataclass(frozen=True)
class VirtualQueue:
    """One long-term constraint.

    ``weight`` is the queue's coefficient in the quadratic Lyapunov function; it rescales the
    queue's pull in the per-slot objective without touching the queue dynamics.
    """

    name: str
    target: float
    direction: Direction = Direction.STAY_BELOW
    value: float = 0.0
    weight: float = 1.0

    def __post_init__(self):
        if self.value < 0:
            raise ValueError("virtual queue value must be nonnegative")
        if self.weight <= 0:
            raise ValueError("queue weight must be positive")
        object.__setattr__(self, "direction", Direction(self.direction))

    @property
    def pressure(self) -> float:
        """Coefficient multiplying this queue's gap in the drift-plus-penalty objective."""
        return self.weight * self.value

    def gap(self, metric):
        """Signed violation of ``metric`` against the target; positive means violating."""
        if self.direction is Direction.STAY_BELOW:
            return np.asarray(metric) - self.target
        return self.target - np.asarray(metric)


def update_virtual_queue(q: VirtualQueue, measured_metric: float) -> VirtualQueue:
    if not np.isfinite(measured_metric):
        raise ValueError(f"non-finite metric for queue {q.name!r}")
    return replace(q, value=max(0.0, q.value + float(q.gap(measured_metric))))


class VirtualQueueSet:
    """The controller memory: one queue per long-term constraint, owned by a single run."""

    def __init__(self, queues: Iterable[VirtualQueue]):
        self._queues = {q.name: q for q in queues}

    def __getitem__(self, name) -> VirtualQueue:
        return self._queues[name]

    def __iter__(self):
        return iter(self._queues.values())

    def __len__(self):
        return len(self._queues)

    def names(self) -> list[str]:
        return list(self._queues)

    def value(self, name) -> float:
        return self._queues[name].value

    def pressure(self, name) -> float:
        return self._queues[name].pressure

    def update(self, metrics: dict[str, float]) -> None:
        """Advance every queue exactly once with its measured metric."""
        missing = set(self._queues) - set(metrics)
        if missing:
            raise KeyError(f"missing metrics for queues {sorted(missing)}")
        for name, q in self._queues.items():
            self._queues[name] = update_virtual_queue(q, metrics[name])

    def retarget(self, name, target: float) -> None:
        """Move a queue's target (schedules that change mid-run); the backlog is kept."""
        self._queues[name] = replace(self._queues[name], target=float(target))

    def snapshot(self) -> dict[str, float]:
        return {f"queue_{name}": q.value for name, q in self._queues.items()}


@dataclass(frozen=True)
class SlotObjective:
    cost_term: float
    constraint_terms: Sequence[tuple[float, float]] = field(default_factory=tuple)


def drift_plus_penalty(V: float, objective: SlotObjective) -> float:
    if V < 0:
        raise ValueError("V must be nonnegative")
    return V * objective.cost_term + sum(q * g for q, g in objective.constraint_terms)


def solve_slot_exhaustive(actions: Iterable, evaluator: Callable[[object], SlotObjective], V: float):
    """Scan the action space; first minimizer wins ties."""
    best, best_val = None, np.inf
    seen = False
    for a in actions:
        val = drift_plus_penalty(V, evaluator(a))
        if not seen or val < best_val:
            best, best_val = a, val
        seen = True
    if not seen:
        raise EmptyActionSpace("action space is empty")
    return best


def dpp_values(V: float, cost, queue_values, gaps) -> np.ndarray:
    """Vectorized objective over a candidate grid.

    ``cost`` has shape (..., n); ``gaps`` has shape (..., n, m) and pairs with ``queue_values``
    of shape (m,) or (..., m) (one row of queue weights per independent block).
    """
    cost = np.asarray(cost, dtype=float)
    gaps = np.asarray(gaps, dtype=float)
    q = np.asarray(queue_values, dtype=float)
    if V < 0:
        raise ValueError("V must be nonnegative")
    if not q.size:
        return V * cost
    return V * cost + np.sum(gaps * q[..., None, :], axis=-1)


def argmin_dpp(V: float, cost, queue_values, gaps, axis: int = -1):
    """Index of the drift-plus-penalty minimizer along ``axis``; lowest index on ties."""
    vals = dpp_values(V, cost, queue_values, gaps)
    if vals.shape[axis] == 0:
        raise EmptyActionSpace("action space is empty")
    return np.argmin(vals, axis=axis)


@dataclass(frozen=True)
class StabilityReport:
    slope: float
    stable: bool


def mean_rate_stability(queue_trace, eps: float = 1e-2, min_length: int = 100) -> StabilityReport:
    """Mean-rate stability diagnostic for a virtual-queue trace.

    ``slope`` is the least-squares growth rate of Q(t) over the last half of the trace
    (an estimate of lim Q(t)/t); the queue is declared stable when Q(T)/T < eps.
    """
    trace = np.asarray(queue_trace, dtype=float)
    n = trace.size
    if n < min_length:
        raise TraceTooShort(f"trace of length {n} < {min_length}")
    t = np.arange(1, n + 1, dtype=float)
    half = slice(n // 2, n)
    tail = trace[half]
    slope = float(np.polyfit(t[half], tail, 1)[0]) if np.ptp(tail) > 0 else 0.0
    return StabilityReport(slope=slope, stable=bool(trace[-1] / n < eps))
