"""Scenario configuration: nested YAML sections, strict schema, lossless round-trip."""
from __future__ import annotations

import dataclasses
import math
import re
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import yaml

from .errors import ConfigInvalid
from .fl import FLParams
from .inference import FAMILIES, InferenceParams
from .physics import RadioConfig
from .sensing import SensingParams, max_atoms

SCENARIOS = {"sensing": SensingParams, "inference": InferenceParams, "fl": FLParams}

# Radio constants per scenario; every value can be overridden in the ``radio`` section.
DEFAULT_RADIO = {
    "sensing": {},
    "inference": {"pathloss_exponent": 3.5},
    "fl": {"bandwidth_per_device": 1e6, "pathloss_exponent": 3.5},
}

DEFAULT_RUN = {"sensing": (100, 0.0), "inference": (20000, 100.0), "fl": (1000, 10.0)}


def default_radio(scenario: str) -> RadioConfig:
    return RadioConfig(**DEFAULT_RADIO[scenario])


@dataclass
class ScenarioConfig:
    scenario: str
    params: Any
    radio: RadioConfig
    slots: int
    V: float
    seed: int = 0
    burn_in: float = 0.2

    @classmethod
    def default(cls, scenario: str, **overrides) -> "ScenarioConfig":
        if scenario not in SCENARIOS:
            raise ConfigInvalid(f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}")
        slots, V = DEFAULT_RUN[scenario]
        cfg = cls(scenario, SCENARIOS[scenario](), default_radio(scenario), slots, V)
        return cfg.replace(**overrides) if overrides else cfg

    def replace(self, **changes) -> "ScenarioConfig":
        """Copy with top-level fields or scenario parameters changed; the result is re-validated."""
        top = {k: v for k, v in changes.items() if k in {f.name for f in fields(self)}}
        rest = {k: v for k, v in changes.items() if k not in top}
        params = self.params
        if rest:
            unknown = set(rest) - {f.name for f in fields(params)}
            if unknown:
                raise ConfigInvalid(f"unknown parameters {sorted(unknown)} for scenario {self.scenario!r}")
            params = dataclasses.replace(params, **rest)
        cfg = dataclasses.replace(self, params=params, **top)
        validate(cfg)
        return cfg

    def to_dict(self) -> dict:
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "slots": self.slots,
            "V": self.V,
            "burn_in": self.burn_in,
            "radio": dataclasses.asdict(self.radio),
            self.scenario: dataclasses.asdict(self.params),
        }

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)


def _section(cls, data, where: str):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ConfigInvalid(f"section {where!r} must be a mapping")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigInvalid(f"unknown keys in {where!r}: {sorted(unknown)}")
    try:
        return cls(**data)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"invalid {where!r} section: {exc}") from exc


def from_dict(data: dict) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigInvalid("config must be a mapping")
    scenario = data.get("scenario")
    if scenario not in SCENARIOS:
        raise ConfigInvalid(f"unknown scenario {scenario!r}; expected one of {sorted(SCENARIOS)}")
    allowed = {"scenario", "seed", "slots", "V", "burn_in", "radio", scenario}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigInvalid(f"unknown top-level keys: {sorted(unknown)}")
    radio = {**DEFAULT_RADIO[scenario], **(data.get("radio") or {})}
    slots, V = DEFAULT_RUN[scenario]
    cfg = ScenarioConfig(
        scenario=scenario,
        params=_section(SCENARIOS[scenario], data.get(scenario), scenario),
        radio=_section(RadioConfig, radio, "radio"),
        slots=data.get("slots", slots),
        V=data.get("V", V),
        seed=data.get("seed", 0),
        burn_in=data.get("burn_in", 0.2),
    )
    validate(cfg)
    return cfg


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads ``1e6`` and ``1.0e-3`` style floats (YAML 1.1 wants ``1.0e+6``)."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                    |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                    |\.[0-9_]+(?:[eE][-+]?[0-9]+)?
                    |[-+]?\.(?:inf|Inf|INF)
                    |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def parse_yaml(text: str):
    return yaml.load(text, Loader=_Loader)


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read config {path}: {exc}") from exc
    try:
        data = parse_yaml(text)
    except yaml.YAMLError as exc:
        raise ConfigInvalid(f"malformed YAML in {path}: {exc}") from exc
    return from_dict(data)


def save_config(cfg: ScenarioConfig, path) -> None:
    Path(path).write_text(cfg.to_yaml())


# ---------------------------------------------------------------- validation

def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return (isinstance(x, (int, float)) and not isinstance(x, bool)) and math.isfinite(x)


def _check(cond: bool, msg: str):
    if not cond:
        raise ConfigInvalid(msg)


def _positive(obj, names):
    for n in names:
        v = getattr(obj, n)
        _check(_is_num(v) and v > 0, f"{n} must be a positive number, got {v!r}")


def _integer(obj, names, lo=1):
    for n in names:
        v = getattr(obj, n)
        _check(_is_int(v) and v >= lo, f"{n} must be an integer >= {lo}, got {v!r}")


def _flag(obj, names):
    for n in names:
        _check(isinstance(getattr(obj, n), bool), f"{n} must be true or false")


def _unit(obj, names, closed_hi=True):
    for n in names:
        v = getattr(obj, n)
        ok = _is_num(v) and 0 <= v and (v <= 1 if closed_hi else v < 1)
        _check(ok, f"{n} must lie in [0, 1{']' if closed_hi else ')'}, got {v!r}")


def validate(cfg: ScenarioConfig) -> None:
    _check(cfg.scenario in SCENARIOS, f"unknown scenario {cfg.scenario!r}")
    _check(isinstance(cfg.params, SCENARIOS[cfg.scenario]), "params do not match the scenario")
    _check(_is_int(cfg.slots) and cfg.slots >= 0, f"slots must be a nonnegative integer, got {cfg.slots!r}")
    _check(_is_int(cfg.seed) and cfg.seed >= 0, f"seed must be a nonnegative integer, got {cfg.seed!r}")
    _check(_is_num(cfg.V) and cfg.V >= 0, f"V must be a nonnegative number, got {cfg.V!r}")
    _check(_is_num(cfg.burn_in) and 0 <= cfg.burn_in < 1, f"burn_in must lie in [0, 1), got {cfg.burn_in!r}")
    _positive(cfg.radio, ["bandwidth_per_device", "noise_psd", "reference_distance"])
    _check(_is_num(cfg.radio.pathloss_exponent) and cfg.radio.pathloss_exponent >= 2, "pathloss_exponent must be >= 2")
    {"sensing": _validate_sensing, "inference": _validate_inference, "fl": _validate_fl}[cfg.scenario](cfg.params)


def _validate_sensing(p: SensingParams):
    _integer(p, ["n_devices", "subspace_dimension", "b_max", "max_frequency"])
    _positive(p, ["area_side", "noise_variance", "mse_max", "dynamic_range", "slot_duration", "max_power"])
    _unit(p, ["effectiveness_target"], closed_hi=False)
    _flag(p, ["local_search", "baselines"])
    _check(p.normalization in ("mean_square", "l2"), f"normalization must be mean_square or l2, got {p.normalization!r}")
    _check(p.subspace_dimension <= max_atoms(p.max_frequency),
           f"subspace_dimension {p.subspace_dimension} exceeds {max_atoms(p.max_frequency)} available atoms")


def _validate_inference(p: InferenceParams):
    _integer(p, ["n_devices", "frequency_levels", "power_levels"])
    _positive(p, ["arrival_rate", "slot_duration", "delay_bound", "local_classify_cycles", "remote_classify_cycles",
                  "max_local_frequency", "local_kappa", "max_es_frequency", "es_kappa", "max_transmit_power",
                  "power_span", "distance_min", "distance_max", "delay_weight", "accuracy_weight"])
    _unit(p, ["accuracy_target", "local_accuracy_penalty"])
    _check(p.arrivals in ("deterministic", "poisson"), f"arrivals must be deterministic or poisson, got {p.arrivals!r}")
    _check(p.distance_min <= p.distance_max, "distance_min must not exceed distance_max")
    if p.levels is None:
        _check(p.family in FAMILIES, f"unknown compression family {p.family!r}; expected one of {sorted(FAMILIES)}")
    try:
        p.profile()
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"invalid compression levels: {exc}") from exc


def _validate_fl(p: FLParams):
    _integer(p, ["n_devices", "batch_size", "frequency_levels", "power_levels"])
    _positive(p, ["iterations_period", "latency_bound", "model_size_bits", "cycles_per_sample", "aggregation_cycles",
                  "max_local_frequency", "local_kappa", "max_es_frequency", "es_kappa", "max_transmit_power",
                  "power_span", "distance_min", "distance_max", "latency_weight", "accuracy_weight", "eta"])
    _unit(p, ["initial_accuracy", "A_max"])
    for n in ("c_q", "c_s", "noise_sd"):
        _check(_is_num(getattr(p, n)) and getattr(p, n) >= 0, f"{n} must be nonnegative")
    _flag(p, ["allow_skip"])
    _check(p.distance_min <= p.distance_max, "distance_min must not exceed distance_max")
    _check(len(p.bits_grid) > 0 and all(_is_int(b) and 1 <= b <= 32 for b in p.bits_grid),
           "bits_grid must be a non-empty list of integers in [1, 32]")
    _check(len(p.schedule) > 0, "schedule must have at least one step")
    prev = -1
    for step in p.schedule:
        _check(isinstance(step, (list, tuple)) and len(step) == 2, "schedule steps must be [iteration, target] pairs")
        start, target = step
        _check(_is_int(start) and start > prev, "schedule iterations must be increasing integers")
        _check(_is_num(target) and 0 <= target <= 1, "schedule targets must lie in [0, 1]")
        prev = start
    _check(p.schedule[0][0] == 0, "schedule must start at iteration 0")
