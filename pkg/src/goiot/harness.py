"""Run orchestration: the slot loop, run summaries, seeded sweeps and deterministic file output."""
from __future__ import annotations

import csv
import dataclasses
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .config import ScenarioConfig, from_dict, parse_yaml
from .engine import mean_rate_stability
from .errors import ConfigInvalid, GoIoTError, ScenarioError, TraceTooShort
from .fl import FLScenario
from .inference import InferenceScenario
from .sensing import SensingScenario

log = logging.getLogger(__name__)

SCENARIO_CLASSES = {"sensing": SensingScenario, "inference": InferenceScenario, "fl": FLScenario}


@dataclass
class RunSummary:
    metrics: dict  # ordered, numeric or flag values; written to summary.csv
    stability: dict = field(default_factory=dict)  # queue name -> StabilityReport or TraceTooShort
    wall_clock: float = 0.0  # seconds; never written to files, it would break byte-identical output

    @property
    def stable(self) -> bool:
        return all(not isinstance(r, Exception) and r.stable for r in self.stability.values())


def build_scenario(cfg: ScenarioConfig):
    return SCENARIO_CLASSES[cfg.scenario](cfg.params, cfg.radio, cfg.V, np.random.default_rng(cfg.seed))


def iter_records(cfg: ScenarioConfig):
    """Yield one record per slot; failures carry the slot index."""
    scenario = build_scenario(cfg)
    for t in range(cfg.slots):
        try:
            yield scenario.step(t)
        except (GoIoTError, ValueError, FloatingPointError) as exc:
            raise ScenarioError(t, exc) from exc


def run_scenario(cfg: ScenarioConfig) -> tuple[list[dict], RunSummary]:
    start = time.perf_counter()
    records = list(iter_records(cfg))
    summary = summarize(cfg, records)
    summary.wall_clock = time.perf_counter() - start
    return records, summary


def columns_for(cfg: ScenarioConfig) -> list[str]:
    return list(SCENARIO_CLASSES[cfg.scenario].columns)


def _nanmean(x) -> float:
    x = np.asarray(x, dtype=float)
    ok = ~np.isnan(x)
    return float(x[ok].mean()) if ok.any() else math.nan


def _constraints(cfg: ScenarioConfig, window: list[dict]):
    """(name, signed gap per slot) for each long-term constraint; positive gap = violation."""
    p = cfg.params
    col = lambda name: np.array([r[name] for r in window], dtype=float)  # noqa: E731
    if cfg.scenario == "inference":
        return [("delay", col("delay") - p.delay_bound), ("accuracy", p.accuracy_target - col("accuracy_metric"))]
    if cfg.scenario == "fl":
        return [("latency", col("latency") - p.latency_bound), ("accuracy", col("target") - col("accuracy"))]
    return [("mse", col("mse") - p.spec().mse_budget)]


def summarize(cfg: ScenarioConfig, records: list[dict]) -> RunSummary:
    """Burn-in-trimmed averages, constraint statistics and stability flags; deterministic in the records."""
    n = len(records)
    burn = int(math.floor(cfg.burn_in * n))
    window = records[burn:]
    m = {"scenario": cfg.scenario, "seed": cfg.seed, "V": cfg.V, "slots": n, "burn_in_slots": burn}
    for c in columns_for(cfg):
        if c == "slot":
            continue
        m[f"mean_{c}"] = _nanmean([r[c] for r in window]) if window else math.nan
    if cfg.scenario == "inference" and window:
        processed = np.array([r["processed"] for r in window])
        acc = np.nan_to_num(np.array([r["accuracy"] for r in window], dtype=float))
        m["image_accuracy"] = float(processed @ acc / processed.sum()) if processed.sum() > 0 else math.nan
    for name, gap in _constraints(cfg, window) if window else []:
        valid = gap[~np.isnan(gap)]
        m[f"violation_rate_{name}"] = float(np.mean(valid > 0)) if valid.size else math.nan
        m[f"mean_gap_{name}"] = float(valid.mean()) if valid.size else math.nan

    stability = {}
    for q in SCENARIO_CLASSES[cfg.scenario].queue_names:
        trace = [r[f"queue_{q}"] for r in records]
        try:
            rep = mean_rate_stability(trace)
        except TraceTooShort as exc:
            stability[q] = exc
            m[f"stable_{q}"] = "TraceTooShort"
            m[f"slope_{q}"] = math.nan
            continue
        stability[q] = rep
        m[f"stable_{q}"] = int(rep.stable)
        m[f"slope_{q}"] = rep.slope
    return RunSummary(m, stability)


# ---------------------------------------------------------------- sweeps

SWEEP_PARAMS = ("V", "effectiveness_target", "subspace_dimension")


def replication_seed(base_seed: int, replication: int) -> int:
    """Seed of one replication, a hash of (base seed, replication id): independent of run order."""
    return int(np.random.SeedSequence([base_seed, replication]).generate_state(1)[0])


def _cast(cfg: ScenarioConfig, param: str, value):
    current = getattr(cfg, param) if param in ("V", "slots", "seed", "burn_in") else getattr(cfg.params, param, None)
    if isinstance(current, bool):
        return str(value).lower() in ("1", "true", "yes")
    if isinstance(current, int):
        return int(value)
    if isinstance(current, float):
        return float(value)
    return value


def cell_config(base: ScenarioConfig, param: str, value, replication: int) -> ScenarioConfig:
    if param not in ("V",) and not hasattr(base.params, param):
        raise ConfigInvalid(f"cannot sweep {param!r} for scenario {base.scenario!r}")
    return base.replace(**{param: _cast(base, param, value)}, seed=replication_seed(base.seed, replication))


def _run_cell(args):
    base_dict, param, value, rep = args
    seed = replication_seed(base_dict["seed"], rep)
    try:
        cfg = cell_config(from_dict(base_dict), param, value, rep)
        _, summary = run_scenario(cfg)
    except GoIoTError as exc:
        return {"param": param, "value": value, "replication": rep, "seed": seed, "error": exc.category,
                "message": str(exc)}
    return {"param": param, "value": value, "replication": rep, "seed": cfg.seed, "error": "", "message": "",
            "stable": int(summary.stable), **summary.metrics}


def sweep(base: ScenarioConfig, param: str, values, seeds: int, workers: int = 1):
    """Cross product values x replications; returns (per-value rows, per-cell rows).

    Cell failures are recorded in the cell rows and excluded from the averages.
    """
    values = [_cast(base, param, v) for v in values]
    if not values:
        raise ConfigInvalid("sweep needs at least one value")
    if seeds < 1:
        raise ConfigInvalid("sweep needs at least one replication")
    if param != "V" and not hasattr(base.params, param):
        raise ConfigInvalid(f"cannot sweep {param!r} for scenario {base.scenario!r}")
    jobs = [(base.to_dict(), param, v, r) for v in values for r in range(seeds)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(_run_cell, jobs))
    else:
        cells = [_run_cell(j) for j in jobs]
    cells.sort(key=lambda c: (values.index(c["value"]), c["replication"]))
    return aggregate(param, values, cells), cells


def aggregate(param: str, values, cells: list[dict]) -> list[dict]:
    rows = []
    for v in values:
        group = [c for c in cells if c["value"] == v]
        ok = [c for c in group if not c["error"]]
        row = {param: v, "n": len(ok), "n_failed": len(group) - len(ok)}
        keys = [k for k in (ok[0] if ok else {}) if k.startswith(("mean_", "violation_rate_", "mean_gap_",
                                                                   "image_accuracy", "slope_"))]
        for k in keys:
            x = np.array([c[k] for c in ok], dtype=float)
            x = x[~np.isnan(x)]
            row[k] = float(x.mean()) if x.size else math.nan
            row[f"se_{k}"] = float(x.std(ddof=1) / math.sqrt(x.size)) if x.size > 1 else math.nan
        row["stable"] = int(bool(ok) and all(c["stable"] for c in ok))
        rows.append(row)
    return rows


# ---------------------------------------------------------------- output

def fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".9g")
    return str(x)


def write_csv(path: Path, header: list[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([fmt(r.get(h, "")) for h in header])


def _header(rows: list[dict]) -> list[str]:
    header: list[str] = []
    for r in rows:
        header.extend(k for k in r if k not in header)
    return header


def write_outputs(cfg: ScenarioConfig, records: list[dict], summary: RunSummary, out_dir) -> Path:
    """records.csv, summary.csv and manifest.yaml (resolved config) in ``out_dir``."""
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "records.csv", columns_for(cfg), records)
        write_csv(out / "summary.csv", list(summary.metrics), [summary.metrics])
        manifest = {"kind": "run", "config": cfg.to_dict()}
        (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return out


def write_sweep_outputs(base: ScenarioConfig, param: str, values, seeds: int, rows, cells, out_dir) -> Path:
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        write_csv(out / "summary.csv", _header(rows), rows)
        write_csv(out / "cells.csv", _header(cells), cells)
        manifest = {"kind": "sweep", "param": param, "values": [fmt(v) for v in values], "seeds": seeds,
                    "config": base.to_dict()}
        (out / "manifest.yaml").write_text(yaml.safe_dump(manifest, sort_keys=False))
    except OSError as exc:
        raise OSError(f"writing outputs to {out}: {exc}") from exc
    return out


def load_manifest(path) -> tuple[dict, ScenarioConfig]:
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.yaml"
    data = parse_yaml(path.read_text())
    if not isinstance(data, dict) or "config" not in data:
        raise ConfigInvalid(f"{path} is not a run manifest")
    return data, from_dict(data["config"])


def rerun_manifest(path, out_dir) -> Path:
    """Reproduce a run or sweep from its manifest into ``out_dir``."""
    data, cfg = load_manifest(path)
    if data.get("kind") == "sweep":
        rows, cells = sweep(cfg, data["param"], data["values"], int(data["seeds"]))
        return write_sweep_outputs(cfg, data["param"], data["values"], int(data["seeds"]), rows, cells, out_dir)
    records, summary = run_scenario(cfg)
    return write_outputs(cfg, records, summary, out_dir)
