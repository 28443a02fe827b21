"""Federated-learning run: accuracy against the stepped target, with power and latency traces."""
import argparse
from pathlib import Path

import numpy as np

from goiot.config import ScenarioConfig
from goiot.harness import run_scenario, write_outputs

from _plot import pyplot, save


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/fl"))
    ap.add_argument("--slots", type=int, default=1000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--V", type=float, default=10.0)
    ap.add_argument("--noise-sd", type=float, default=None, help="override the surrogate noise level")
    args = ap.parse_args(argv)

    overrides = {} if args.noise_sd is None else {"noise_sd": args.noise_sd}
    cfg = ScenarioConfig.default("fl", slots=args.slots, V=args.V, seed=args.seed, **overrides)
    records, summary = run_scenario(cfg)
    write_outputs(cfg, records, summary, args.out)
    for key in ("mean_accuracy", "mean_power", "mean_latency", "stable_latency", "stable_accuracy"):
        print(f"{key}: {summary.metrics[key]}")

    plt = pyplot()
    if plt is None:
        return 0
    t = np.array([r["slot"] for r in records])
    fig, axes = plt.subplots(3, 1, figsize=(7, 8), sharex=True)
    axes[0].plot(t, [r["accuracy"] for r in records], label="accuracy")
    axes[0].plot(t, [r["target"] for r in records], "k--", label="target")
    axes[0].legend()
    axes[1].plot(t, [r["power"] for r in records])
    axes[2].plot(t, [r["latency"] for r in records])
    axes[2].axhline(cfg.params.latency_bound, color="k", ls="--")
    axes[0].set_ylabel("accuracy")
    axes[1].set_ylabel("power [W]")
    axes[2].set(ylabel="latency [s]", xlabel="iteration")
    save(fig, args.out / "fl_tracking.png")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
