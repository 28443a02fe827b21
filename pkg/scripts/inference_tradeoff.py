"""Energy/delay trade-off of the edge-inference scenario as V varies.

Sweeps V for the goal-oriented and downsampling compression families at each accuracy target and
writes one sweep directory per (family, target) plus ``tradeoff.png`` when matplotlib is available.

    python scripts/inference_tradeoff.py --out results/inference --slots 3000 --seeds 5
"""
import argparse
from pathlib import Path

import numpy as np

from goiot.config import ScenarioConfig
from goiot.harness import sweep, write_sweep_outputs

from _plot import pyplot, save

FAMILIES = ("goal_oriented", "downsampling")


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", type=Path, default=Path("results/inference"))
    ap.add_argument("--slots", type=int, default=3000)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--targets", default="0.90,0.93")
    ap.add_argument("--v-min", type=float, default=10.0)
    ap.add_argument("--v-max", type=float, default=1000.0)
    ap.add_argument("--points", type=int, default=5)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    targets = [float(t) for t in args.targets.split(",")]
    v_grid = list(np.geomspace(args.v_min, args.v_max, args.points))
    curves = {}
    for target in targets:
        for family in FAMILIES:
            base = ScenarioConfig.default("inference", slots=args.slots, family=family, accuracy_target=target)
            rows, cells = sweep(base, "V", v_grid, seeds=args.seeds, workers=args.workers)
            write_sweep_outputs(base, "V", v_grid, args.seeds, rows, cells, args.out / f"{family}_{target:g}")
            curves[family, target] = rows
            for r in rows:
                print(f"{family:14s} target={target:g} V={r['V']:8.3g} energy={r['mean_energy']:.4g} J "
                      f"delay={r['mean_delay'] * 1e3:.1f} ms accuracy={r['image_accuracy']:.4f}")

    plt = pyplot()
    if plt is None:
        return 0
    fig, axes = plt.subplots(1, len(targets), figsize=(5 * len(targets), 4), squeeze=False)
    for ax, target in zip(axes[0], targets):
        for family in FAMILIES:
            rows = curves[family, target]
            ax.plot([r["mean_delay"] * 1e3 for r in rows], [r["mean_energy"] for r in rows], "o-", label=family)
        ax.set(xlabel="mean delay [ms]", ylabel="mean energy per slot [J]", title=f"accuracy target {target:g}")
        ax.set_yscale("log")
        ax.legend()
    save(fig, args.out / "tradeoff.png")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
