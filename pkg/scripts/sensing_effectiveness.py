"""Active sensors and transmit power versus the effectiveness target, for several subspace sizes."""
import argparse
from pathlib import Path

import numpy as np

from goiot.config import ScenarioConfig
from goiot.harness import sweep, write_sweep_outputs

from _plot import pyplot, save


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", type=Path, default=Path("results/sensing"))
    ap.add_argument("--dimensions", default="5,10,15")
    ap.add_argument("--slots", type=int, default=20)
    ap.add_argument("--seeds", type=int, default=5)
    ap.add_argument("--points", type=int, default=6)
    ap.add_argument("--max-target", type=float, default=0.97)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    # budget (1 - target) shrinks geometrically toward the feasibility edge
    targets = [round(float(t), 6) for t in 1 - np.geomspace(1, 1 - args.max_target, args.points)]
    dims = [int(f) for f in args.dimensions.split(",")]
    curves = {}
    for F in dims:
        base = ScenarioConfig.default("sensing", slots=args.slots, burn_in=0.0, subspace_dimension=F)
        rows, cells = sweep(base, "effectiveness_target", targets, seeds=args.seeds, workers=args.workers)
        write_sweep_outputs(base, "effectiveness_target", targets, args.seeds, rows, cells, args.out / f"F{F}")
        curves[F] = rows
        for r in rows:
            print(f"F={F:2d} target={r['effectiveness_target']:.3f} active={r['mean_active_count']:.2f} "
                  f"power={r['mean_total_power']:.3g} W equal-bits={r['mean_equal_bits_power']:.3g} W "
                  f"equal-power={r['mean_equal_power_power']:.3g} W")

    plt = pyplot()
    if plt is None:
        return 0
    fig, (a, b) = plt.subplots(1, 2, figsize=(10, 4))
    for F, rows in curves.items():
        t = [r["effectiveness_target"] for r in rows]
        a.plot(t, [r["mean_active_count"] for r in rows], "o-", label=f"F={F}")
        b.plot(t, [r["mean_total_power"] for r in rows], "o-", label=f"F={F} greedy")
        b.plot(t, [r["mean_equal_power_power"] for r in rows], "x--", label=f"F={F} equal power")
    a.set(xlabel="effectiveness target", ylabel="mean active sensors")
    b.set(xlabel="effectiveness target", ylabel="mean total power [W]", yscale="log")
    a.legend()
    b.legend(fontsize=7)
    save(fig, args.out / "sensing.png")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
