"""Command-line entry point: ``goiot run | sweep | oracle-check``."""
from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import harness
from .config import SCENARIOS, ScenarioConfig, load_config
from .errors import GoIoTError

log = logging.getLogger("goiot")

EXIT_CODES = {"config": 2, "infeasible": 3, "solver": 4, "diagnostic": 5, "scenario": 6, "io": 7, "error": 1}


def _base_config(args) -> ScenarioConfig:
    if args.config:
        cfg = load_config(args.config)
        if args.scenario and args.scenario != cfg.scenario:
            raise_config(f"--scenario {args.scenario} contradicts config scenario {cfg.scenario}")
    else:
        cfg = ScenarioConfig.default(args.scenario or "sensing")
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if getattr(args, "slots", None) is not None:
        changes["slots"] = args.slots
    return cfg.replace(**changes) if changes else cfg


def raise_config(msg):
    from .errors import ConfigInvalid

    raise ConfigInvalid(msg)


def cmd_run(args) -> int:
    cfg = _base_config(args)
    records, summary = harness.run_scenario(cfg)
    out = harness.write_outputs(cfg, records, summary, args.out)
    log.info("%s: %d slots in %.2f s -> %s", cfg.scenario, cfg.slots, summary.wall_clock, out)
    for k, v in summary.metrics.items():
        log.debug("  %s = %s", k, harness.fmt(v))
    return 0


def cmd_sweep(args) -> int:
    cfg = _base_config(args)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    rows, cells = harness.sweep(cfg, args.param, values, args.seeds, workers=args.workers)
    out = harness.write_sweep_outputs(cfg, args.param, values, args.seeds, rows, cells, args.out)
    failed = sum(r["n_failed"] for r in rows)
    log.info("sweep over %s: %d values x %d seeds (%d failed cells) -> %s", args.param, len(values), args.seeds,
             failed, out)
    return 0


def cmd_oracle_check(args) -> int:
    from .audit import oracle_audit

    report = oracle_audit(args.instances, np.random.default_rng(args.seed))
    print(report.format())
    return 0 if report.passed else EXIT_CODES["solver"]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="goiot", description="Goal-oriented IoT resource allocation simulator")
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("--quiet", action="store_true", help="only report errors")
    verbosity.add_argument("--verbose", action="store_true", help="print summary metrics")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--scenario", choices=sorted(SCENARIOS))
        p.add_argument("--config", help="YAML scenario config")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", required=True, help="output directory")

    run = sub.add_parser("run", help="run one scenario and write records, summary and manifest")
    common(run)
    run.add_argument("--slots", type=int)
    run.set_defaults(func=cmd_run)

    sw = sub.add_parser("sweep", help="seed-replicated sweep over one parameter")
    common(sw)
    sw.add_argument("--slots", type=int)
    sw.add_argument("--param", required=True, help="V, effectiveness_target, subspace_dimension or any scenario field")
    sw.add_argument("--values", required=True, help="comma-separated values")
    sw.add_argument("--seeds", type=int, default=5, help="replications per value")
    sw.add_argument("--workers", type=int, default=1)
    sw.set_defaults(func=cmd_sweep)

    oc = sub.add_parser("oracle-check", help="audit the sensing greedy against brute force")
    oc.add_argument("--instances", type=int, default=200)
    oc.add_argument("--seed", type=int, default=0)
    oc.set_defaults(func=cmd_oracle_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.ERROR if args.quiet else logging.DEBUG if args.verbose else logging.INFO
    logging.basicConfig(level=level, format="%(levelname)s %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except GoIoTError as exc:
        log.error("%s error: %s", exc.category, exc)
        return EXIT_CODES.get(exc.category, 1)
    except OSError as exc:
        log.error("io error: %s", exc)
        return EXIT_CODES["io"]


if __name__ == "__main__":
    sys.exit(main())
