"""Command line entry point: ``erba run|bench|power-map CONFIG``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .experiment import ConfigError, benchmark, load_config, power_map, run_experiment
from .reduction import Criterion, Engine

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_PARTIAL = 0, 2, 3, 4


def _parser():
    ap = argparse.ArgumentParser(prog="erba", description=__doc__)
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", type=Path)
        p.add_argument("-o", "--output-dir", type=Path, help="override output_dir")
        p.add_argument("--seed", type=int)
        p.add_argument("--workers", type=int, help="threads for naive fold scoring")

    p = sub.add_parser("run", help="run one reduction experiment")
    common(p)
    p.add_argument("--criterion", choices=[c.value for c in Criterion])
    p.add_argument("--engine", choices=[e.value for e in Engine])
    p.add_argument("--tau", type=float, help="explicit tolerance, overrides tau_rule")
    p.add_argument("--no-plot", action="store_true")

    p = sub.add_parser("bench", help="timing sweep over grid sizes")
    common(p)
    p.add_argument("--max-steps", type=int, help="cap scored steps per run")
    p.add_argument("--repeats", type=int)

    p = sub.add_parser("power-map", help="power function of the full node set on the eval grid")
    common(p)
    return ap


def _apply_overrides(cfg, args):
    changes = {}
    if args.output_dir is not None:
        changes["output_dir"] = args.output_dir
    for name in ("seed", "workers"):
        if getattr(args, name) is not None:
            changes[name] = getattr(args, name)
    if getattr(args, "criterion", None):
        changes["criterion"] = Criterion(args.criterion)
    if getattr(args, "engine", None):
        changes["engine"] = Engine(args.engine)
    if getattr(args, "tau", None) is not None:
        if not args.tau > 0:
            raise ConfigError("--tau must be positive")
        changes["tau_rule"] = args.tau
    if getattr(args, "no_plot", False):
        changes["emit_plot"] = False
    bench = {}
    if getattr(args, "max_steps", None) is not None:
        bench["max_steps"] = args.max_steps
    if getattr(args, "repeats", None) is not None:
        if args.repeats < 1:
            raise ConfigError("--repeats must be >= 1")
        bench["repeats"] = args.repeats
    if bench:
        changes["bench"] = replace(cfg.bench, **bench)
    cfg = replace(cfg, **changes)
    cfg.reduction_config(1.0)
    return cfg


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        if args.command == "run":
            report = run_experiment(cfg)
            summary = {k: v for k, v in report.to_dict().items() if k != "step_seconds"}
            print(json.dumps(summary, indent=2))
        elif args.command == "bench":
            result = benchmark(cfg)
            print(json.dumps(result.slopes, indent=2))
            if result.failures:
                print(f"{len(result.failures)} benchmark cell(s) failed", file=sys.stderr)
                return EXIT_PARTIAL
        else:
            _, power = power_map(cfg)
            print(f"max power {power.max():.6g} on {len(power)} points -> {cfg.output_dir}")
    except np.linalg.LinAlgError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except ValueError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
