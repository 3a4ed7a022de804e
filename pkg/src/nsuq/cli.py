"""Command line front end: run-weak, run-strong, run-convergence."""

from __future__ import annotations

import argparse
import json
import os
import sys

from .experiments import (
    ExperimentConfig,
    run_deterministic_convergence,
    run_strong,
    run_weak,
)

_RUNNERS = {
    "run-weak": ("weak", run_weak),
    "run-strong": ("strong", run_strong),
    "run-convergence": ("convergence", run_deterministic_convergence),
}


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nsuq", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _RUNNERS:
        p = sub.add_parser(name, help=f"{name.replace('run-', '')} experiment from a config file")
        p.add_argument("--config", required=True, help="path to a JSON experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default="nsuq-out", help="output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (flag > NSUQ_THREADS > config)")
    return parser


def _resolve_threads(args, config: ExperimentConfig) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("NSUQ_THREADS")
    if env is not None:
        return int(env)
    return config.threads


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    mode, runner = _RUNNERS[args.command]
    try:
        with open(args.config) as fh:
            doc = json.load(fh)
        config = ExperimentConfig.from_dict(doc)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        overrides["threads"] = _resolve_threads(args, config)
        if overrides:
            doc = config.to_dict()
            doc.update(overrides)
            config = ExperimentConfig.from_dict(doc)
        if config.mode != mode:
            raise ValueError(f"config mode {config.mode!r} does not match {args.command}")
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        print(f"nsuq: config error: {exc}", file=sys.stderr)
        return 2

    report = runner(config)
    try:
        report.write(args.out)
    except OSError as exc:
        print(f"nsuq: cannot write report: {exc}", file=sys.stderr)
        return 2
    tainted = [lvl["level"] for lvl in report.summary.get("levels", []) if lvl.get("tainted")]
    if tainted:
        print(f"completed with tainted levels {tainted}; report in {args.out}")
    else:
        print(f"completed; report in {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
