"""Command-line entry point: ``run``, ``bench`` and ``validate``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

from .acquisition import ALGORITHMS
from .benchmarks import SYNTHETIC_SUITE
from .config import ExperimentConfig, fields_help, from_mapping, load_config
from .errors import ConfigError
from .harness import run_experiment, run_suite

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2
SUITES = {"synthetic": SYNTHETIC_SUITE}


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="infgp-bo", description="Bayesian optimization with an infinite-GP surrogate.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    fmt = argparse.RawDescriptionHelpFormatter
    run = sub.add_parser(
        "run",
        help="run one experiment from a config file",
        formatter_class=fmt,
        epilog="config fields (one 'key = value' per line):\n" + fields_help(),
    )
    run.add_argument("--config", required=True, help="path to the config file")
    run.add_argument("--output", help="output directory (overrides the config and the environment)")
    run.add_argument("--workers", type=int, help="parallel replications (default: config, else logical cores)")

    bench = sub.add_parser("bench", help="run a benchmark suite for several algorithms")
    bench.add_argument("--suite", choices=sorted(SUITES), default="synthetic")
    bench.add_argument("--budget", type=int, default=100)
    bench.add_argument("--reps", type=int, default=10)
    bench.add_argument("--seed", type=int, default=0)
    bench.add_argument("--dim", type=int, default=2)
    bench.add_argument("--algorithms", default=",".join(ALGORITHMS), help="comma-separated algorithm names")
    bench.add_argument("--config", help="optional base config; suite arguments override it")
    bench.add_argument("--output", help="output directory")
    bench.add_argument("--workers", type=int)

    val = sub.add_parser("validate", help="parse and check a config file without running it")
    val.add_argument("--config", required=True)
    return p


def _bench_config(args) -> ExperimentConfig:
    base = load_config(args.config) if args.config else ExperimentConfig()
    values = dict(base.values)
    values.update(
        {
            "budget": args.budget,
            "replications": args.reps,
            "seed": args.seed,
            "dim": args.dim,
            "algorithms": tuple(a.strip() for a in args.algorithms.split(",") if a.strip()),
        }
    )
    return from_mapping(values, parsed=True)


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"ok: {cfg['benchmark']} with {', '.join(cfg.algorithms)}")
            return EXIT_OK
        if args.command == "run":
            cfg = load_config(args.config)
            summaries = [run_experiment(cfg, args.output, args.workers)]
        else:
            cfg = _bench_config(args)
            summaries = run_suite(cfg, SUITES[args.suite], args.output, args.workers)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        print(f"runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    total = sum(s.replications * len(s.algorithms) for s in summaries)
    failed = sum(s.n_failures for s in summaries)
    for s in summaries:
        finals = ", ".join(f"{a}={s.to_json()['final_mean'][a]:.4g}" for a in s.algorithms if len(s.mean[a]))
        print(f"{s.benchmark}: mean final cumulative regret {finals} -> {s.output_dir}")
    if failed:
        print(f"{failed} of {total} replications failed; see summary.json", file=sys.stderr)
    return EXIT_RUNTIME if failed == total else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
