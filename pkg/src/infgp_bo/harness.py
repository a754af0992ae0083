"""Experiment runner: replication fan-out, aggregation and file output.

Layout written by :func:`run_experiment` under ``<output>/<benchmark>/``::

    config.txt                    the resolved configuration
    <algorithm>/rep_000.csv       one regret trace per replication
    <algorithm>/weights_000.csv   surface-weight checkpoints (infgp_ts only)
    aggregate.csv                 mean and standard error of R_cum per iteration
    regret.svg                    mean +/- SE band per algorithm
    summary.json                  final regrets, failures and timings
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .acquisition import OptimizerConfig, optimize
from .benchmarks import SYNTHETIC_SUITE, Objective, RegretTrace
from .config import ExperimentConfig
from .svgplot import band_plot

log = logging.getLogger(__name__)


@dataclass
class ReplicationResult:
    algorithm: str
    replication: int
    trace: RegretTrace | None
    failure: str | None
    wall_s: float


def _replicate(objective: Objective, algorithm: str, budget: int, opt: OptimizerConfig, seed: int, rep: int):
    t0 = time.perf_counter()
    try:
        trace = optimize(objective, algorithm, budget, opt, seed=seed, replication=rep)
        failure = trace.failure
    except Exception as exc:  # one bad replication must not take its siblings down
        trace, failure = None, f"{type(exc).__name__}: {exc}"
    return ReplicationResult(algorithm, rep, trace, failure, time.perf_counter() - t0)


def aggregate(traces: list[RegretTrace]) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-iteration ``(iters, mean, se, count)`` of cumulative regret.

    A truncated (failed) trace contributes only to the rows it reached. The
    standard error is the sample standard deviation (``ddof=1``) over
    ``sqrt(count)``; it is reported as 0 where fewer than two traces exist.
    """
    traces = [t for t in traces if t is not None and len(t)]
    if not traces:
        return (np.zeros(0, int),) + (np.zeros(0),) * 3
    longest = max(traces, key=len)
    iters = np.array(longest.iters)
    mean, se, count = np.empty(len(iters)), np.zeros(len(iters)), np.empty(len(iters), dtype=int)
    for i in range(len(iters)):
        col = np.array([t.R_cum[i] for t in traces if len(t) > i])
        count[i] = len(col)
        mean[i] = col.mean()
        if len(col) > 1:
            se[i] = col.std(ddof=1) / np.sqrt(len(col))
    return iters, mean, se, count


def aggregate_csv(per_algorithm: dict[str, list[RegretTrace]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["algorithm", "iter", "n_reps", "mean_R_cum", "se_R_cum"])
    for alg, traces in per_algorithm.items():
        iters, mean, se, count = aggregate(traces)
        for row in zip(iters, count, mean, se):
            w.writerow([alg, int(row[0]), int(row[1]), repr(float(row[2])), repr(float(row[3]))])
    return buf.getvalue()


def read_aggregate(path) -> dict[str, dict[str, np.ndarray]]:
    out: dict[str, dict[str, list]] = {}
    with open(path) as fh:
        for row in csv.DictReader(fh):
            d = out.setdefault(row["algorithm"], {"iter": [], "n_reps": [], "mean": [], "se": []})
            d["iter"].append(int(row["iter"]))
            d["n_reps"].append(int(row["n_reps"]))
            d["mean"].append(float(row["mean_R_cum"]))
            d["se"].append(float(row["se_R_cum"]))
    return {alg: {k: np.array(v) for k, v in d.items()} for alg, d in out.items()}


def weights_matrix(checkpoints: list[tuple[int, np.ndarray]]) -> tuple[np.ndarray, np.ndarray]:
    """Checkpoint iterations and an ``(n_checkpoints, L)`` weight matrix, zero-padded to the largest L."""
    if not checkpoints:
        return np.zeros(0, int), np.zeros((0, 0))
    width = max(len(w) for _, w in checkpoints)
    mat = np.zeros((len(checkpoints), width))
    for i, (_, w) in enumerate(checkpoints):
        mat[i, : len(w)] = w
    return np.array([it for it, _ in checkpoints]), mat


def export_surface_weights(checkpoints: list[tuple[int, np.ndarray]], path=None) -> str:
    """CSV with one row per checkpoint: ``iter, w1, ..., wL``."""
    iters, mat = weights_matrix(checkpoints)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["iter"] + [f"w{k + 1}" for k in range(mat.shape[1])])
    for it, row in zip(iters, mat):
        w.writerow([int(it)] + [repr(float(v)) for v in row])
    text = buf.getvalue()
    if path is not None:
        Path(path).write_text(text)
    return text


@dataclass
class RunSummary:
    benchmark: str
    algorithms: tuple[str, ...]
    budget: int
    replications: int
    final_regret: dict = field(default_factory=dict)  # alg -> list (None for failed replications)
    mean: dict = field(default_factory=dict)  # alg -> array over trace rows
    se: dict = field(default_factory=dict)
    iters: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)  # alg -> {rep: message}
    fit_time_ms: dict = field(default_factory=dict)  # alg -> mean fit+acquire time per iteration
    wall_time_s: float = 0.0
    traces: dict = field(default_factory=dict, repr=False)  # alg -> list[RegretTrace | None]
    output_dir: Path | None = None

    @property
    def n_failures(self) -> int:
        return sum(len(v) for v in self.failures.values())

    def to_json(self) -> dict:
        return {
            "benchmark": self.benchmark,
            "algorithms": list(self.algorithms),
            "budget": self.budget,
            "replications": self.replications,
            "final_cumulative_regret": self.final_regret,
            "final_mean": {a: float(m[-1]) if len(m) else None for a, m in self.mean.items()},
            "final_se": {a: float(s[-1]) if len(s) else None for a, s in self.se.items()},
            "failures": {a: {str(k): v for k, v in f.items()} for a, f in self.failures.items()},
            "mean_fit_time_ms_per_iteration": self.fit_time_ms,
            "wall_time_s": self.wall_time_s,
        }


def _resolve_workers(requested: int | None, tasks: int) -> int:
    return max(1, min(tasks, requested or os.cpu_count() or 1))


def run_replications(tasks: list[tuple], workers: int) -> list[ReplicationResult]:
    if workers <= 1:
        return [_replicate(*t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_replicate, *t) for t in tasks]
        return [f.result() for f in futures]


def run_experiment(config: ExperimentConfig, output_dir=None, workers: int | None = None, write: bool = True) -> RunSummary:
    """Run every (algorithm, replication) pair of ``config`` and write the artifacts.

    All algorithms share the replication streams, so replication ``r`` sees the
    same initial design and the same per-iteration noise under each method.
    """
    t0 = time.perf_counter()
    objective = config.objective()
    opt = config.optimizer_config()
    budget, reps, seed = config["budget"], config["replications"], config["seed"]
    tasks = [(objective, alg, budget, opt, seed, r) for alg in config.algorithms for r in range(reps)]
    results = run_replications(tasks, _resolve_workers(workers or config["workers"], len(tasks)))

    summary = RunSummary(config["benchmark"], config.algorithms, budget, reps)
    for alg in config.algorithms:
        mine = sorted((res for res in results if res.algorithm == alg), key=lambda res: res.replication)
        traces = [res.trace for res in mine]
        summary.traces[alg] = traces
        summary.failures[alg] = {res.replication: res.failure for res in mine if res.failure}
        summary.final_regret[alg] = [
            t.R_cum[-1] if t is not None and not res.failure else None for t, res in zip(traces, mine)
        ]
        summary.iters[alg], summary.mean[alg], summary.se[alg], _ = aggregate(traces)
        bo_times = [w for t in traces if t is not None for it, w in zip(t.iters, t.wall_ms) if it > 0]
        summary.fit_time_ms[alg] = float(np.mean(bo_times)) if bo_times else None
        for rep, msg in summary.failures[alg].items():
            log.warning("%s replication %d failed: %s", alg, rep, msg)
    summary.wall_time_s = time.perf_counter() - t0

    if write:
        root = Path(output_dir) if output_dir is not None else config.output_dir
        write_outputs(summary, config, root / config["benchmark"])
    return summary


def write_outputs(summary: RunSummary, config: ExperimentConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    summary.output_dir = out
    (out / "config.txt").write_text(config.to_text())
    for alg, traces in summary.traces.items():
        sub = out / alg
        sub.mkdir(exist_ok=True)
        for rep, trace in enumerate(traces):
            if trace is None:
                continue
            trace.to_csv(sub / f"rep_{rep:03d}.csv", timing=config["record_time"])
            if trace.weight_checkpoints:
                export_surface_weights(trace.weight_checkpoints, sub / f"weights_{rep:03d}.csv")
    (out / "aggregate.csv").write_text(aggregate_csv(summary.traces))
    curves = {
        alg: (summary.mean[alg], summary.se[alg]) for alg in summary.algorithms if len(summary.mean[alg])
    }
    if curves:
        # shared x-axis from the longest trace; truncated (failed) curves are held at their last value
        n = max(len(m) for m, _ in curves.values())
        x = next(summary.iters[a] for a in curves if len(summary.iters[a]) == n)
        padded = {a: (_pad(m, n), _pad(s, n)) for a, (m, s) in curves.items()}
        (out / "regret.svg").write_text(band_plot(x, padded, title=summary.benchmark))
    (out / "summary.json").write_text(json.dumps(summary.to_json(), indent=2) + "\n")


def _pad(v: np.ndarray, n: int) -> np.ndarray:
    return np.concatenate([v, np.full(n - len(v), v[-1])]) if len(v) < n else v


def run_suite(
    base: ExperimentConfig,
    benchmarks=SYNTHETIC_SUITE,
    output_dir=None,
    workers: int | None = None,
) -> list[RunSummary]:
    """Run ``base`` once per benchmark name and write a suite-level index."""
    root = Path(output_dir) if output_dir is not None else base.output_dir
    summaries = []
    for name in benchmarks:
        cfg = base.with_values(benchmark=name)
        log.info("running %s (%s)", name, ", ".join(cfg.algorithms))
        summaries.append(run_experiment(cfg, root, workers))
    index = {s.benchmark: s.to_json() for s in summaries}
    root.mkdir(parents=True, exist_ok=True)
    (root / "suite_summary.json").write_text(json.dumps(index, indent=2) + "\n")
    return summaries
