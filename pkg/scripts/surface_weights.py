"""Evolution of the surface weights of the infinite-GP surrogate on Ackley-NS.

Runs ``infgp_ts`` with a fixed truncation level, exports the weight
checkpoints of every replication and plots the across-replication mean
weight of each surface against the iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from _args import parse_into

from infgp_bo.config import ExperimentConfig
from infgp_bo.harness import run_experiment, weights_matrix
from infgp_bo.svgplot import band_plot


@dataclass
class WeightSettings:
    benchmark: str = "ackley_ns"
    dim: int = 2
    L: int = 4
    budget: int = 100
    reps: int = 10
    every: int = 5
    threshold: float = 0.05
    seed: int = 0
    workers: int = 0
    output: str = "results/weights"


def main(argv=None):
    s = parse_into(WeightSettings, __doc__.splitlines()[0], argv)
    cfg = ExperimentConfig().with_values(
        benchmark=s.benchmark,
        dim=s.dim,
        algorithms=("infgp_ts",),
        budget=s.budget,
        replications=s.reps,
        seed=s.seed,
        weights_every=s.every,
        gibbs__L=s.L,
    )
    summary = run_experiment(cfg, s.output, s.workers or None)
    mats = []
    for trace in summary.traces["infgp_ts"]:
        if trace is None or not trace.weight_checkpoints:
            continue
        iters, mat = weights_matrix(trace.weight_checkpoints)
        mats.append(mat)
    n = min(len(m) for m in mats)
    stack = np.stack([m[:n] for m in mats])  # (reps, checkpoints, L)
    mean = stack.mean(axis=0)
    se = stack.std(axis=0, ddof=1) / np.sqrt(len(stack)) if len(stack) > 1 else np.zeros_like(mean)
    curves = {f"surface {k + 1}": (mean[:, k], se[:, k]) for k in range(mean.shape[1])}
    out = Path(s.output) / s.benchmark / "surface_weights.svg"
    out.write_text(band_plot(iters[:n], curves, title=f"{s.benchmark}: surface weights (L={s.L})", ylabel="weight"))

    heavy = [int(np.sum(m[-1] > s.threshold)) for m in mats]
    print("final mean weights:", np.round(mean[-1], 3))
    print(f"surfaces above {s.threshold} at the last checkpoint, per replication: {heavy}")
    print(f"plot: {out}")


if __name__ == "__main__":
    main()
