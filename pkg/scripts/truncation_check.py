"""Sensitivity of Thompson choices to the truncation level.

For one synthetic 1-d data set, collects Thompson-sampling choices over a
fixed candidate grid under several fixed truncation levels and reports the
total-variation distance of each choice distribution to the largest level.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from _args import parse_into

from infgp_bo.acquisition import AcquisitionConfig, ts_step
from infgp_bo.history import ObservationHistory
from infgp_bo.infgp import DataCache, GibbsConfig, PriorSpec, gibbs_sweep, run_gibbs


@dataclass
class TruncationSettings:
    levels: str = "2,4,8,12"
    n: int = 20
    draws: int = 1000
    chains: int = 20
    thin: int = 5
    burn_in: int = 200
    candidates: int = 16
    seed: int = 0


def choices(h, priors, cands, L, s: TruncationSettings) -> np.ndarray:
    config = GibbsConfig(B=s.burn_in, L=L)
    cache = DataCache(h.X, priors)
    acq = AcquisitionConfig(C1=0.0)
    out = []
    for c in range(s.chains):
        rng = np.random.default_rng([s.seed, L, c])
        state = run_gibbs(h, priors, config, rng)
        for _ in range(s.draws // s.chains):
            for _ in range(s.thin):
                gibbs_sweep(state, h, priors, rng, cache, config)
            out.append(ts_step(h, state, acq, rng, candidates=cands).index)
    return np.bincount(out, minlength=len(cands)) / len(out)


def main(argv=None):
    s = parse_into(TruncationSettings, __doc__.splitlines()[0], argv)
    rng = np.random.default_rng(s.seed)
    bounds = np.array([[0.0, 1.0]])
    X = rng.uniform(0, 1, (s.n, 1))
    y = np.sin(6 * X[:, 0]) + 0.1 * rng.standard_normal(s.n)
    h = ObservationHistory(bounds, X, (y - y.mean()) / y.std())
    priors = PriorSpec.default(bounds)
    cands = np.linspace(0, 1, s.candidates)[:, None]
    levels = [int(v) for v in s.levels.split(",")]
    dists = {L: choices(h, priors, cands, L, s) for L in levels}
    ref = dists[max(levels)]
    for L in levels:
        tv = 0.5 * np.abs(dists[L] - ref).sum()
        print(f"L={L:>3}  TV to L={max(levels)}: {tv:.3f}  mode at x={cands[np.argmax(dists[L]), 0]:.3f}")


if __name__ == "__main__":
    main()
