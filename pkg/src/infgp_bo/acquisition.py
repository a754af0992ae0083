"""Predictive mixture, Thompson-sampling acquisition and the optimization loop."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import gp, randdist
from .benchmarks import Objective, RegretTrace
from .errors import FactorizationFailure, InvalidParameter
from .gp import kernel_matrix, kriging
from .history import ObservationHistory
from .infgp import GibbsConfig, GibbsState, PriorSpec, run_gibbs
from .linalg import psd_root

ALGORITHMS = ("infgp_ts", "gp_ts", "gp_ucb", "gp_ei")
CANDIDATE_SCHEMES = ("uniform", "latin_hypercube")
PATH_JITTER = 1e-8  # relative to the prior surface variance


@dataclass(frozen=True)
class AcquisitionConfig:
    """Exploration schedule ``zeta_n = C1 * n**(-lambda1)`` and candidate-set settings.

    ``num_candidates=None`` means ``256 * d``.
    """

    C1: float = 1.0
    lambda1: float = 0.5
    num_candidates: int | None = None
    candidate_scheme: str = "latin_hypercube"

    def __post_init__(self):
        if not 0 <= self.C1 <= 1:
            raise InvalidParameter("C1 must lie in [0, 1] so that zeta stays a probability")
        if not 0 < self.lambda1 < 1:
            raise InvalidParameter("lambda1 must lie in (0, 1)")
        if self.num_candidates is not None and self.num_candidates < 1:
            raise InvalidParameter("num_candidates must be positive")
        if self.candidate_scheme not in CANDIDATE_SCHEMES:
            raise InvalidParameter(f"candidate_scheme must be one of {CANDIDATE_SCHEMES}")

    def zeta(self, n: int) -> float:
        return self.C1 * max(n, 1) ** (-self.lambda1)

    def candidates_for(self, d: int) -> int:
        return self.num_candidates or 256 * d


def generate_candidates(bounds: np.ndarray, m: int, scheme: str, rng) -> np.ndarray:
    bounds = np.atleast_2d(bounds)
    d = bounds.shape[0]
    if scheme == "latin_hypercube":
        unit = qmc.LatinHypercube(d=d, seed=rng).random(m)
    else:
        unit = rng.random((m, d))
    return bounds[:, 0] + unit * (bounds[:, 1] - bounds[:, 0])


def uniform_point(bounds: np.ndarray, rng) -> np.ndarray:
    bounds = np.atleast_2d(bounds)
    return rng.uniform(bounds[:, 0], bounds[:, 1])


# ---------------------------------------------------------------------------
# predictive mixture


@dataclass
class PredictiveMixture:
    """Urn-scheme mixture over candidates: a fresh prior surface or a reused one.

    Every reused surface shares the same kriging covariance ``cov``; only the
    means differ. Covariance square roots are computed lazily and cached.
    """

    new_surface_weight: float
    component_weights: np.ndarray  # (K,)
    component_surfaces: np.ndarray  # (K,) surface labels
    means: np.ndarray  # (K, m)
    cov: np.ndarray  # (m, m) kriging covariance
    prior_cov: np.ndarray  # (m, m)
    sigma2: float
    _factors: dict = field(default_factory=dict, repr=False)

    @property
    def weights(self) -> np.ndarray:
        """``[new, component_1, ..., component_K]``."""
        return np.concatenate([[self.new_surface_weight], self.component_weights])

    def root(self, which: str) -> np.ndarray:
        """Square root ``A`` (``A A^T ~= cov``) of the ``"prior"`` or ``"post"`` covariance."""
        if which not in self._factors:
            mat = self.prior_cov if which == "prior" else self.cov
            self._factors[which] = psd_root(mat, PATH_JITTER * self.sigma2)
        return self._factors[which]


def build_predictive(state: GibbsState, candidates: np.ndarray) -> PredictiveMixture:
    """Mixture with weight ``nu/(nu+n)`` on a new surface and ``n_j/(nu+n)`` on surface ``j``."""
    candidates = np.atleast_2d(candidates)
    nu, n = state.hp.nu, state.n
    kp = state.kernel
    prior_cov = kernel_matrix(candidates, candidates, kp)
    occupied = np.flatnonzero(state.table.counts)
    denom = nu + n
    if n == 0:
        return PredictiveMixture(
            1.0, np.zeros(0), occupied, np.zeros((0, len(candidates))), prior_cov, prior_cov, kp.sigma2
        )
    means, cov = kriging(state.table.values[occupied], state.X, candidates, kp, state.sigma0_chol())
    return PredictiveMixture(
        new_surface_weight=nu / denom,
        component_weights=state.table.counts[occupied] / denom,
        component_surfaces=occupied,
        means=np.atleast_2d(means),
        cov=cov,
        prior_cov=prior_cov,
        sigma2=kp.sigma2,
    )


@dataclass(frozen=True)
class PosteriorDraw:
    beta_hat: np.ndarray
    path: np.ndarray
    chosen_component: int | str  # surface label, or "new"


def sample_path(mix: PredictiveMixture, beta_hat, candidates, rng) -> PosteriorDraw:
    """Pick a mixture component, draw one joint path over candidates, add the trend."""
    candidates = np.atleast_2d(candidates)
    k = randdist.sample_categorical(mix.weights, rng)
    if k == 0:
        mean, which, label = np.zeros(candidates.shape[0]), "prior", "new"
    else:
        mean, which, label = mix.means[k - 1], "post", int(mix.component_surfaces[k - 1])
    mat = mix.prior_cov if which == "prior" else mix.cov
    if not np.any(mat):
        xi = mean.copy()
    else:
        xi = mean + mix.root(which) @ rng.standard_normal(len(mean))
    trend = candidates @ np.asarray(beta_hat, dtype=float)
    return PosteriorDraw(np.asarray(beta_hat, dtype=float), xi + trend, label)


@dataclass(frozen=True)
class TSChoice:
    x: np.ndarray
    index: int | None  # candidate index; None when the step explored uniformly
    explored: bool
    draw: PosteriorDraw | None = None


def ts_step(
    h: ObservationHistory,
    state: GibbsState,
    config: AcquisitionConfig,
    rng,
    candidates: np.ndarray | None = None,
) -> TSChoice:
    """One zeta-greedy Thompson step: explore uniformly w.p. ``zeta_n``, else argmax of a path."""
    if rng.random() < config.zeta(h.n):
        return TSChoice(uniform_point(h.bounds, rng), None, True)
    if candidates is None:
        candidates = generate_candidates(h.bounds, config.candidates_for(h.d), config.candidate_scheme, rng)
    mix = build_predictive(state, candidates)
    draw = sample_path(mix, state.hp.beta, candidates, rng)
    idx = int(np.argmax(draw.path))
    return TSChoice(np.array(candidates[idx]), idx, False, draw)


# ---------------------------------------------------------------------------
# optimization loop


@dataclass(frozen=True)
class OptimizerConfig:
    acquisition: AcquisitionConfig = field(default_factory=AcquisitionConfig)
    gibbs: GibbsConfig = field(default_factory=GibbsConfig)
    prior_overrides: dict = field(default_factory=dict)
    n_init: int | None = None  # None means max(3, 2d)
    baseline_iters: int = 500
    baseline_burn_in: int = 250
    baseline_step: float = 0.15
    weights_every: int = 10

    def initial_points(self, d: int) -> int:
        return self.n_init if self.n_init is not None else max(3, 2 * d)


# stream phases within one iteration
PHASE_FIT, PHASE_ACQUIRE, PHASE_EVALUATE = 1, 2, 3


def _standardizer(y0: np.ndarray) -> tuple[float, float]:
    _, mu, sd = gp.standardize(y0)
    return mu, sd


BASELINE_ACQUIRE = {"gp_ts": gp.acquire_gp_ts, "gp_ucb": gp.acquire_ucb, "gp_ei": gp.acquire_ei}


def optimize(
    objective: Objective,
    algorithm: str,
    budget: int,
    config: OptimizerConfig | None = None,
    seed: int = 0,
    replication: int = 0,
) -> RegretTrace:
    """Run one replication of ``algorithm`` on ``objective`` for ``budget`` iterations.

    Random streams are forked from ``seed`` by ``(replication, iteration, phase)``,
    so the initial design and the evaluation noise at a given iteration are
    shared across algorithms. A factorization failure ends the run early and
    is recorded in ``trace.failure``.
    """
    if algorithm not in ALGORITHMS:
        raise InvalidParameter(f"unknown algorithm {algorithm!r}")
    if budget < 1:
        raise InvalidParameter("budget must be at least 1")
    config = config or OptimizerConfig()
    bounds = objective.bounds
    d = objective.d
    trace = RegretTrace(d)
    h = ObservationHistory(bounds)

    n_init = config.initial_points(d)
    init_rng = randdist.fork(seed, replication, 0, 0)
    noise_rng = randdist.fork(seed, replication, 0, PHASE_EVALUATE)
    for j in range(n_init):
        x = uniform_point(bounds, init_rng)
        y = objective.evaluate(x, noise_rng)
        h.append(x, y)
        trace.add(j - n_init + 1, x, y, objective.regret(x))

    mu, sd = _standardizer(h.y)
    priors = PriorSpec.default(bounds, **config.prior_overrides)
    bpriors = gp.BaselinePriors(
        b_phi=priors.b_phi, a_sigma=priors.a_sigma, b_sigma=priors.b_sigma, a_tau=priors.a_tau, b_tau=priors.b_tau
    )
    state: GibbsState | None = None
    hypers: gp.GpHypers | None = None

    for it in range(1, budget + 1):
        fit_rng = randdist.fork(seed, replication, it, PHASE_FIT)
        acq_rng = randdist.fork(seed, replication, it, PHASE_ACQUIRE)
        eval_rng = randdist.fork(seed, replication, it, PHASE_EVALUATE)
        t0 = time.perf_counter()
        k_n = 0
        try:
            if algorithm == "infgp_ts":
                hz = ObservationHistory(bounds, h.X, (h.y - mu) / sd)
                state = run_gibbs(hz, priors, config.gibbs, fit_rng, state)
                x = ts_step(hz, state, config.acquisition, acq_rng).x
                k_n = state.table.n_occupied
                if config.weights_every and it % config.weights_every == 0:
                    trace.weight_checkpoints.append((it, state.table.weights.copy()))
            else:
                if acq_rng.random() < config.acquisition.zeta(h.n):
                    x = uniform_point(bounds, acq_rng)
                else:
                    post = gp.baseline_gp_fit(
                        h,
                        bpriors,
                        fit_rng,
                        iters=config.baseline_iters,
                        burn_in=config.baseline_burn_in,
                        step=config.baseline_step,
                        init=hypers,
                    )
                    hypers = post.hypers
                    cands = generate_candidates(
                        bounds, config.acquisition.candidates_for(d), config.acquisition.candidate_scheme, acq_rng
                    )
                    idx = BASELINE_ACQUIRE[algorithm](post, cands, float(np.max(h.y)), acq_rng)
                    x = cands[idx]
        except FactorizationFailure as exc:
            trace.failure = f"iteration {it}: {exc}"
            break
        wall = (time.perf_counter() - t0) * 1e3
        y = objective.evaluate(x, eval_rng)
        h.append(x, y)
        trace.add(it, x, y, objective.regret(x), k_n, wall)
    return trace
