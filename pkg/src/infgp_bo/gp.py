"""Squared-exponential kernel, kriging, and the classical single-GP baseline.

The kernel is ``sigma2 * exp(-sum_k phi_k (x_k - x'_k)**2)``; ``phi`` are
inverse squared length-scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular
from scipy.stats import norm

from . import randdist
from .errors import ChainDivergence, DimensionMismatch
from .history import ObservationHistory
from .linalg import CholeskyFactor, cholesky_jittered, psd_root


@dataclass(frozen=True)
class KernelParams:
    sigma2: float
    phi: np.ndarray
    b_phi: float = math.inf

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        object.__setattr__(self, "phi", phi)
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if np.any(phi <= 0) or np.any(phi > self.b_phi * (1 + 1e-12)):
            raise ValueError(f"phi must lie in (0, {self.b_phi}], got {phi}")

    @property
    def dim(self) -> int:
        return self.phi.shape[0]


def b_phi_from_bounds(bounds: np.ndarray, fraction: float = 0.01) -> float:
    """Upper support of the length-scale prior: ``3 / b_phi = fraction * diameter``."""
    bounds = np.asarray(bounds, dtype=float)
    diameter = float(np.linalg.norm(bounds[:, 1] - bounds[:, 0]))
    return 3.0 / (fraction * diameter)


def sq_diffs(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Per-coordinate squared differences, shape ``(m, k, d)``."""
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatch(f"column counts differ: {a.shape[1]} vs {b.shape[1]}")
    diff = a[:, None, :] - b[None, :, :]
    return diff * diff


def correlation(a: np.ndarray, b: np.ndarray, phi) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    d2 = sq_diffs(a, b)
    if phi.shape[0] not in (1, d2.shape[2]):
        raise DimensionMismatch(f"phi has length {phi.shape[0]}, inputs have d={d2.shape[2]}")
    return np.exp(-(d2 @ np.broadcast_to(phi, (d2.shape[2],))))


def kernel_matrix(a: np.ndarray, b: np.ndarray, kp: KernelParams) -> np.ndarray:
    return kp.sigma2 * correlation(a, b, kp.phi)


def kriging(
    surface_vals: np.ndarray,
    train: np.ndarray,
    query: np.ndarray,
    kp: KernelParams,
    chol: CholeskyFactor | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Noiseless GP conditioning of surface values at ``train`` onto ``query``.

    ``surface_vals`` may be a single length-n vector or an ``(L, n)`` table;
    in the latter case one mean row per surface is returned and all rows
    share the same joint covariance. Pass ``chol`` (factor of the training
    covariance) to reuse one factorization across many calls.
    """
    train = np.atleast_2d(train)
    query = np.atleast_2d(query)
    vals = np.asarray(surface_vals, dtype=float)
    if vals.shape[-1] != train.shape[0]:
        raise DimensionMismatch("surface_vals length must equal number of training inputs")
    if chol is None:
        chol = cholesky_jittered(kernel_matrix(train, train, kp))
    cross = kernel_matrix(train, query, kp)  # (n, m)
    mean = chol.solve(vals.T).T @ cross
    w = chol.half_solve(cross)
    cov = kernel_matrix(query, query, kp) - w.T @ w
    return mean, 0.5 * (cov + cov.T)


# ---------------------------------------------------------------------------
# baseline GP


@dataclass(frozen=True)
class BaselinePriors:
    """Priors for the baseline GP, on standardized rewards.

    ``sigma2 ~ InvGamma(a_sigma, b_sigma)``, ``tau2 ~ InvGamma(a_tau, b_tau)``,
    ``phi_k ~ U(0, b_phi]``.
    """

    b_phi: float
    a_sigma: float = 2.0
    b_sigma: float = 1.0
    a_tau: float = 2.0
    b_tau: float = 1.0


@dataclass(frozen=True)
class GpHypers:
    sigma2: float
    tau2: float
    phi: np.ndarray


@dataclass(frozen=True)
class GpPosterior:
    """Fitted single-GP posterior; predictions are in original reward units."""

    train_inputs: np.ndarray
    kernel: KernelParams
    tau2: float
    chol: CholeskyFactor
    alpha: np.ndarray
    y_mean: float = 0.0
    y_scale: float = 1.0
    hypers: GpHypers | None = field(default=None, compare=False)
    acceptance_rate: float = float("nan")

    @property
    def n(self) -> int:
        return self.train_inputs.shape[0]

    def predict(self, query: np.ndarray, full_cov: bool = False):
        """Latent-function posterior mean and variance (or joint covariance)."""
        query = np.atleast_2d(query)
        cross = kernel_matrix(self.train_inputs, query, self.kernel)
        mean = cross.T @ self.alpha
        w = self.chol.half_solve(cross)
        if full_cov:
            cov = kernel_matrix(query, query, self.kernel) - w.T @ w
            cov = 0.5 * (cov + cov.T) * self.y_scale**2
            return self.y_mean + self.y_scale * mean, cov
        var = np.clip(self.kernel.sigma2 - np.sum(w * w, axis=0), 0.0, None)
        return self.y_mean + self.y_scale * mean, var * self.y_scale**2


def standardize(y: np.ndarray) -> tuple[np.ndarray, float, float]:
    y = np.asarray(y, dtype=float)
    mu = float(np.mean(y))
    sd = float(np.std(y))
    if not sd > 1e-12:
        sd = 1.0
    return (y - mu) / sd, mu, sd


def _posterior_from(X, z, hypers: GpHypers, b_phi, y_mean, y_scale, acc=float("nan")):
    kp = KernelParams(hypers.sigma2, hypers.phi, b_phi)
    k = kernel_matrix(X, X, kp) + hypers.tau2 * np.eye(X.shape[0])
    chol = cholesky_jittered(k)
    return GpPosterior(
        train_inputs=X,
        kernel=kp,
        tau2=hypers.tau2,
        chol=chol,
        alpha=chol.solve(z),
        y_mean=y_mean,
        y_scale=y_scale,
        hypers=hypers,
        acceptance_rate=acc,
    )


def _log_target(theta, d2, z, priors: BaselinePriors):
    """Log posterior of (log sigma2, log tau2, log phi) including Jacobians."""
    log_s2, log_t2 = theta[0], theta[1]
    log_phi = theta[2:]
    phi = np.exp(log_phi)
    if np.any(phi > priors.b_phi):
        return -np.inf
    s2, t2 = math.exp(log_s2), math.exp(log_t2)
    n = z.shape[0]
    k = s2 * np.exp(-(d2 @ phi)) + t2 * np.eye(n)
    try:
        lower = np.linalg.cholesky(k)
    except np.linalg.LinAlgError:
        return -np.inf
    w = solve_triangular(lower, z, lower=True, check_finite=False)
    loglik = -0.5 * (w @ w) - float(np.sum(np.log(np.diag(lower)))) - 0.5 * n * randdist.LOG_2PI
    # inverse-gamma log-density in log coordinates: -a*log(x) - b/x
    lp = -priors.a_sigma * log_s2 - priors.b_sigma / s2
    lp += -priors.a_tau * log_t2 - priors.b_tau / t2
    lp += float(np.sum(log_phi))  # uniform prior on phi, Jacobian of log
    return loglik + lp


def baseline_gp_fit(
    h: ObservationHistory,
    priors: BaselinePriors,
    rng: np.random.Generator,
    iters: int = 500,
    burn_in: int = 250,
    step: float = 0.15,
    init: GpHypers | None = None,
) -> GpPosterior:
    """Fit the baseline GP by random-walk Metropolis over log hyperparameters.

    Rewards are standardized internally; the returned hyperparameters are
    reported in standardized units (``hypers``) and predictions are mapped
    back to the original scale. The point estimate is the average of the
    post-burn-in draws.

    Raises
    ------
    ChainDivergence
        If no proposal is ever accepted.
    """
    X = h.X
    if h.n < 2:
        raise ValueError("baseline GP needs at least two observations")
    z, y_mean, y_scale = standardize(h.y)
    d = X.shape[1]
    d2 = sq_diffs(X, X)

    if init is None:
        init = GpHypers(1.0, 0.1, np.full(d, priors.b_phi / math.sqrt(1000.0)))
    theta = np.concatenate(
        [[math.log(init.sigma2), math.log(init.tau2)], np.log(np.minimum(init.phi, priors.b_phi))]
    )
    lp = _log_target(theta, d2, z, priors)
    if not np.isfinite(lp):
        theta = np.concatenate([[0.0, math.log(0.1)], np.full(d, math.log(priors.b_phi) - 3.0)])
        lp = _log_target(theta, d2, z, priors)

    accepted = 0
    kept = []
    for it in range(iters):
        proposal = theta + step * rng.standard_normal(theta.shape[0])
        lp_new = _log_target(proposal, d2, z, priors)
        if np.log(rng.random()) < lp_new - lp:
            theta, lp = proposal, lp_new
            accepted += 1
        if it >= burn_in:
            kept.append(np.exp(theta))
    if accepted == 0:
        raise ChainDivergence(f"no proposal accepted in {iters} Metropolis steps")
    avg = np.mean(kept, axis=0) if kept else np.exp(theta)
    hypers = GpHypers(float(avg[0]), float(avg[1]), np.minimum(avg[2:], priors.b_phi))
    return _posterior_from(X, z, hypers, priors.b_phi, y_mean, y_scale, accepted / iters)


# ---------------------------------------------------------------------------
# classical acquisitions

UCB_DELTA = 0.1


def ucb_beta(m: int, n: int, delta: float = UCB_DELTA) -> float:
    return 2.0 * math.log(m * n * n * math.pi**2 / 6.0 / delta)


def expected_improvement(mu, s, best) -> np.ndarray:
    """Closed-form EI for maximization; degenerates to ``max(mu-best, 0)`` at s=0."""
    mu = np.asarray(mu, dtype=float)
    s = np.asarray(s, dtype=float)
    gap = mu - best
    out = np.maximum(gap, 0.0)
    ok = s >= 1e-12
    if np.any(ok):
        zz = gap[ok] / s[ok]
        out[ok] = gap[ok] * norm.cdf(zz) + s[ok] * norm.pdf(zz)
    return np.maximum(out, 0.0)


def acquire_ucb(post: GpPosterior, candidates, incumbent_best=None, rng=None) -> int:
    mu, var = post.predict(candidates)
    beta = ucb_beta(len(mu), max(post.n, 1))
    return int(np.argmax(mu + math.sqrt(beta) * np.sqrt(var)))


def acquire_ei(post: GpPosterior, candidates, incumbent_best, rng=None) -> int:
    mu, var = post.predict(candidates)
    return int(np.argmax(expected_improvement(mu, np.sqrt(var), incumbent_best)))


def acquire_gp_ts(post: GpPosterior, candidates, incumbent_best=None, rng=None) -> int:
    mu, cov = post.predict(candidates, full_cov=True)
    if mu.shape[0] == 1:
        return 0
    root = psd_root(cov, 1e-8 * post.kernel.sigma2 * post.y_scale**2)
    return int(np.argmax(mu + root @ rng.standard_normal(len(mu))))
