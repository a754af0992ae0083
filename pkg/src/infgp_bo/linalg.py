"""Dense symmetric linear algebra: jittered Cholesky, solves and Gaussian conditioning.

Every solve goes through a Cholesky factor (two triangular solves); nothing
here forms an explicit matrix inverse of a covariance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatch, FactorizationFailure

JITTER_ESCALATIONS = 6
RELATIVE_JITTER = 1e-8


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower Cholesky factor of ``m + jitter_used * I``."""

    lower: np.ndarray
    jitter_used: float = 0.0

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def half_solve(self, b: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} b``."""
        return solve_triangular(self.lower, b, lower=True, check_finite=False)

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Return ``(L L^T)^{-1} b``."""
        w = self.half_solve(b)
        return solve_triangular(self.lower, w, lower=True, trans="T", check_finite=False)

    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))

    def reconstruct(self) -> np.ndarray:
        return self.lower @ self.lower.T

    def scaled(self, variance: float) -> "CholeskyFactor":
        """Factor of ``variance * (m + jitter I)``, reusing this factorization."""
        return CholeskyFactor(np.sqrt(variance) * self.lower, variance * self.jitter_used)


def default_jitter(m: np.ndarray) -> float:
    if m.size == 0:
        return 0.0
    return RELATIVE_JITTER * float(np.mean(np.diag(m)))


def cholesky_jittered(m: np.ndarray, base_jitter: float | None = None) -> CholeskyFactor:
    """Factor ``m``, adding the smallest diagonal jitter that makes it succeed.

    Tries jitter 0 first, then ``base_jitter * 10**k`` for k = 0..6.

    Parameters
    ----------
    m : (n, n) array
        Symmetric matrix.
    base_jitter : float, optional
        First nonzero jitter to try. Defaults to ``1e-8 * mean(diag(m))``.

    Raises
    ------
    FactorizationFailure
        If every escalation fails.
    """
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {m.shape}")
    if base_jitter is None:
        base_jitter = default_jitter(m)
    if base_jitter < 0:
        raise ValueError("base_jitter must be nonnegative")

    n = m.shape[0]
    if n == 0:
        return CholeskyFactor(np.zeros((0, 0)), 0.0)
    eye = np.eye(n)
    jitters = [0.0]
    if base_jitter > 0:
        jitters += [base_jitter * 10.0**k for k in range(JITTER_ESCALATIONS + 1)]
    for jitter in jitters:
        try:
            lower = np.linalg.cholesky(m + jitter * eye if jitter else m)
        except np.linalg.LinAlgError:
            continue
        if np.all(np.isfinite(lower)) and np.all(np.diag(lower) > 0):
            return CholeskyFactor(lower, jitter)
    raise FactorizationFailure(
        f"Cholesky failed for {n}x{n} matrix up to jitter {jitters[-1]:.3g}"
    )


def psd_root(m: np.ndarray, base_jitter: float | None = None) -> np.ndarray:
    """A matrix ``A`` with ``A A^T ~= m`` for sampling from ``N(0, m)``.

    Uses the jittered Cholesky factor when it exists; otherwise falls back to
    a symmetric eigendecomposition with negative eigenvalues clipped to zero,
    which tolerates the rounding-level indefiniteness of large conditional
    covariances.
    """
    try:
        return cholesky_jittered(m, base_jitter).lower
    except FactorizationFailure:
        vals, vecs = np.linalg.eigh(0.5 * (m + m.T))
        return vecs * np.sqrt(np.clip(vals, 0.0, None))


def mvn_condition(
    joint_cov: np.ndarray,
    joint_mean: np.ndarray,
    observed_idx,
    observed_vals: np.ndarray,
    base_jitter: float | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Condition a joint Gaussian on some of its coordinates.

    Returns the mean and covariance of the coordinates *not* in
    ``observed_idx`` (in increasing index order).
    """
    joint_cov = np.asarray(joint_cov, dtype=float)
    joint_mean = np.asarray(joint_mean, dtype=float)
    obs = np.asarray(observed_idx, dtype=int)
    if obs.size == 0:
        raise ValueError("observed_idx must be nonempty")
    if len(np.unique(obs)) != obs.size:
        raise ValueError("observed_idx contains duplicates")
    rest = np.setdiff1d(np.arange(joint_cov.shape[0]), obs)
    vals = np.asarray(observed_vals, dtype=float)
    if vals.shape != obs.shape:
        raise DimensionMismatch("observed_vals must match observed_idx")

    s11 = joint_cov[np.ix_(obs, obs)]
    s21 = joint_cov[np.ix_(rest, obs)]
    s22 = joint_cov[np.ix_(rest, rest)]
    factor = cholesky_jittered(s11, base_jitter)
    mean = joint_mean[rest] + s21 @ factor.solve(vals - joint_mean[obs])
    w = factor.half_solve(s21.T)
    cov = s22 - w.T @ w
    return mean, 0.5 * (cov + cov.T)


def mvn_sample(
    mean: np.ndarray,
    cov: np.ndarray | None,
    rng: np.random.Generator,
    size: int | None = None,
    chol: CholeskyFactor | None = None,
) -> np.ndarray:
    """Draw ``mean + L @ z`` with ``z`` standard normal.

    Pass ``chol`` to reuse an existing factorization. With ``size`` the result
    has shape ``(size, dim)``.
    """
    mean = np.asarray(mean, dtype=float)
    if chol is None:
        cov = np.asarray(cov, dtype=float)
        if not np.any(cov):
            return np.array(mean, copy=True) if size is None else np.tile(mean, (size, 1))
        chol = cholesky_jittered(cov)
    dim = mean.shape[0]
    if size is None:
        return mean + chol.lower @ rng.standard_normal(dim)
    z = rng.standard_normal((size, dim))
    return mean + z @ chol.lower.T
