"""Seeded random streams, samplers and the Gaussian log-density.

Parameter conventions used everywhere in the package:

* ``Gamma(shape, rate)``: density proportional to ``x**(shape-1) * exp(-rate*x)``,
  mean ``shape / rate``.
* ``InvGamma(shape, scale)``: density proportional to
  ``x**(-shape-1) * exp(-scale/x)``, mean ``scale / (shape - 1)``.
  Sampled as ``1 / Gamma(shape, rate=scale)``.

Streams are numpy ``Generator`` objects seeded from a ``SeedSequence``.
:func:`fork` derives a child stream from a root seed and a tuple of integer
keys (replication, iteration, phase, ...); distinct keys give independent
streams and the same keys always give the same stream.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import DegenerateWeights, InvalidParameter

LOG_2PI = math.log(2.0 * math.pi)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def fork(seed: int, *keys: int) -> np.random.Generator:
    """Independent child stream of ``seed`` addressed by ``keys``."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in keys))
    return np.random.default_rng(ss)


def _positive(name, value):
    if not np.all(np.asarray(value) > 0):
        raise InvalidParameter(f"{name} must be strictly positive, got {value}")


def sample_normal(mean, sd, rng, size=None):
    if np.any(np.asarray(sd) < 0):
        raise InvalidParameter(f"sd must be nonnegative, got {sd}")
    return rng.normal(mean, sd, size)


def sample_uniform(low, high, rng, size=None):
    return rng.uniform(low, high, size)


def sample_beta(a, b, rng, size=None):
    _positive("beta a", a)
    _positive("beta b", b)
    return rng.beta(a, b, size)


def sample_log_gamma(shape, rng, size=None):
    """``log G`` for ``G ~ Gamma(shape, 1)``, accurate when ``G`` underflows (tiny shapes).

    For ``shape < 1`` uses ``G = G' U^{1/shape}`` with ``G' ~ Gamma(shape + 1)``.
    """
    shape = np.asarray(shape, dtype=float)
    if np.any(shape <= 0):
        raise InvalidParameter("log-gamma shape must be positive")
    small = shape < 1.0
    boosted = np.where(small, shape + 1.0, shape)
    out = np.log(rng.gamma(boosted, 1.0, size))
    return out + np.where(small, np.log(rng.random(np.shape(out))) / shape, 0.0)


def sample_log_beta(a, b, rng, size=None):
    """``(log V, log(1 - V))`` for ``V ~ Beta(a, b)``, both finite even when V rounds to 0 or 1."""
    a, b = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if size is None and a.ndim:
        size = a.shape
    la = sample_log_gamma(a, rng, size)
    lb = sample_log_gamma(b, rng, size)
    total = np.logaddexp(la, lb)
    return la - total, lb - total


def sample_gamma(shape, rate, rng, size=None):
    # numpy's sampler is Marsaglia-Tsang with the shape+1 boost for shape < 1
    _positive("gamma shape", shape)
    _positive("gamma rate", rate)
    return rng.gamma(shape, 1.0 / np.asarray(rate, dtype=float), size)


def sample_inverse_gamma(shape, scale, rng, size=None):
    _positive("inverse-gamma shape", shape)
    _positive("inverse-gamma scale", scale)
    return 1.0 / rng.gamma(shape, 1.0 / np.asarray(scale, dtype=float), size)


def sample_weibull(shape, scale, rng, size=None):
    _positive("weibull shape", shape)
    _positive("weibull scale", scale)
    return scale * rng.weibull(shape, size)


def sample_categorical(weights, rng) -> int:
    """Index drawn with probability proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise InvalidParameter("categorical weights must be finite and nonnegative")
    total = w.sum()
    if total <= 0:
        raise DegenerateWeights("all categorical weights are zero")
    cdf = np.cumsum(w)
    # side="right" skips zero-weight entries: the first cdf value exceeding u
    return int(np.searchsorted(cdf, rng.random() * cdf[-1], side="right"))


def sample_categorical_logits(logits: np.ndarray, rng) -> np.ndarray:
    """One categorical draw per row of unnormalized log-probabilities.

    Rows are normalized with log-sum-exp so that extreme logits cannot
    underflow to an all-zero row.
    """
    logits = np.atleast_2d(np.asarray(logits, dtype=float))
    top = np.max(logits, axis=1, keepdims=True)
    if not np.all(np.isfinite(top)):
        raise DegenerateWeights("a row of categorical logits has no finite entry")
    p = np.exp(logits - top)
    cdf = np.cumsum(p, axis=1)
    u = rng.random(logits.shape[0])[:, None] * cdf[:, -1:]
    idx = np.sum(cdf <= u, axis=1)
    idx = np.minimum(idx, logits.shape[1] - 1)
    # cdf <= u can step past the last positive entry only through rounding
    bad = p[np.arange(len(idx)), idx] == 0
    if np.any(bad):
        for r in np.flatnonzero(bad):
            idx[r] = int(np.flatnonzero(p[r] > 0)[-1])
    return idx


def logpdf_normal(y, mean, var):
    """Exact Gaussian log-density ``log N(y; mean, var)``."""
    var = np.asarray(var, dtype=float)
    if np.any(var <= 0):
        raise InvalidParameter(f"variance must be positive, got {var}")
    r = np.asarray(y, dtype=float) - mean
    return -0.5 * (LOG_2PI + np.log(var) + r * r / var)


def weibull_mean(shape, scale):
    return scale * math.gamma(1.0 + 1.0 / shape)


def weibull_variance(shape, scale):
    return scale**2 * (math.gamma(1.0 + 2.0 / shape) - math.gamma(1.0 + 1.0 / shape) ** 2)
