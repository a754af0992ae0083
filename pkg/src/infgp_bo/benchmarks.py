"""Synthetic objectives with heavy-tailed and non-stationary corruptions.

All objectives are exposed for *maximization*: the classical test functions
are minimization problems, so ``true_mean`` returns the negated
(and possibly modulated) function value.
"""

from __future__ import annotations

import csv
import functools
import io
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import randdist
from .errors import ConfigError, InvalidParameter, OutOfBounds

STANDARD_BOXES = {"ackley": (-5.0, 5.0), "rosenbrock": (-2.0, 2.0), "stybtang": (-5.0, 5.0), "quadratic": (-1.0, 1.0)}
QUADRATIC_CENTER = 0.3
GRID_POINTS = 10**6


def _rows(x) -> np.ndarray:
    return np.atleast_2d(np.asarray(x, dtype=float))


def _check_box(x: np.ndarray, name: str):
    lo, hi = STANDARD_BOXES[name]
    if np.any(x < lo - 1e-12) or np.any(x > hi + 1e-12):
        raise OutOfBounds(f"{name} is defined on [{lo}, {hi}]^d")


def ackley_raw(x: np.ndarray) -> np.ndarray:
    x = _rows(x)
    r = np.sqrt(np.mean(x * x, axis=1))
    return -20.0 * np.exp(-0.2 * r) - np.exp(np.mean(np.cos(2 * np.pi * x), axis=1)) + 20.0 + math.e


def rosenbrock_raw(x: np.ndarray) -> np.ndarray:
    x = _rows(x)
    return np.sum(100.0 * (x[:, 1:] - x[:, :-1] ** 2) ** 2 + (1.0 - x[:, :-1]) ** 2, axis=1)


def stybtang_raw(x: np.ndarray) -> np.ndarray:
    x = _rows(x)
    return 0.5 * np.sum(x**4 - 16.0 * x**2 + 5.0 * x, axis=1)


def quadratic_raw(x: np.ndarray) -> np.ndarray:
    x = _rows(x)
    return np.sum((x - QUADRATIC_CENTER) ** 2, axis=1)


RAW = {"ackley": ackley_raw, "rosenbrock": rosenbrock_raw, "stybtang": stybtang_raw, "quadratic": quadratic_raw}
KNOWN_MINIMIZERS = {
    "ackley": lambda d: np.zeros(d),
    "rosenbrock": lambda d: np.ones(d),
    "stybtang": lambda d: np.full(d, -2.903534),
    "quadratic": lambda d: np.full(d, QUADRATIC_CENTER),
}


def _scalar(name, x):
    x = np.asarray(x, dtype=float)
    _check_box(x, name)
    return float(RAW[name](x)[0])


def eval_ackley(x) -> float:
    return _scalar("ackley", x)


def eval_rosenbrock(x) -> float:
    return _scalar("rosenbrock", x)


def eval_stybtang(x) -> float:
    return _scalar("stybtang", x)


# ---------------------------------------------------------------------------
# noise


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "none"  # none | gaussian | weibull
    sd: float = 0.0
    shape: float = 0.7
    scale: float = 1.0
    centered: bool = True

    def __post_init__(self):
        if self.kind not in ("none", "gaussian", "weibull"):
            raise InvalidParameter(f"unknown noise kind {self.kind!r}")
        if self.kind == "gaussian" and self.sd < 0:
            raise InvalidParameter("gaussian sd must be nonnegative")
        if self.kind == "weibull" and not (self.shape > 0 and self.scale > 0):
            raise InvalidParameter("weibull shape and scale must be positive")


def sample_noise(model: NoiseModel, rng, size=None):
    """One draw (or ``size`` draws); Weibull draws are centered by their analytic mean."""
    if model.kind == "none" or (model.kind == "gaussian" and model.sd == 0):
        return 0.0 if size is None else np.zeros(size)
    if model.kind == "gaussian":
        return randdist.sample_normal(0.0, model.sd, rng, size)
    draw = randdist.sample_weibull(model.shape, model.scale, rng, size)
    if model.centered:
        draw = draw - randdist.weibull_mean(model.shape, model.scale)
    return draw


# ---------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class Objective:
    name: str
    base: str  # key into RAW
    d: int
    noise: NoiseModel = field(default_factory=NoiseModel)
    alpha: float = 0.0  # non-stationary modulation strength; 0 disables it

    @property
    def bounds(self) -> np.ndarray:
        lo, hi = STANDARD_BOXES[self.base]
        return np.tile([lo, hi], (self.d, 1)).astype(float)

    def true_mean(self, x) -> np.ndarray | float:
        """Expected reward; a scalar for one point, a vector for rows of points."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        rows = _rows(x)
        _check_box(rows, self.base)
        val = -RAW[self.base](rows)
        if self.alpha:
            s = rows[:, 0]
            val = (1.0 + self.alpha * np.sin(s) * np.exp(s)) * val
        return float(val[0]) if single else val

    def evaluate(self, x, rng) -> float:
        return float(self.true_mean(np.asarray(x, dtype=float))) + float(sample_noise(self.noise, rng))

    @property
    def optimum(self) -> tuple[np.ndarray, float]:
        """Maximizer and maximum of ``true_mean`` (cached)."""
        x, best, _ = _optimum(self.base, self.d, float(self.alpha))
        return np.array(x), best

    @property
    def max_value(self) -> float:
        return self.optimum[1]

    @property
    def value_range(self) -> float:
        _, best, worst = _optimum(self.base, self.d, float(self.alpha))
        return best - worst

    def regret(self, x) -> float:
        return self.max_value - float(self.true_mean(np.asarray(x, dtype=float)))


def _grid(bounds: np.ndarray, total: int) -> list[np.ndarray]:
    d = bounds.shape[0]
    per_axis = max(2, int(math.floor(total ** (1.0 / d) + 1e-9)))
    return [np.linspace(lo, hi, per_axis) for lo, hi in bounds]


@functools.lru_cache(maxsize=None)
def _optimum(base: str, d: int, alpha: float) -> tuple[tuple, float, float]:
    """Dense grid search, then L-BFGS-B and coordinate-descent refinement.

    Returns ``(argmax, max, min over the grid)``.
    """
    obj = Objective(base, base, d, alpha=alpha)
    bounds = obj.bounds
    axes = _grid(bounds, GRID_POINTS)
    best_x, best_v, worst_v = None, -math.inf, math.inf
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel() for m in mesh], axis=1)
    for start in range(0, len(pts), 200_000):
        chunk = pts[start : start + 200_000]
        v = obj.true_mean(chunk)
        i = int(np.argmax(v))
        if v[i] > best_v:
            best_v, best_x = float(v[i]), chunk[i].copy()
        worst_v = min(worst_v, float(np.min(v)))
    known = np.clip(KNOWN_MINIMIZERS[base](d), bounds[:, 0], bounds[:, 1])
    kv = obj.true_mean(known)
    if kv > best_v:
        best_x, best_v = known, float(kv)

    def neg(x):
        return -obj.true_mean(np.clip(x, bounds[:, 0], bounds[:, 1]))

    res = minimize(neg, best_x, method="L-BFGS-B", bounds=[tuple(b) for b in bounds])
    if -res.fun > best_v:
        best_x, best_v = np.clip(res.x, bounds[:, 0], bounds[:, 1]), float(-res.fun)

    spacing = np.array([a[1] - a[0] for a in axes])
    for _ in range(50):
        improved = False
        for k in range(d):
            lo = max(bounds[k, 0], best_x[k] - 2 * spacing[k])
            hi = min(bounds[k, 1], best_x[k] + 2 * spacing[k])

            def line(t, k=k):
                x = best_x.copy()
                x[k] = t
                return neg(x)

            r = minimize_scalar(line, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
            for t in (r.x, lo, hi):
                v = -line(t)
                if v > best_v + 1e-15:
                    best_x = best_x.copy()
                    best_x[k] = t
                    best_v = v
                    improved = True
        if not improved:
            break
    return tuple(best_x.tolist()), best_v, worst_v


def apply_nonstationary(base: Objective, alpha: float) -> Objective:
    """Modulate by ``1 + alpha sin(s) e^s`` with ``s`` the first coordinate."""
    if not math.isfinite(alpha):
        raise InvalidParameter("alpha must be finite")
    return replace(base, alpha=float(alpha), name=base.name if alpha == 0 else f"{base.base}_ns")


HT_SHAPE = 0.7
HT_SCALE = 1.0
NS_ALPHA = 0.1
NS_NOISE_FRACTION = 0.05
BENCHMARK_NAMES = tuple(
    f"{b}{suffix}" for b in ("ackley", "rosenbrock", "stybtang") for suffix in ("", "_ht", "_ns")
) + ("quadratic",)
SYNTHETIC_SUITE = ("ackley_ht", "ackley_ns", "rosenbrock_ht", "rosenbrock_ns", "stybtang_ht", "stybtang_ns")


def make_objective(
    name: str,
    d: int = 2,
    alpha: float = NS_ALPHA,
    weibull_shape: float = HT_SHAPE,
    weibull_scale: float = HT_SCALE,
    ns_noise_fraction: float = NS_NOISE_FRACTION,
) -> Objective:
    """Look up a benchmark by registry name (``ackley_ht``, ``stybtang_ns``, ...)."""
    base, _, variant = name.partition("_")
    if base not in RAW or variant not in ("", "ht", "ns") or (base == "quadratic" and variant):
        raise ConfigError(f"unknown benchmark {name!r}; known: {', '.join(BENCHMARK_NAMES)}", "benchmark")
    if base == "rosenbrock" and d < 2:
        raise ConfigError("rosenbrock needs d >= 2", "dim")
    obj = Objective(name, base, int(d))
    if variant == "ht":
        obj = replace(obj, noise=NoiseModel("weibull", shape=weibull_shape, scale=weibull_scale))
    elif variant == "ns":
        obj = apply_nonstationary(obj, alpha)
        obj = replace(obj, noise=NoiseModel("gaussian", sd=ns_noise_fraction * obj.value_range))
    return obj


# ---------------------------------------------------------------------------
# regret traces


@dataclass
class RegretTrace:
    """Per-evaluation record of an optimization run.

    Initial-design rows carry iterations ``-(n_init-1) .. 0``; optimizer
    iterations are numbered from 1.
    """

    d: int
    iters: list = field(default_factory=list)
    X: list = field(default_factory=list)
    y: list = field(default_factory=list)
    r: list = field(default_factory=list)
    R_cum: list = field(default_factory=list)
    K_n: list = field(default_factory=list)
    wall_ms: list = field(default_factory=list)
    weight_checkpoints: list = field(default_factory=list)  # (iteration, weights)
    failure: str | None = None

    def add(self, it: int, x, y: float, r: float, k_n: int = 0, wall_ms: float = 0.0) -> None:
        prev = self.R_cum[-1] if self.R_cum else 0.0
        self.iters.append(int(it))
        self.X.append(np.asarray(x, dtype=float).copy())
        self.y.append(float(y))
        self.r.append(float(r))
        self.R_cum.append(prev + float(r))
        self.K_n.append(int(k_n))
        self.wall_ms.append(float(wall_ms))

    def __len__(self):
        return len(self.iters)

    def header(self) -> list[str]:
        return ["iter"] + [f"x{k + 1}" for k in range(self.d)] + ["y", "r", "R_cum", "K_n", "wall_ms"]

    def to_csv(self, path=None, timing: bool = True) -> str:
        """Serialize with ``repr`` floats; ``timing=False`` writes ``wall_ms`` as 0 for reproducible files."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header())
        for i in range(len(self)):
            w.writerow(
                [self.iters[i]]
                + [repr(float(v)) for v in self.X[i]]
                + [repr(self.y[i]), repr(self.r[i]), repr(self.R_cum[i]), self.K_n[i], repr(self.wall_ms[i] if timing else 0.0)]
            )
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, path_or_text) -> "RegretTrace":
        if "\n" in str(path_or_text):
            text = str(path_or_text)
        else:
            with open(path_or_text) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], rows[1:]
        d = len(header) - 6
        tr = cls(d)
        for row in body:
            tr.iters.append(int(row[0]))
            tr.X.append(np.array([float(v) for v in row[1 : 1 + d]]))
            tr.y.append(float(row[1 + d]))
            tr.r.append(float(row[2 + d]))
            tr.R_cum.append(float(row[3 + d]))
            tr.K_n.append(int(row[4 + d]))
            tr.wall_ms.append(float(row[5 + d]))
        return tr

    def cumulative_from_instantaneous(self) -> np.ndarray:
        out, acc = [], 0.0
        for v in self.r:
            acc += v
            out.append(acc)
        return np.array(out)
