import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import gamma as gamma_fn

from infgp_bo.benchmarks import (
    BENCHMARK_NAMES,
    SYNTHETIC_SUITE,
    NoiseModel,
    Objective,
    RegretTrace,
    apply_nonstationary,
    eval_ackley,
    eval_rosenbrock,
    eval_stybtang,
    make_objective,
    sample_noise,
)
from infgp_bo.errors import ConfigError, InvalidParameter, OutOfBounds


def test_ackley_minimum():
    assert eval_ackley(np.zeros(3)) == pytest.approx(0.0, abs=1e-12)


def test_ackley_dense_grid_minimum():
    xs = np.linspace(-5, 5, 100_001)
    vals = [eval_ackley(np.array([x])) for x in xs[::100]]
    assert xs[::100][int(np.argmin(vals))] == pytest.approx(0.0, abs=1e-9)


def test_rosenbrock_minimum():
    assert eval_rosenbrock(np.ones(4)) == 0.0


def test_stybtang_minimum_by_grid():
    g = np.linspace(-5, 5, 2001)
    per_axis = 0.5 * (g**4 - 16 * g**2 + 5 * g)
    grid_min = 2 * per_axis.min()
    assert eval_stybtang(np.full(2, -2.903534)) == pytest.approx(-78.332, abs=1e-3)
    assert eval_stybtang(np.full(2, -2.903534)) <= grid_min + 1e-6


@pytest.mark.parametrize("fn,x", [(eval_ackley, [5.5, 0.0]), (eval_rosenbrock, [0.0, -2.1]), (eval_stybtang, [-6.0, 1.0])])
def test_out_of_box(fn, x):
    with pytest.raises(OutOfBounds):
        fn(np.array(x))


def test_objective_maximizes_negated_function():
    obj = make_objective("ackley", d=2)
    assert obj.true_mean(np.zeros(2)) == pytest.approx(0.0, abs=1e-12)
    assert obj.true_mean(np.array([1.0, 1.0])) == pytest.approx(-eval_ackley(np.array([1.0, 1.0])))


def test_nonstationary_identity_at_zero_alpha(rng):
    base = make_objective("stybtang", d=2)
    same = apply_nonstationary(base, 0.0)
    x = rng.uniform(-5, 5, (50, 2))
    np.testing.assert_array_equal(same.true_mean(x), base.true_mean(x))


def test_nonstationary_factor(rng):
    base = make_objective("ackley", d=2)
    ns = apply_nonstationary(base, 0.1)
    x = rng.uniform(-5, 5, (20, 2))
    factor = 1 + 0.1 * np.sin(x[:, 0]) * np.exp(x[:, 0])
    np.testing.assert_allclose(ns.true_mean(x), factor * base.true_mean(x), rtol=1e-13)
    assert ns.true_mean(np.array([0.0, 2.0])) == pytest.approx(base.true_mean(np.array([0.0, 2.0])))


def test_nonstationary_rejects_nonfinite():
    with pytest.raises(InvalidParameter):
        apply_nonstationary(make_objective("ackley"), math.nan)


def test_ackley_ns_1d_optimum_matches_grid():
    obj = make_objective("ackley_ns", d=1)
    xs = np.linspace(-5, 5, 10**6)
    vals = obj.true_mean(xs[:, None])
    i = int(np.argmax(vals))
    x_star, best = obj.optimum
    assert abs(x_star[0] - xs[i]) <= xs[1] - xs[0]
    assert best >= vals[i] - 1e-12


@pytest.mark.parametrize("name", BENCHMARK_NAMES)
def test_cached_optimum_dominates_random_points(name, rng):
    d = 2
    obj = make_objective(name, d=d)
    lo, hi = obj.bounds[:, 0], obj.bounds[:, 1]
    x = rng.uniform(lo, hi, (100_000, d))
    assert obj.max_value >= np.max(obj.true_mean(x)) - 1e-9
    assert obj.value_range > 0


def test_registry():
    assert set(SYNTHETIC_SUITE) <= set(BENCHMARK_NAMES)
    ht = make_objective("rosenbrock_ht", d=3)
    assert ht.noise.kind == "weibull" and ht.noise.shape == 0.7 and ht.noise.scale == 1.0 and ht.alpha == 0
    ns = make_objective("stybtang_ns", d=2)
    assert ns.alpha == 0.1 and ns.noise.kind == "gaussian"
    assert ns.noise.sd == pytest.approx(0.05 * ns.value_range)
    with pytest.raises(ConfigError):
        make_objective("branin")
    with pytest.raises(ConfigError):
        make_objective("rosenbrock", d=1)


# ---------------------------------------------------------------------------
# noise


def test_centered_weibull_mean(rng):
    draws = sample_noise(NoiseModel("weibull", shape=1.0, scale=1.0), rng, 100_000)
    assert abs(draws.mean()) < 3 * draws.std(ddof=1) / math.sqrt(len(draws))


def test_weibull_variance(rng):
    shape, scale, n = 0.8, 1.5, 100_000
    draws = sample_noise(NoiseModel("weibull", shape=shape, scale=scale), rng, n)
    var = scale**2 * (gamma_fn(1 + 2 / shape) - gamma_fn(1 + 1 / shape) ** 2)
    # SE of the sample variance from the fourth central moment
    m4 = np.mean((draws - draws.mean()) ** 4)
    se = math.sqrt((m4 - var**2) / n)
    assert abs(draws.var(ddof=1) - var) < 4 * se


def test_zero_sd_gaussian_is_silent(rng):
    m = NoiseModel("gaussian", sd=0.0)
    assert all(sample_noise(m, rng) == 0.0 for _ in range(10))


@pytest.mark.parametrize("kw", [dict(kind="cauchy"), dict(kind="gaussian", sd=-1.0), dict(kind="weibull", shape=0.0)])
def test_noise_model_rejects(kw):
    with pytest.raises(InvalidParameter):
        NoiseModel(**kw)


def test_evaluate_adds_noise(rng):
    obj = Objective("q", "quadratic", 1, noise=NoiseModel("gaussian", sd=0.5))
    ys = np.array([obj.evaluate(np.array([0.3]), rng) for _ in range(4000)])
    assert abs(ys.mean()) < 4 * 0.5 / math.sqrt(len(ys))


# ---------------------------------------------------------------------------
# regret traces


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 1e6, allow_nan=False), min_size=1, max_size=40))
def test_trace_cumulative_is_exact(rs):
    tr = RegretTrace(1)
    for i, r in enumerate(rs):
        tr.add(i, [0.0], 0.0, r)
    assert tr.R_cum == list(tr.cumulative_from_instantaneous())
    assert tr.R_cum == list(RegretTrace.from_csv(tr.to_csv()).R_cum)


def test_trace_csv_roundtrip(rng):
    tr = RegretTrace(2)
    for i in range(-2, 4):
        tr.add(i, rng.uniform(size=2), float(rng.standard_normal()), float(rng.uniform()), i % 3, 12.5)
    text = tr.to_csv()
    assert text.splitlines()[0] == "iter,x1,x2,y,r,R_cum,K_n,wall_ms"
    back = RegretTrace.from_csv(text)
    assert back.to_csv() == text
    assert all(row.endswith(",0.0") for row in tr.to_csv(timing=False).splitlines()[1:])


def test_trace_regret_nonnegative_for_objective(rng):
    obj = make_objective("ackley_ns", d=2)
    x = rng.uniform(-5, 5, (1000, 2))
    assert min(obj.regret(xi) for xi in x) >= -1e-12
