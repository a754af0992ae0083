import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate
from scipy.stats import norm

from infgp_bo import gp
from infgp_bo.errors import DimensionMismatch
from infgp_bo.history import ObservationHistory
from infgp_bo.linalg import mvn_condition


def test_kernel_zero_distance():
    kp = gp.KernelParams(2.5, [3.0, 1.0])
    x = np.array([[0.1, 0.2]])
    assert gp.kernel_matrix(x, x, kp)[0, 0] == 2.5


def test_kernel_unit_distance():
    kp = gp.KernelParams(1.0, [1.0])
    k = gp.kernel_matrix(np.array([[0.0]]), np.array([[1.0]]), kp)
    assert k[0, 0] == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_kernel_matches_scalar_loop(rng):
    kp = gp.KernelParams(1.3, [0.5, 2.0, 1.1])
    a, b = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    k = gp.kernel_matrix(a, b, kp)
    for i in range(3):
        for j in range(3):
            ref = 1.3 * math.exp(-sum(kp.phi[q] * (a[i, q] - b[j, q]) ** 2 for q in range(3)))
            assert abs(k[i, j] - ref) < 1e-14


def test_kernel_symmetric(rng):
    kp = gp.KernelParams(4.0, [0.7, 3.0])
    a = rng.uniform(-1, 1, (20, 2))
    k = gp.kernel_matrix(a, a, kp)
    assert np.max(np.abs(k - k.T)) <= 1e-12 * np.max(np.abs(k))


def test_kernel_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        gp.kernel_matrix(np.zeros((2, 2)), np.zeros((2, 3)), gp.KernelParams(1.0, [1.0]))


def test_kernel_params_validation():
    with pytest.raises(ValueError):
        gp.KernelParams(0.0, [1.0])
    with pytest.raises(ValueError):
        gp.KernelParams(1.0, [2.0], b_phi=1.0)


def test_kriging_interpolates():
    kp = gp.KernelParams(1.0, [2.0])
    train = np.array([[0.0], [0.5], [1.0]])
    vals = np.array([0.3, -1.0, 2.0])
    mean, cov = gp.kriging(vals, train, train[1:2], kp)
    assert abs(mean[0] + 1.0) < 1e-6
    assert cov[0, 0] <= 1e-6


def test_kriging_far_query_is_prior():
    kp = gp.KernelParams(2.0, [50.0])
    mean, cov = gp.kriging(np.array([1.0, 2.0]), np.array([[0.0], [0.1]]), np.array([[10.0]]), kp)
    assert abs(mean[0]) < 1e-10
    assert abs(cov[0, 0] - 2.0) < 1e-10


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_kriging_matches_joint_conditioning(seed):
    r = np.random.default_rng(seed)
    n, m, d = 5, 3, 2
    kp = gp.KernelParams(r.uniform(0.5, 2), r.uniform(0.2, 3, d))
    train, query = r.uniform(-1, 1, (n, d)), r.uniform(-1, 1, (m, d))
    vals = r.standard_normal(n)
    mean, cov = gp.kriging(vals, train, query, kp)
    joint = gp.kernel_matrix(np.vstack([train, query]), np.vstack([train, query]), kp)
    om, oc = mvn_condition(joint, np.zeros(n + m), np.arange(n), vals)
    np.testing.assert_allclose(mean, om, atol=1e-8)
    np.testing.assert_allclose(cov, oc, atol=1e-8)
    # pointwise variance formula on the diagonal
    k_star = gp.kernel_matrix(train, query, kp)
    k_inv = np.linalg.inv(gp.kernel_matrix(train, train, kp))
    pointwise = kp.sigma2 - np.einsum("im,ij,jm->m", k_star, k_inv, k_star)
    np.testing.assert_allclose(np.diag(cov), pointwise, atol=1e-10)


def test_kriging_table_rows_share_covariance(rng):
    kp = gp.KernelParams(1.0, [1.0])
    train, query = rng.uniform(0, 1, (4, 1)), rng.uniform(0, 1, (3, 1))
    table = rng.standard_normal((3, 4))
    means, cov = gp.kriging(table, train, query, kp)
    for l in range(3):
        m1, c1 = gp.kriging(table[l], train, query, kp)
        np.testing.assert_allclose(means[l], m1, atol=1e-12)
        np.testing.assert_allclose(cov, c1, atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**31 - 1))
def test_variance_monotone_in_training_set(seed):
    r = np.random.default_rng(seed)
    kp = gp.KernelParams(1.0, r.uniform(0.5, 4, 2))
    train = r.uniform(-1, 1, (6, 2))
    query = r.uniform(-1, 1, (4, 2))
    _, c_small = gp.kriging(np.zeros(5), train[:5], query, kp)
    _, c_big = gp.kriging(np.zeros(6), train, query, kp)
    assert np.all(np.diag(c_big) <= np.diag(c_small) + 1e-8)


def _gp_data(seed, n=40, sigma2=1.0, phi=5.0, tau2=0.01):
    r = np.random.default_rng(seed)
    X = r.uniform(0, 1, (n, 1))
    k = gp.kernel_matrix(X, X, gp.KernelParams(sigma2, [phi])) + tau2 * np.eye(n)
    y = np.linalg.cholesky(k) @ r.standard_normal(n)
    return ObservationHistory(np.array([[0.0, 1.0]]), X, y)


def test_baseline_recovers_sigma2():
    h = _gp_data(3)
    priors = gp.BaselinePriors(b_phi=gp.b_phi_from_bounds(h.bounds))
    post = gp.baseline_gp_fit(h, priors, np.random.default_rng(0), iters=2000, burn_in=1000)
    # hyperparameters are in standardized units; map sigma2 back to the data scale
    sigma2 = post.hypers.sigma2 * post.y_scale**2
    assert abs(math.log(sigma2) - math.log(1.0)) <= 1.0
    assert 0 < post.acceptance_rate < 1


def test_baseline_identical_rewards_shrink_noise():
    h = ObservationHistory(np.array([[0.0, 1.0]]), np.array([[0.2], [0.7]]), np.array([1.0, 1.0]))
    priors = gp.BaselinePriors(b_phi=300.0)
    post = gp.baseline_gp_fit(h, priors, np.random.default_rng(1), iters=4000, burn_in=1000)
    assert post.hypers.tau2 < priors.b_tau / (priors.a_tau - 1)


def test_baseline_deterministic():
    h = _gp_data(4, n=10)
    priors = gp.BaselinePriors(b_phi=300.0)
    a = gp.baseline_gp_fit(h, priors, np.random.default_rng(9))
    b = gp.baseline_gp_fit(h, priors, np.random.default_rng(9))
    assert a.hypers.sigma2 == b.hypers.sigma2 and np.array_equal(a.hypers.phi, b.hypers.phi)


def test_baseline_posterior_variance_bounded(rng):
    h = _gp_data(5, n=15)
    post = gp.baseline_gp_fit(h, gp.BaselinePriors(b_phi=300.0), rng)
    _, var = post.predict(rng.uniform(0, 1, (50, 1)))
    cap = (post.kernel.sigma2 + post.chol.jitter_used) * post.y_scale**2
    assert np.all(var >= 0) and np.all(var <= cap * (1 + 1e-9))


def test_ei_closed_form():
    assert gp.expected_improvement(np.array([2.0]), np.array([0.0]), 2.0)[0] == 0.0
    ref, _ = integrate.quad(lambda t: max(t, 0.0) * norm.pdf(t - 1.0), -15, 15, epsabs=1e-12)
    val = gp.expected_improvement(np.array([1.0]), np.array([1.0]), 0.0)[0]
    assert abs(val - ref) < 1e-8
    assert abs(val - 1.08332) < 1e-5


@settings(max_examples=50, deadline=None)
@given(
    mu=st.floats(-50, 50), s=st.floats(0, 20), best=st.floats(-50, 50),
)
def test_ei_nonnegative(mu, s, best):
    assert gp.expected_improvement(np.array([mu]), np.array([s]), best)[0] >= 0


class _FixedPosterior:
    """Stand-in with prescribed predictive moments."""

    def __init__(self, mu, var):
        self.mu, self.var, self.n = np.asarray(mu, float), np.asarray(var, float), 5

    def predict(self, q, full_cov=False):
        return (self.mu, np.diag(self.var)) if full_cov else (self.mu, self.var)


def test_ucb_prefers_variance_at_equal_means():
    post = _FixedPosterior([1.0, 1.0, 1.0], [0.1, 0.9, 0.4])
    assert gp.acquire_ucb(post, np.zeros((3, 1)), 0.0) == 1
    assert gp.ucb_beta(10, 5) == pytest.approx(2 * math.log(10 * 25 * math.pi**2 / 6 / 0.1))


def test_ts_single_candidate_and_ties():
    h = _gp_data(6, n=8)
    post = gp.baseline_gp_fit(h, gp.BaselinePriors(b_phi=300.0), np.random.default_rng(0))
    assert gp.acquire_gp_ts(post, np.array([[0.4]]), 0.0, np.random.default_rng(1)) == 0
    tie = _FixedPosterior([1.0, 1.0], [0.0, 0.0])
    assert gp.acquire_ei(tie, np.zeros((2, 1)), 2.0) == 0
