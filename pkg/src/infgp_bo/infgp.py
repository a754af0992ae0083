"""The infinite-GP surrogate: model state and its truncated blocked Gibbs sampler.

Rewards follow ``y_i = x_i^T beta + xi^{(z_i)}(x_i) + eps_i`` with
``eps_i ~ N(0, tau2)``. Each surface ``xi^{(l)}`` is a draw from
``GP(0, sigma2 * rho_phi)`` and the surface weights come from a stick-breaking
prior with concentration ``nu``, truncated at ``L`` surfaces.

Surface labels are 0-based here (``0 .. L-1``).

A sweep runs four steps: (1) surfaces given labels, (2) stick weights
given counts, (3) labels given surfaces and weights, (4) hyperparameters:
weights again then ``nu``, ``beta``, ``tau2``, ``sigma2`` and ``phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.special import gammaln

from . import randdist
from .errors import InvalidParameter
from .gp import KernelParams, b_phi_from_bounds, kriging, sq_diffs
from .history import ObservationHistory
from .linalg import CholeskyFactor, cholesky_jittered

LOG_W_L_FLOOR = math.log(1e-300)
PHI_MODES = ("isotropic_grid", "anisotropic_mle")


@dataclass(frozen=True)
class PriorSpec:
    """Hyperpriors; all variance quantities refer to standardized rewards.

    ``beta ~ N(beta0, sigma_beta)``, ``tau2 ~ InvGamma(a_tau, b_tau)``,
    ``sigma2 ~ InvGamma(a_sigma, b_sigma)``, ``nu ~ Gamma(a_nu, rate=b_nu)``,
    ``phi_k ~ U(0, b_phi]`` (a discrete uniform grid in isotropic mode).
    """

    beta0: np.ndarray
    sigma_beta: np.ndarray
    b_phi: float
    a_tau: float = 2.0
    b_tau: float = 1.0
    a_sigma: float = 2.0
    b_sigma: float = 1.0
    a_nu: float = 1.0
    b_nu: float = 1.0
    phi_grid_size: int = 30
    phi_grid_ratio: float = 1e-3

    @classmethod
    def default(cls, bounds, **overrides) -> "PriorSpec":
        bounds = np.atleast_2d(np.asarray(bounds, dtype=float))
        d = bounds.shape[0]
        kw = dict(beta0=np.zeros(d), sigma_beta=100.0 * np.eye(d), b_phi=b_phi_from_bounds(bounds))
        kw.update(overrides)
        return cls(**kw)

    def __post_init__(self):
        for name in ("a_tau", "b_tau", "a_sigma", "b_sigma", "a_nu", "b_nu", "b_phi"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive")
        if self.phi_grid_size < 1:
            raise InvalidParameter("phi_grid_size must be at least 1")

    @property
    def d(self) -> int:
        return len(self.beta0)

    def phi_grid(self) -> np.ndarray:
        """Log-spaced grid over ``[b_phi * phi_grid_ratio, b_phi]``."""
        if self.phi_grid_size == 1:
            return np.array([self.b_phi])
        return np.geomspace(self.b_phi * self.phi_grid_ratio, self.b_phi, self.phi_grid_size)

    def prior_means(self) -> tuple[float, float, float]:
        """Prior means of (tau2, sigma2, nu)."""

        def ig_mean(a, b):
            return b / (a - 1.0) if a > 1 else b / a

        return ig_mean(self.a_tau, self.b_tau), ig_mean(self.a_sigma, self.b_sigma), self.a_nu / self.b_nu


@dataclass
class HyperParams:
    beta: np.ndarray
    tau2: float
    nu: float
    sigma2: float
    phi: np.ndarray

    def copy(self) -> "HyperParams":
        return replace(self, beta=self.beta.copy(), phi=self.phi.copy())


@dataclass
class SurfaceTable:
    values: np.ndarray  # (L, n)
    assignments: np.ndarray  # (n,) ints in 0..L-1
    weights: np.ndarray  # (L,)
    counts: np.ndarray = None  # (L,)

    def __post_init__(self):
        self.assignments = np.asarray(self.assignments, dtype=int)
        if self.counts is None:
            self.counts = np.bincount(self.assignments, minlength=self.L)

    @property
    def L(self) -> int:
        return self.values.shape[0]

    @property
    def n(self) -> int:
        return self.values.shape[1]

    @property
    def n_occupied(self) -> int:
        return int(np.count_nonzero(self.counts))

    def copy(self) -> "SurfaceTable":
        return SurfaceTable(
            self.values.copy(), self.assignments.copy(), self.weights.copy(), self.counts.copy()
        )

    def check(self) -> None:
        """Raise AssertionError if the table violates its invariants."""
        w = self.weights
        assert w.shape == (self.L,)
        assert np.all(w >= 0) and np.all(w <= 1)
        assert abs(w.sum() - 1.0) <= 1e-12
        assert self.assignments.shape == (self.n,)
        assert np.array_equal(self.counts, np.bincount(self.assignments, minlength=self.L))
        assert self.n_occupied <= min(self.L, self.n)


@dataclass(frozen=True)
class GibbsConfig:
    B: int = 500
    L_max: int = 16
    L: int | None = None  # fixed truncation level; None applies the growth rule
    kappa: float | None = None  # None means kappa = current nu estimate
    warm_start: bool = True
    phi_mode: str = "isotropic_grid"
    mle_steps: int = 100
    mle_step_size: float = 1e-2
    collapsed_moves: int = 3  # Metropolis rounds per sweep on the surface-marginal; 0 disables

    def __post_init__(self):
        if self.collapsed_moves < 0:
            raise InvalidParameter("collapsed_moves must be nonnegative")
        if self.B < 1:
            raise InvalidParameter("B must be at least 1")
        if self.L is not None and self.L < 2:
            raise InvalidParameter("L must be at least 2")
        if self.L_max < 2:
            raise InvalidParameter("L_max must be at least 2")
        if self.phi_mode not in PHI_MODES:
            raise InvalidParameter(f"phi_mode must be one of {PHI_MODES}")


class DataCache:
    """Quantities that depend only on the inputs and priors, reused across sweeps.

    In isotropic mode the jittered correlation matrix and its Cholesky factor
    are precomputed for every grid value of phi.
    """

    def __init__(self, X: np.ndarray, priors: PriorSpec, phi_mode: str = "isotropic_grid"):
        self.X = np.atleast_2d(np.asarray(X, dtype=float)).reshape(-1, priors.d)
        self.n = self.X.shape[0]
        self.d2 = sq_diffs(self.X, self.X)
        self.dist2 = self.d2.sum(axis=2)
        self.grid = priors.phi_grid()
        self.phi_mode = phi_mode
        self._grid_rho = None
        self._grid_chol = None
        self._grid_inv_lower = None
        self._grid_logdet = None

    def _build_grid(self):
        n, M = self.n, len(self.grid)
        rhos, chols = [], []
        inv_lower = np.empty((M, n, n))
        logdet = np.empty(M)
        eye = np.eye(n)
        for m, phi in enumerate(self.grid):
            rho = np.exp(-phi * self.dist2)
            chol = cholesky_jittered(rho)
            rhos.append(rho + chol.jitter_used * eye)
            chols.append(chol)
            inv_lower[m] = chol.half_solve(eye) if n else eye
            logdet[m] = chol.logdet()
        self._grid_rho, self._grid_chol = rhos, chols
        self._grid_inv_lower, self._grid_logdet = inv_lower, logdet

    def grid_factor(self, m: int) -> tuple[np.ndarray, CholeskyFactor]:
        if self._grid_chol is None:
            self._build_grid()
        return self._grid_rho[m], self._grid_chol[m]

    def grid_quadratics(self, values: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """``(logdet rho_m, sum_l xi_l^T rho_m^{-1} xi_l)`` for every grid point."""
        if self._grid_chol is None:
            self._build_grid()
        w = self._grid_inv_lower @ values.T  # (M, n, L)
        return self._grid_logdet, np.einsum("mnl,mnl->m", w, w)

    def factor_for(self, phi: np.ndarray) -> tuple[np.ndarray, CholeskyFactor]:
        rho = np.exp(-(self.d2 @ np.broadcast_to(phi, (self.d2.shape[2],))))
        chol = cholesky_jittered(rho)
        return rho + chol.jitter_used * np.eye(self.n), chol


@dataclass
class GibbsState:
    """One joint state ``(Theta, surface table, labels)`` of the sampler.

    ``rho`` is the jittered correlation matrix over the training inputs at the
    current ``phi`` and ``rho_chol`` its factor, so that
    ``Sigma0 = sigma2 * rho`` and ``chol(Sigma0) = rho_chol.scaled(sigma2)``.
    """

    hp: HyperParams
    table: SurfaceTable
    X: np.ndarray
    rho: np.ndarray
    rho_chol: CholeskyFactor
    phi_index: int | None = None
    b_phi: float = math.inf
    sweeps: int = field(default=0, compare=False)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def L(self) -> int:
        return self.table.L

    @property
    def kernel(self) -> KernelParams:
        return KernelParams(self.hp.sigma2, self.hp.phi, self.b_phi)

    def sigma0_chol(self) -> CholeskyFactor:
        return self.rho_chol.scaled(self.hp.sigma2)

    def copy(self) -> "GibbsState":
        return replace(self, hp=self.hp.copy(), table=self.table.copy())


# ---------------------------------------------------------------------------
# stick breaking and the surface-count law


def stick_breaking(v: np.ndarray) -> np.ndarray:
    """Weights ``w_1 = v_1``, ``w_l = v_l prod_{r<l}(1 - v_r)``; the last weight closes the stick.

    The closing weight is computed as the remaining stick length
    ``prod_{r<L}(1 - v_r)``, which equals ``1 - sum_{l<L} w_l`` but keeps
    full relative precision when it is tiny.
    """
    v = np.asarray(v, dtype=float)
    remaining = np.concatenate([[1.0], np.cumprod(1.0 - v)])
    w = np.empty(len(v) + 1)
    w[:-1] = v * remaining[:-1]
    w[-1] = remaining[-1]
    w = np.clip(w, 0.0, 1.0)
    return w / w.sum()


def expected_surface_count(nu: float, n: int) -> float:
    """Exact ``E[K_n] = sum_{i=1}^n nu / (nu + i - 1)``."""
    if not nu > 0 or n < 1:
        raise InvalidParameter("need nu > 0 and n >= 1")
    earlier = np.arange(n, dtype=float)  # i - 1 for i = 1..n
    return float(np.sum(nu / (nu + earlier)))


def simulate_urn_surface_counts(nu: float, n: int, n_sims: int, rng) -> np.ndarray:
    """Number of distinct surfaces after ``n`` Polya-urn assignments, per simulation.

    Observation ``i`` opens a new surface with probability ``nu/(nu+i-1)``;
    otherwise it joins the surface of a uniformly chosen earlier observation,
    which reuses surface ``j`` with probability ``n_j/(nu+i-1)``.
    """
    labels = np.zeros((n_sims, n), dtype=np.int64)
    k = np.ones(n_sims, dtype=np.int64)
    rows = np.arange(n_sims)
    for i in range(1, n):
        new = rng.random(n_sims) < nu / (nu + i)
        earlier = rng.integers(0, i, n_sims)
        labels[:, i] = np.where(new, k, labels[rows, earlier])
        k += new
    return k


def truncation_level(nu_hat: float, n: int, kappa: float | None = None, L_max: int = 16) -> int:
    """``min(L_max, max(2, ceil((nu + kappa) log n) + 1))`` with ``kappa = nu`` by default."""
    if n < 1:
        raise InvalidParameter("n must be at least 1")
    if kappa is None:
        kappa = nu_hat
    raw = math.ceil((nu_hat + kappa) * math.log(n)) + 1
    return int(min(L_max, max(2, raw)))


# ---------------------------------------------------------------------------
# Gibbs steps


def _residuals(state: GibbsState, y: np.ndarray) -> np.ndarray:
    return y - state.X @ state.hp.beta


def gibbs_step_surfaces(state: GibbsState, h: ObservationHistory, rng) -> np.ndarray:
    """Draw every surface row jointly from its Gaussian full conditional.

    For surface ``l`` with assigned set ``S`` the conditional is
    ``N(Lambda I_l r / tau2, Lambda)`` with ``Lambda = (Sigma0^{-1} + I_l/tau2)^{-1}``
    and ``r = y - X beta``. It is sampled exactly by drawing a prior path
    ``f ~ N(0, Sigma0)`` and correcting it through the points in ``S``:
    ``xi = f + Sigma0[:, S] (Sigma0[S, S] + tau2 I)^{-1} (r_S - f_S - e)``
    with ``e ~ N(0, tau2 I)``. Empty surfaces keep their prior draw.
    """
    n, L = state.n, state.L
    if n == 0:
        return np.zeros((L, 0))
    hp = state.hp
    sigma = math.sqrt(hp.sigma2)
    prior = sigma * (state.rho_chol.lower @ rng.standard_normal((n, L)))  # (n, L)
    values = prior.T.copy()
    resid = _residuals(state, h.y)
    noise = math.sqrt(hp.tau2) * rng.standard_normal(n)
    z = state.table.assignments
    for l in np.flatnonzero(state.table.counts):
        s = np.flatnonzero(z == l)
        k_ss = hp.sigma2 * state.rho[np.ix_(s, s)]
        k_ss[np.diag_indices_from(k_ss)] += hp.tau2
        c = cho_factor(k_ss, lower=True, check_finite=False)
        gap = resid[s] - values[l, s] - noise[s]
        values[l] += hp.sigma2 * (state.rho[:, s] @ cho_solve(c, gap, check_finite=False))
    return values


def _tail_counts(counts: np.ndarray) -> np.ndarray:
    """``sum_{j > l} counts[j]`` for each l."""
    return np.concatenate([np.cumsum(counts[::-1])[::-1][1:], [0]])


def sample_log_weights(state: GibbsState, rng) -> np.ndarray:
    """Log of the stick-breaking weights drawn in :func:`gibbs_step_weights`.

    Sticks are sampled as ``(log V_l, log(1 - V_l))`` pairs so the remaining
    stick keeps its magnitude when ``nu`` is small and ``V_l`` would round
    to 1; the ``nu`` update depends on exactly that quantity.
    """
    counts = state.table.counts
    tail = _tail_counts(counts)
    log_v, log_rest = randdist.sample_log_beta(1.0 + counts[:-1], state.hp.nu + tail[:-1], rng)
    before = np.concatenate([[0.0], np.cumsum(log_rest)])
    return np.concatenate([log_v + before[:-1], [before[-1]]])


def gibbs_step_weights(state: GibbsState, rng) -> np.ndarray:
    """``V_l ~ Beta(1 + M_l, nu + sum_{j>l} M_j)`` for l < L, then stick breaking."""
    return _normalize(sample_log_weights(state, rng))


def _normalize(log_w: np.ndarray) -> np.ndarray:
    w = np.exp(log_w - log_w.max())
    return w / w.sum()


def label_logits(state: GibbsState, y: np.ndarray) -> np.ndarray:
    """Unnormalized log-probabilities of each label, shape ``(n, L)``."""
    resid = _residuals(state, y)
    with np.errstate(divide="ignore"):
        log_w = np.log(state.table.weights)
    sq = (resid[:, None] - state.table.values.T) ** 2
    return log_w[None, :] - sq / (2.0 * state.hp.tau2)


def gibbs_step_labels(state: GibbsState, h: ObservationHistory, rng) -> tuple[np.ndarray, np.ndarray]:
    """Resample every label independently; returns ``(assignments, counts)``.

    ``P(z_i = j)`` is proportional to
    ``w_j exp(-(y_i - x_i^T beta - xi_j(x_i))^2 / (2 tau2))``, normalized in
    log space.

    Raises
    ------
    DegenerateWeights
        If a row has no finite log-probability (all weights zero).
    """
    if state.n == 0:
        return np.zeros(0, dtype=int), np.zeros(state.L, dtype=int)
    z = randdist.sample_categorical_logits(label_logits(state, h.y), rng)
    return z, np.bincount(z, minlength=state.L)


def nu_posterior_params(L: int, log_w_last: float, priors: PriorSpec) -> tuple[float, float]:
    """Gamma ``(shape, rate)`` of ``nu`` given ``L - 1`` stick fractions whose leftover stick is ``exp(log_w_last)``.

    The leftover stick is floored at 1e-300 before the log.
    """
    rate = priors.b_nu - max(float(log_w_last), LOG_W_L_FLOOR)
    if not rate > 0:
        raise InvalidParameter(f"nu posterior rate {rate} is not positive")
    return priors.a_nu + L - 1, rate


def _sample_nu(state: GibbsState, log_w_last: float, priors: PriorSpec, rng) -> float:
    shape, rate = nu_posterior_params(state.L, log_w_last, priors)
    return float(randdist.sample_gamma(shape, rate, rng))


def _sample_beta(state: GibbsState, h: ObservationHistory, priors: PriorSpec, rng) -> np.ndarray:
    if state.n == 0:
        return priors.beta0 + np.linalg.cholesky(priors.sigma_beta) @ rng.standard_normal(priors.d)
    prec0 = np.linalg.inv(priors.sigma_beta)
    X = state.X
    ybar = h.y - state.table.values[state.table.assignments, np.arange(state.n)]
    prec = prec0 + X.T @ X / state.hp.tau2
    rhs = prec0 @ priors.beta0 + X.T @ ybar / state.hp.tau2
    c = np.linalg.cholesky(prec)
    mean = cho_solve((c, True), rhs)
    # c c^T = prec, so c^{-T} eps has covariance prec^{-1}
    return mean + np.linalg.solve(c.T, rng.standard_normal(priors.d))


def _sample_tau2(state: GibbsState, h: ObservationHistory, beta: np.ndarray, priors: PriorSpec, rng) -> float:
    n = state.n
    if n == 0:
        return float(randdist.sample_inverse_gamma(priors.a_tau, priors.b_tau, rng))
    ybar = h.y - state.table.values[state.table.assignments, np.arange(n)]
    r = ybar - state.X @ beta
    return float(randdist.sample_inverse_gamma(priors.a_tau + 0.5 * n, priors.b_tau + 0.5 * float(r @ r), rng))


def occupied_values(state: GibbsState) -> np.ndarray:
    """Rows of the surface table that carry at least one observation.

    The surface-scale and length-scale updates condition on these rows only:
    unoccupied surfaces are integrated out (their conditional is the prior)
    and redrawn at the start of the next sweep, so the stationary
    distribution is unchanged while the sampler no longer anchors ``phi`` to
    prior draws made at its previous value.
    """
    return state.table.values[state.table.counts > 0]


def _surface_quadratic(state: GibbsState, values: np.ndarray) -> float:
    if state.n == 0 or len(values) == 0:
        return 0.0
    w = state.rho_chol.half_solve(values.T)
    return float(np.sum(w * w))


def _sample_sigma2(state: GibbsState, priors: PriorSpec, rng) -> float:
    values = occupied_values(state)
    shape = priors.a_sigma + 0.5 * state.n * len(values)
    scale = priors.b_sigma + 0.5 * _surface_quadratic(state, values)
    return float(randdist.sample_inverse_gamma(shape, scale, rng))


def _phi_grid_step(state: GibbsState, cache: DataCache, sigma2: float, rng) -> int:
    values = occupied_values(state)
    if state.n == 0 or len(values) == 0:
        return int(rng.integers(len(cache.grid)))
    logdet, quad = cache.grid_quadratics(values)
    logp = -0.5 * len(values) * logdet - quad / (2.0 * sigma2)
    return int(randdist.sample_categorical_logits(logp[None, :], rng)[0])


def anisotropic_nll(log_phi: np.ndarray, values: np.ndarray, sigma2: float, cache: DataCache):
    """Negative log-likelihood of the surfaces in ``phi`` and its gradient in ``log phi``."""
    phi = np.exp(log_phi)
    L = values.shape[0]
    rho = np.exp(-(cache.d2 @ phi))
    chol = cholesky_jittered(rho)
    alpha = chol.solve(values.T)  # (n, L)
    nll = 0.5 * L * chol.logdet() + 0.5 * float(np.sum(values.T * alpha)) / sigma2
    rho_inv = chol.solve(np.eye(cache.n))
    grad = np.empty_like(phi)
    for k in range(len(phi)):
        drho = -phi[k] * cache.d2[:, :, k] * rho
        trace_term = float(np.sum(rho_inv * drho))
        quad_term = float(np.sum(alpha * (drho @ alpha)))
        grad[k] = 0.5 * L * trace_term - 0.5 * quad_term / sigma2
    return nll, grad


def _phi_mle_step(state: GibbsState, cache: DataCache, sigma2: float, b_phi: float, config: GibbsConfig):
    """Gradient descent in ``log phi`` with backtracking; returns the plug-in estimate."""
    values = occupied_values(state)
    if state.n < 2 or len(values) == 0:
        return state.hp.phi.copy()
    upper = math.log(b_phi)
    u = np.minimum(np.log(state.hp.phi), upper)
    f, g = anisotropic_nll(u, values, sigma2, cache)
    for _ in range(config.mle_steps):
        step = config.mle_step_size
        improved = False
        for _ in range(30):
            cand = np.minimum(u - step * g, upper)
            try:
                f_new, g_new = anisotropic_nll(cand, values, sigma2, cache)
            except Exception:  # broken factorization far out in phi space
                f_new = math.inf
            if f_new < f:
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        rel = (f - f_new) / max(abs(f), 1.0)
        u, f, g = cand, f_new, g_new
        if rel < 1e-10:
            break
    return np.exp(u)


LOG_RW_SD = 0.4
LOG_2PI = math.log(2.0 * math.pi)
PHI_PROPOSAL_STEPS = (-2, -1, 1, 2)


def collapsed_loglik(groups: list[np.ndarray], resid: np.ndarray, rho: np.ndarray, sigma2: float, tau2: float) -> float:
    """``log p(resid | labels, sigma2, tau2, phi)`` with the surfaces integrated out.

    Observations on one surface are jointly ``N(0, sigma2 * rho_kk + tau2 * I)``
    and independent across surfaces. Returns ``-inf`` if a block is not
    positive definite.
    """
    total = 0.0
    for idx in groups:
        cov = sigma2 * rho[np.ix_(idx, idx)]
        cov[np.diag_indices_from(cov)] += tau2
        try:
            c = np.linalg.cholesky(cov)
        except np.linalg.LinAlgError:
            return -math.inf
        w = np.linalg.solve(c, resid[idx]) if len(idx) > 1 else resid[idx] / c[0]
        total -= float(np.sum(np.log(np.diag(c)))) + 0.5 * float(w @ w) + 0.5 * len(idx) * LOG_2PI
    return total



def _log_inverse_gamma(x: float, a: float, b: float) -> float:
    return -(a + 1.0) * math.log(x) - b / x


def log_count_likelihood(nu: float, counts: np.ndarray) -> float:
    """Log-probability of one label sequence with these counts given ``nu``, sticks integrated out.

    Each stick fraction contributes ``B(1 + M_l, nu + T_l) / B(1, nu)`` where
    ``T_l`` counts observations on later surfaces; the last surface has no
    fraction of its own.
    """
    counts = np.asarray(counts, dtype=float)
    m, tail = counts[:-1], _tail_counts(counts)[:-1]
    return float(np.sum(math.log(nu) + gammaln(1.0 + m) + gammaln(nu + tail) - gammaln(1.0 + m + nu + tail)))


def collapsed_moves(state: GibbsState, h: ObservationHistory, priors: PriorSpec, cache: DataCache, rng, moves: int) -> None:
    """Metropolis moves on ``tau2``, ``sigma2``, the grid ``phi`` and ``nu`` with surfaces and sticks integrated out.

    Conditional draws of the scale parameters given the surfaces mix slowly:
    a surface that is smooth because ``phi`` is small pins ``phi`` down, and
    a large ``tau2`` lets a flat surface explain the data. Targeting the
    marginal of ``(tau2, sigma2, phi)`` given labels and ``beta`` lets them
    move jointly. Likewise ``nu`` is tightly coupled to the stick fractions
    and is moved here given the counts only. The surfaces are stale afterwards and must be redrawn from
    their conditional before anything else reads them. Updates ``state.hp``,
    ``state.rho``, ``state.rho_chol`` and ``state.phi_index`` in place.
    """
    if state.n == 0 or moves == 0:
        return
    hp = state.hp
    z = state.table.assignments
    groups = [np.flatnonzero(z == k) for k in np.flatnonzero(state.table.counts)]
    resid = h.y - state.X @ hp.beta
    grid_mode = state.phi_index is not None
    tau2, sigma2, rho = hp.tau2, hp.sigma2, state.rho
    ll = collapsed_loglik(groups, resid, rho, sigma2, tau2)
    for _ in range(moves):
        for which in ("tau2", "sigma2"):
            old = tau2 if which == "tau2" else sigma2
            new = old * math.exp(LOG_RW_SD * rng.standard_normal())
            a, b = (priors.a_tau, priors.b_tau) if which == "tau2" else (priors.a_sigma, priors.b_sigma)
            t2, s2 = (new, sigma2) if which == "tau2" else (tau2, new)
            ll_new = collapsed_loglik(groups, resid, rho, s2, t2)
            # log-scale random walk; the Jacobian adds log(new / old)
            log_ratio = ll_new - ll + _log_inverse_gamma(new, a, b) - _log_inverse_gamma(old, a, b) + math.log(new / old)
            if math.log(rng.random()) < log_ratio:
                tau2, sigma2, ll = t2, s2, ll_new
        if grid_mode:
            m_new = state.phi_index + int(rng.choice(PHI_PROPOSAL_STEPS))
            if 0 <= m_new < len(cache.grid):
                rho_new, _ = cache.grid_factor(m_new)
                ll_new = collapsed_loglik(groups, resid, rho_new, sigma2, tau2)
                if math.log(rng.random()) < ll_new - ll:
                    ll, rho = ll_new, rho_new
                    state.phi_index = m_new
        # nu given the counts alone; step 2 redraws the sticks given the new value
        nu = hp.nu * math.exp(LOG_RW_SD * rng.standard_normal())
        log_ratio = (
            log_count_likelihood(nu, state.table.counts)
            - log_count_likelihood(hp.nu, state.table.counts)
            + priors.a_nu * (math.log(nu) - math.log(hp.nu))
            - priors.b_nu * (nu - hp.nu)
        )
        if math.log(rng.random()) < log_ratio:
            hp.nu = nu
    hp.tau2, hp.sigma2 = tau2, sigma2
    if grid_mode:
        state.rho, state.rho_chol = cache.grid_factor(state.phi_index)
        hp.phi = np.full(priors.d, cache.grid[state.phi_index])


def gibbs_step_hypers(
    state: GibbsState,
    h: ObservationHistory,
    priors: PriorSpec,
    rng,
    cache: DataCache | None = None,
    config: GibbsConfig | None = None,
) -> HyperParams:
    """Step 4: update the hyperparameters in order and return them.

    The weights are redrawn first (stored back on ``state.table``) and
    ``nu`` is drawn given them; ``beta``, ``tau2`` and ``sigma2`` are
    conjugate draws; ``phi`` is updated by the grid sampler or the
    anisotropic MLE, refreshing ``state.rho``/``state.rho_chol``/
    ``state.phi_index`` to match.
    """
    config = config or GibbsConfig()
    cache = cache if cache is not None else DataCache(state.X, priors, config.phi_mode)
    log_w = sample_log_weights(state, rng)
    state.table.weights = _normalize(log_w)
    nu = _sample_nu(state, float(log_w[-1]), priors, rng)
    beta = _sample_beta(state, h, priors, rng)
    tau2 = _sample_tau2(state, h, beta, priors, rng)
    sigma2 = _sample_sigma2(state, priors, rng)

    if config.phi_mode == "isotropic_grid":
        m = _phi_grid_step(state, cache, sigma2, rng)
        phi = np.full(priors.d, cache.grid[m])
        state.rho, state.rho_chol = cache.grid_factor(m)
        state.phi_index = m
    else:
        phi = _phi_mle_step(state, cache, sigma2, priors.b_phi, config)
        state.rho, state.rho_chol = cache.factor_for(phi)
        state.phi_index = None
    return HyperParams(beta=beta, tau2=tau2, nu=nu, sigma2=sigma2, phi=phi)


def gibbs_sweep(
    state: GibbsState,
    h: ObservationHistory,
    priors: PriorSpec,
    rng,
    cache: DataCache,
    config: GibbsConfig,
) -> GibbsState:
    """One full sweep (steps 1 -> 2 -> 3 -> 4), updating ``state`` in place.

    With ``config.collapsed_moves > 0`` the sweep opens with
    :func:`collapsed_moves`; step 1 then redraws the surfaces under the new
    hyperparameters, so the pair is a joint draw and the target is unchanged.
    """
    collapsed_moves(state, h, priors, cache, rng, config.collapsed_moves)
    state.table.values = gibbs_step_surfaces(state, h, rng)
    state.table.weights = gibbs_step_weights(state, rng)
    state.table.assignments, state.table.counts = gibbs_step_labels(state, h, rng)
    state.hp = gibbs_step_hypers(state, h, priors, rng, cache, config)
    state.sweeps += 1
    return state


# ---------------------------------------------------------------------------
# initialization and the outer driver


def cold_state(h: ObservationHistory, priors: PriorSpec, L: int, cache: DataCache, phi_mode: str) -> GibbsState:
    """All observations on surface 0, zero surfaces, hyperparameters at prior means."""
    tau2, sigma2, nu = priors.prior_means()
    phi_mean = 0.5 * priors.b_phi
    if phi_mode == "isotropic_grid":
        m = int(np.argmin(np.abs(np.log(cache.grid) - math.log(phi_mean))))
        phi = np.full(priors.d, cache.grid[m])
        rho, chol = cache.grid_factor(m)
    else:
        m = None
        phi = np.full(priors.d, phi_mean)
        rho, chol = cache.factor_for(phi)
    hp = HyperParams(beta=priors.beta0.astype(float).copy(), tau2=tau2, nu=nu, sigma2=sigma2, phi=phi)
    table = SurfaceTable(
        values=np.zeros((L, h.n)),
        assignments=np.zeros(h.n, dtype=int),
        weights=np.full(L, 1.0 / L),
    )
    return GibbsState(hp, table, h.X.copy(), rho, chol, m, priors.b_phi)


def _most_likely_labels(state: GibbsState, values: np.ndarray, y: np.ndarray, X: np.ndarray) -> np.ndarray:
    resid = y - X @ state.hp.beta
    with np.errstate(divide="ignore"):
        log_w = np.log(state.table.weights)
    sq = (resid[:, None] - values.T) ** 2
    return np.argmax(log_w[None, :] - sq / (2.0 * state.hp.tau2), axis=1)


def _resize_table(values, z, L_new, y, X, state) -> tuple[np.ndarray, np.ndarray]:
    """Fit an (L_old, n) table into L_new rows, keeping occupied surfaces first."""
    L_old = values.shape[0]
    counts = np.bincount(z, minlength=L_old)
    occupied = [l for l in range(L_old) if counts[l] > 0]
    if len(occupied) > L_new:
        keep = sorted(sorted(occupied, key=lambda l: -counts[l])[:L_new])
    else:
        keep = occupied + [l for l in range(L_old) if counts[l] == 0][: L_new - len(occupied)]
    keep = keep[:L_new]
    new_values = np.zeros((L_new, values.shape[1]))
    new_values[: len(keep)] = values[keep]
    remap = {old: new for new, old in enumerate(keep)}
    new_z = np.array([remap.get(int(l), -1) for l in z], dtype=int)
    lost = new_z < 0
    if np.any(lost):
        resid = y[lost] - X[lost] @ state.hp.beta
        sq = (resid[:, None] - new_values[: len(keep), lost].T) ** 2
        new_z[lost] = np.argmin(sq, axis=1)
    return new_values, new_z


def warm_state(
    prev: GibbsState,
    h: ObservationHistory,
    priors: PriorSpec,
    L: int,
    cache: DataCache,
    rng,
) -> GibbsState:
    """Extend a previous state to the (longer) history ``h`` and truncation ``L``.

    New columns of each surface are imputed by kriging that surface's
    existing row; each new observation goes to its most likely label.
    """
    n_prev = prev.n
    X_new = h.X[n_prev:]
    values = prev.table.values
    z = prev.table.assignments
    if len(X_new):
        if n_prev:
            mean, _ = kriging(values, prev.X, X_new, prev.kernel, prev.sigma0_chol())
        else:
            mean = np.zeros((prev.L, len(X_new)))
        values = np.hstack([values, np.atleast_2d(mean)])
        z_new = _most_likely_labels(prev, np.atleast_2d(mean), h.y[n_prev:], X_new)
        z = np.concatenate([z, z_new])
    if L != prev.L:
        values, z = _resize_table(values, z, L, h.y, h.X, prev)

    hp = prev.hp.copy()
    if prev.phi_index is not None and cache.phi_mode == "isotropic_grid":
        m = prev.phi_index
        rho, chol = cache.grid_factor(m)
    else:
        m = None
        rho, chol = cache.factor_for(hp.phi)
    table = SurfaceTable(values=values, assignments=z, weights=np.full(L, 1.0 / L))
    state = GibbsState(hp, table, h.X.copy(), rho, chol, m, priors.b_phi)
    state.table.weights = gibbs_step_weights(state, rng)
    return state


def choose_L(config: GibbsConfig, nu_hat: float, n: int) -> int:
    if config.L is not None:
        return config.L
    return truncation_level(nu_hat, max(n, 1), config.kappa, config.L_max)


def run_gibbs(
    h: ObservationHistory,
    priors: PriorSpec,
    config: GibbsConfig,
    rng,
    warm_start_state: GibbsState | None = None,
) -> GibbsState:
    """Run ``config.B`` sweeps and return the final state as one posterior draw.

    ``h.y`` is expected on the standardized scale the priors refer to.
    """
    if h.n < 1:
        raise InvalidParameter("run_gibbs needs at least one observation")
    cache = DataCache(h.X, priors, config.phi_mode)
    if warm_start_state is not None and config.warm_start:
        L = choose_L(config, warm_start_state.hp.nu, h.n)
        state = warm_state(warm_start_state, h, priors, L, cache, rng)
    else:
        L = choose_L(config, priors.prior_means()[2], h.n)
        state = cold_state(h, priors, L, cache, config.phi_mode)
    for _ in range(config.B):
        gibbs_sweep(state, h, priors, rng, cache, config)
    return state
