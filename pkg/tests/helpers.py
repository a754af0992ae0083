"""Shared constructors for tests."""

import numpy as np

from infgp_bo.history import ObservationHistory
from infgp_bo.infgp import DataCache, PriorSpec, SurfaceTable, cold_state

BOX1 = np.array([[0.0, 1.0]])


def make_state(X, y, L, *, sigma2=1.0, tau2=1.0, nu=1.0, phi=None, z=None, values=None, weights=None):
    """Gibbs state with prescribed hyperparameters (phi defaults to a grid point)."""
    X = np.asarray(X, dtype=float).reshape(len(y), -1) if len(y) else np.zeros((0, 1))
    h = ObservationHistory(np.tile([0.0, 1.0], (X.shape[1], 1)), X, y)
    priors = PriorSpec.default(h.bounds)
    cache = DataCache(h.X, priors)
    state = cold_state(h, priors, L, cache, "isotropic_grid")
    state.hp.sigma2, state.hp.tau2, state.hp.nu = sigma2, tau2, nu
    if phi is not None:
        state.hp.phi = np.full(X.shape[1], phi)
        state.rho, state.rho_chol = cache.factor_for(state.hp.phi)
        state.phi_index = None
    if z is not None:
        state.table = SurfaceTable(state.table.values, np.asarray(z), state.table.weights)
    if values is not None:
        state.table.values = np.asarray(values, dtype=float)
    if weights is not None:
        state.table.weights = np.asarray(weights, dtype=float)
    return state, h, priors, cache
