import numpy as np
import pytest

from crossdiff import InteractionMatrix


def random_symmetric_model(rng, n, low=0.1, high=3.0, zero_fraction=0.0):
    """Random validated model with symmetric nonnegative off-diagonal rates."""
    ns = n + 1
    K = np.zeros((ns, ns))
    iu = np.triu_indices(ns, 1)
    vals = rng.uniform(low, high, size=len(iu[0]))
    if zero_fraction > 0.0:
        vals = np.where(rng.random(vals.size) < zero_fraction, 0.0, vals)
    K[iu] = vals
    K = K + K.T
    return InteractionMatrix(K)


def random_interior_simplex(rng, n_species, margin=0.1):
    """Random simplex point bounded away from the boundary."""
    u = rng.dirichlet(np.ones(n_species))
    return (1.0 - margin) * u + margin / n_species


def random_tangent(rng, n_species):
    xi = rng.standard_normal(n_species)
    return xi - xi.mean()


@pytest.fixture
def rng():
    return np.random.default_rng(20260808)
