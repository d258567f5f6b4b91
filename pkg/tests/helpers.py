"""Random instance generators shared by the test modules."""

import numpy as np

from evar import Distribution, HypothesisPair


def random_pair(rng, n, alpha=1.0, spread=100):
    """Two Dirichlet-random laws on a common n-point support."""
    support = np.sort(rng.choice(spread, size=n, replace=False)).astype(float)
    p0 = rng.dirichlet(np.full(n, alpha))
    p1 = rng.dirichlet(np.full(n, alpha))
    return HypothesisPair(Distribution.discrete(support, p0), Distribution.discrete(support, p1))


def masses(pair):
    x, w0, w1 = pair.grid_weights()
    return x, w0, w1, pair.lr(x)


def discrete_growth(e, w1):
    """E_P1[log e] on a discrete grid, -inf when e vanishes on alternative mass."""
    charged = w1 > 0
    if np.any(e[charged] <= 0):
        return -np.inf
    return float(np.dot(w1[charged], np.log(e[charged])))
