"""Estimator-style wrappers around the solvers.

``fit`` takes a :class:`HypothesisPair` instead of a data matrix, since every
solver works from the two laws rather than from samples. ``transform`` maps
observations to e-values and ``score`` returns the growth rate under the
alternative. Hyperparameters follow the scikit-learn conventions, so
``get_params``, ``set_params`` and ``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from . import constraints, ldp
from .dist import HypothesisPair


def _check_pair(pair) -> HypothesisPair:
    if not isinstance(pair, HypothesisPair):
        raise TypeError(f"fit expects a HypothesisPair, got {type(pair).__name__}")
    return pair


class _PairEstimator(BaseEstimator):
    def _solve(self, pair):
        raise NotImplementedError

    def fit(self, pair, y=None):
        self.pair_ = _check_pair(pair)
        self.evariable_ = self._solve(self.pair_)
        self.report_ = constraints.growth_rate(self.evariable_, self.pair_)
        return self

    def _fitted(self):
        if not hasattr(self, "evariable_"):
            raise NotFittedError(f"{type(self).__name__} is not fitted yet")
        return self.evariable_

    def transform(self, X):
        """E-values of the observations ``X`` (a 1-D array of sample points)."""
        ev = self._fitted()
        return np.asarray(ev.psi(self.pair_.lr(np.ravel(X))), dtype=float)

    def score(self, X=None, y=None) -> float:
        """Expected log e-value under the alternative of the fitted pair."""
        self._fitted()
        return self.report_.growth_rate


class PrivateEVariableEstimator(_PairEstimator):
    """Optimal binary eps-LDP mechanism and its e-variable.

    ``transform`` takes privatized bits, not raw observations; use
    :meth:`privatize` to produce them.
    """

    def __init__(self, epsilon: float = 1.0):
        self.epsilon = epsilon

    def _solve(self, pair):
        self.solution_ = ldp.solve_binary_threshold(pair, self.epsilon)
        return ldp.private_evariable(self.solution_.mechanism, pair)

    def privatize(self, X, seed=None) -> np.ndarray:
        ev = self._fitted()
        u = np.random.default_rng(seed).random(np.size(X))
        p1 = ev.mechanism.prob_one(self.pair_.lr(np.ravel(X)))
        return (u < p1).astype(np.int8)

    def transform(self, X):
        return np.asarray(self._fitted().evaluate(np.ravel(X)), dtype=float)


class QuantizedEVariableEstimator(_PairEstimator):
    """Best two-valued e-variable."""

    def _solve(self, pair):
        return constraints.solve_quantized(pair)


class ClippedEVariableEstimator(_PairEstimator):
    """Best e-variable with values in [c1, c2]."""

    def __init__(self, c1: float = 0.5, c2: float = 3.0):
        self.c1 = c1
        self.c2 = c2

    def _solve(self, pair):
        return constraints.solve_bounded(pair, self.c1, self.c2)


class ConvexEVariableEstimator(_PairEstimator):
    """Best e-variable with E0[phi(E)] <= C; the square penalty uses the closed form."""

    def __init__(self, C: float = 2.0, penalty: str = "square"):
        self.C = C
        self.penalty = penalty

    def _solve(self, pair):
        if self.penalty == "square":
            return constraints.solve_moment(pair, self.C)
        return constraints.solve_convex(pair, self.penalty, self.C)
