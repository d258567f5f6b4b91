import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from evar import (
    ClippedEVariableEstimator,
    ConvexEVariableEstimator,
    PrivateEVariableEstimator,
    QuantizedEVariableEstimator,
    growth_rate,
    solve_bounded,
)
from helpers import masses, random_pair


@pytest.fixture
def pair():
    return random_pair(np.random.default_rng(21), 6)


@pytest.mark.parametrize("est", [PrivateEVariableEstimator(1.0), QuantizedEVariableEstimator(),
                                 ClippedEVariableEstimator(0.5, 3.0), ConvexEVariableEstimator(1.5),
                                 ConvexEVariableEstimator(0.1, penalty="xlogx")])
def test_fit_and_score(est, pair):
    fitted = clone(est).fit(pair)
    assert np.isfinite(fitted.score())
    assert fitted.report_.null_expectation <= 1 + 1e-12
    assert clone(est).get_params() == est.get_params()


def test_clipped_estimator_matches_function(pair):
    est = ClippedEVariableEstimator(c1=0.25, c2=10).fit(pair)
    ev = solve_bounded(pair, 0.25, 10)
    x = pair.support
    np.testing.assert_array_equal(est.transform(x), ev.psi(pair.lr(x)))
    assert est.score() == growth_rate(ev, pair).growth_rate


def test_set_params_refits(pair):
    est = ClippedEVariableEstimator().set_params(c2=2.0).fit(pair)
    assert est.evariable_.c2 == 2.0


def test_private_estimator_on_bits(pair):
    est = PrivateEVariableEstimator(epsilon=2.0).fit(pair)
    bits = est.privatize(pair.support, seed=0)
    assert set(np.unique(bits)) <= {0, 1}
    vals = est.transform(bits)
    assert set(np.unique(vals)) <= {est.evariable_.v0, est.evariable_.v1}


def test_unfitted_and_bad_input(pair):
    with pytest.raises(NotFittedError):
        QuantizedEVariableEstimator().transform([0.0])
    with pytest.raises(TypeError):
        QuantizedEVariableEstimator().fit(np.zeros((3, 2)))


def test_transform_values_have_null_mean_one(pair):
    x, w0, w1, lr = masses(pair)
    est = QuantizedEVariableEstimator().fit(pair)
    assert np.dot(w0, est.transform(x)) == pytest.approx(1.0, abs=1e-13)
