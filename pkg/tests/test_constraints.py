import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evar import (
    Distribution,
    HypothesisPair,
    InfeasibleError,
    get_penalty,
    growth_rate,
    kl_divergence,
    solve_bounded,
    solve_convex,
    solve_moment,
    solve_quantized,
)
from evar.constraints import PENALTIES, pointwise_maximizer, quantizer_threshold_map, square_maximizer
from helpers import discrete_growth, masses, random_pair


def gaussian_pair(delta=0.5):
    return HypothesisPair(Distribution.gaussian(0.0), Distribution.gaussian(delta))


# -- quantization -----------------------------------------------------------

def test_quantizer_threshold_is_log_mean():
    assert quantizer_threshold_map(0.5, 2.0) == pytest.approx(1.5 / math.log(4))
    assert quantizer_threshold_map(1.3, 1.3) == 1.3


def test_quantized_is_valid_and_two_valued():
    rng = np.random.default_rng(4)
    for _ in range(20):
        pair = random_pair(rng, int(rng.integers(2, 12)))
        ev = solve_quantized(pair)
        x, w0, w1, lr = masses(pair)
        e = ev.psi(lr)
        assert len(np.unique(e)) <= 2
        assert np.dot(w0, e) == pytest.approx(1.0, abs=1e-13)
        assert discrete_growth(e, w1) == pytest.approx(ev.growth, abs=1e-13)


def test_quantized_gaussian_matches_direct_scan():
    from scipy.stats import norm
    ev = solve_quantized(gaussian_pair())
    xs = np.linspace(-3, 3, 60001)
    a, b = norm.sf(xs), norm.sf(xs - 0.5)
    g = b * np.log(b / a) + (1 - b) * np.log((1 - b) / (1 - a))
    assert ev.growth == pytest.approx(g.max(), abs=1e-9)
    assert ev.residual < 1e-8


def test_quantized_equal_laws_gives_zero():
    d = Distribution.discrete([0, 1, 2], [0.2, 0.3, 0.5])
    assert solve_quantized(HypothesisPair(d, d)).growth == 0.0


# -- clipping ---------------------------------------------------------------

def test_clip_inactive_recovers_likelihood_ratio():
    pair = random_pair(np.random.default_rng(8), 6)
    x, w0, w1, lr = masses(pair)
    ev = solve_bounded(pair, min(lr.min(), 1.0), max(lr.max(), 1.0))
    assert ev.lambda_star == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(ev.psi(lr), lr, rtol=1e-12)


def test_clip_spends_whole_budget():
    rng = np.random.default_rng(9)
    for c1, c2 in [(0.5, 3.0), (0.25, 10.0), (0.0, 5.0), (0.9, 1.1)]:
        pair = random_pair(rng, 10)
        ev = solve_bounded(pair, c1, c2)
        rep = growth_rate(ev, pair)
        assert rep.null_expectation == pytest.approx(1.0, abs=1e-12)
        assert rep.growth_rate <= kl_divergence(pair.alt_dist, pair.null_dist) + 1e-12


def test_clip_unit_bounds_give_constant_one():
    ev = solve_bounded(random_pair(np.random.default_rng(1), 5), 1.0, 1.0)
    assert ev.lambda_star == 1.0
    np.testing.assert_array_equal(ev.psi(np.array([0.1, 1.0, 7.0])), 1.0)


@pytest.mark.parametrize("c1,c2", [(1.2, 0.9), (-0.1, 2.0), (0.5, 0.9), (0.5, math.inf)])
def test_clip_infeasible_bounds(c1, c2):
    with pytest.raises(InfeasibleError):
        solve_bounded(random_pair(np.random.default_rng(1), 5), c1, c2)


def test_clip_zero_floor_flags_minus_infinity():
    # L vanishes where the null alone has mass, so a zero floor is harmless there
    p0 = Distribution.discrete([0, 1, 2], [0.3, 0.3, 0.4])
    p1 = Distribution.discrete([0, 1, 2], [0.0, 0.5, 0.5])
    pair = HypothesisPair(p0, p1)
    rep = growth_rate(solve_bounded(pair, 0.0, 5.0), pair)
    assert np.isfinite(rep.growth_rate)
    flagged = growth_rate(lambda l: np.where(l > 1.5, 2.0, 0.0), pair)
    assert flagged.growth_rate == -math.inf and "growth_flag" in flagged.extras


def test_clip_gaussian_pair():
    pair = gaussian_pair()
    ev = solve_bounded(pair, 0.5, 2.0)
    assert growth_rate(ev, pair).null_expectation == pytest.approx(1.0, abs=1e-10)


# -- convex penalties -------------------------------------------------------

def test_square_maximizer_is_cancellation_free():
    l = np.array([1e-12, 1e-3, 1.0, 50.0])
    lam, gam = 3.0, 1e-9
    e = square_maximizer(l, lam, gam)
    # KKT: l/e = lam + 2 gam e
    np.testing.assert_allclose(l / e, lam + 2 * gam * e, rtol=1e-14)


def test_pointwise_maximizer_matches_closed_form():
    l = np.geomspace(1e-4, 1e3, 40)
    for lam, gam in [(0.9, 0.02), (0.0, 1.0), (2.0, 1e-6)]:
        np.testing.assert_allclose(pointwise_maximizer(l, lam, gam, PENALTIES["square"]),
                                   square_maximizer(l, lam, gam), rtol=1e-12)


def test_penalty_checks():
    for name in ("square", "cube", "xlogx", "power1.5"):
        get_penalty(name).check()
    with pytest.raises(ValueError):
        get_penalty("power0.5")
    with pytest.raises(ValueError):
        get_penalty("abs")


def test_moment_solution_kkt_and_constraints():
    rng = np.random.default_rng(12)
    for _ in range(15):
        pair = random_pair(rng, int(rng.integers(2, 11)))
        x, w0, w1, lr = masses(pair)
        C = 0.9 * np.dot(w0, lr ** 2)
        ev = solve_moment(pair, C)
        e = ev.psi(lr)
        assert np.max(ev.kkt_residual(lr)) <= 1e-8
        assert np.dot(w0, e ** 2) <= C * (1 + 1e-12)
        assert np.dot(w0, e) <= 1 + 1e-12
        if ev.gamma > 0:
            assert abs(np.dot(w0, e ** 2) - C) <= 1e-10
        if ev.lam > 0:
            assert abs(np.dot(w0, e) - 1) <= 1e-10


def test_moment_inactive_penalty_returns_likelihood_ratio():
    pair = random_pair(np.random.default_rng(2), 5)
    x, w0, w1, lr = masses(pair)
    ev = solve_moment(pair, 2 * np.dot(w0, lr ** 2))
    assert ev.gamma == 0 and ev.lam == 1
    assert growth_rate(ev, pair).growth_rate == pytest.approx(kl_divergence(pair.alt_dist, pair.null_dist), abs=1e-13)


def test_moment_slack_budget():
    # a tight second moment forces E0[E] below one
    pair = random_pair(np.random.default_rng(6), 4)
    ev = solve_moment(pair, 0.5)
    rep = growth_rate(ev, pair)
    assert ev.lam == 0.0
    assert rep.null_expectation < 1
    assert rep.extras["second_moment"] == pytest.approx(0.5, abs=1e-12)


def test_moment_infeasible():
    with pytest.raises(InfeasibleError):
        solve_moment(random_pair(np.random.default_rng(2), 5), 0.0)
    with pytest.raises(InfeasibleError):
        solve_convex(random_pair(np.random.default_rng(2), 5), "xlogx", -1.0)


def test_general_path_agrees_with_closed_form():
    rng = np.random.default_rng(13)
    for _ in range(10):
        pair = random_pair(rng, int(rng.integers(2, 11)))
        x, w0, w1, lr = masses(pair)
        C = 0.9 * np.dot(w0, lr ** 2)
        a, b = solve_moment(pair, C), solve_convex(pair, "square", C)
        np.testing.assert_allclose(a.psi(lr), b.psi(lr), rtol=1e-10, atol=1e-12)


def test_entropy_penalty_solution():
    pair = random_pair(np.random.default_rng(14), 8)
    x, w0, w1, lr = masses(pair)
    full = float(np.dot(w0, np.where(lr > 0, lr * np.log(np.where(lr > 0, lr, 1.0)), 0.0)))
    ev = solve_convex(pair, "xlogx", 0.5 * full)
    rep = growth_rate(ev, pair)
    assert rep.null_expectation <= 1 + 1e-12
    assert rep.extras["penalty_expectation"] <= 0.5 * full + 1e-10
    assert rep.extras["max_kkt_residual"] <= 1e-8


def test_moment_on_gaussian_pair():
    pair = gaussian_pair()
    C = 0.9 * math.exp(0.25)
    ev = solve_moment(pair, C)
    rep = growth_rate(ev, pair)
    assert rep.null_expectation == pytest.approx(1.0, abs=1e-8)
    assert rep.extras["second_moment"] == pytest.approx(C, abs=1e-8)


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2 ** 32 - 1), st.floats(0.3, 0.99))
def test_moment_growth_monotone_in_budget(n, seed, frac):
    pair = random_pair(np.random.default_rng(seed), n)
    x, w0, w1, lr = masses(pair)
    full = np.dot(w0, lr ** 2)
    g_small = growth_rate(solve_moment(pair, frac * full), pair).growth_rate
    g_big = growth_rate(solve_moment(pair, full), pair).growth_rate
    assert g_small <= g_big + 1e-12
    assert g_big <= kl_divergence(pair.alt_dist, pair.null_dist) + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 10), st.integers(0, 2 ** 32 - 1))
def test_quantized_and_clipped_lose_growth(n, seed):
    pair = random_pair(np.random.default_rng(seed), n)
    kl = kl_divergence(pair.alt_dist, pair.null_dist)
    assert solve_quantized(pair).growth <= kl + 1e-12
    assert growth_rate(solve_bounded(pair, 0.5, 3.0), pair).growth_rate <= kl + 1e-12
