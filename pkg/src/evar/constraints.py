"""Growth-optimal e-variables under quantization, boundedness and convex
integral constraints.

Every solution here is a non-decreasing function of the likelihood ratio,
exposed as ``psi(l)``, which is what the composite lift consumes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from .dist import GrowthReport, HypothesisPair, bernoulli_kl
from .ldp import PrivateEVariable, SolverError, induced_marginal, scan_then_golden

log = logging.getLogger(__name__)

MULTIPLIER_TOL = 1e-12
RESIDUAL_TOL = 1e-10
MAX_ITER = 200
MAX_DOUBLINGS = 60
QUANT_SCAN_POINTS = 512
FIXED_POINT_DAMPING = 0.5
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 10_000

_XTOL = 1e-300
_RTOL = 4 * np.finfo(float).eps


class InfeasibleError(ValueError):
    """No feasible e-variable exists for the requested constraint."""


def _root(f, a: float, b: float) -> float:
    return brentq(f, a, b, xtol=_XTOL, rtol=_RTOL, maxiter=MAX_ITER)


# ---------------------------------------------------------------------------
# two-level quantization

@dataclass(frozen=True)
class TwoLevelEVariable:
    t_star: float
    u0: float
    u1: float
    alpha: float
    beta: float
    residual: float = 0.0
    argmax_thresholds: tuple = ()
    method: str = ""

    @property
    def growth(self) -> float:
        return _quant_growth(self.alpha, self.beta)

    @property
    def levels(self) -> tuple:
        return (self.t_star,)

    def psi(self, l) -> np.ndarray:
        return np.where(np.asarray(l) > self.t_star, self.u1, self.u0)


def _quant_growth(alpha: float, beta: float) -> float:
    # a split with no null mass on one side is not an e-variable; scored as no split
    if alpha <= 0 or alpha >= 1:
        return 0.0
    return bernoulli_kl(min(beta, 1.0), alpha)


def _two_level(alpha: float, beta: float) -> tuple[float, float]:
    # u1 = beta/alpha on {L > t}, u0 = (1 - beta)/(1 - alpha) on the rest
    u1 = beta / alpha if alpha > 0 else 1.0
    u0 = (1 - beta) / (1 - alpha) if alpha < 1 else 1.0
    return u0, u1


def quantizer_threshold_map(u0: float, u1: float) -> float:
    """Logarithmic mean of the two levels; 1 when they coincide."""
    if u0 <= 0 or u1 <= 0:
        return 0.0
    d = math.log(u1) - math.log(u0)
    if abs(d) < 1e-15:
        return u0
    return (u1 - u0) / d


def _quantized_at(pair: HypothesisPair, t: float, method: str, argmax=()) -> TwoLevelEVariable:
    alpha = pair.prob_above("null", t)
    beta = pair.prob_above("alt", t)
    u0, u1 = _two_level(alpha, beta)
    res = abs(t - quantizer_threshold_map(u0, u1))
    return TwoLevelEVariable(t, u0, u1, alpha, beta, res, tuple(argmax), method)


def solve_quantized(pair: HypothesisPair) -> TwoLevelEVariable:
    """Best e-variable taking two values, a threshold rule on L."""
    if pair.is_degenerate():
        return TwoLevelEVariable(1.0, 1.0, 1.0, 0.0, 0.0, 0.0, (1.0,), "degenerate")
    if pair.is_discrete:
        return _quantized_discrete(pair)
    return _quantized_continuous(pair)


def _quantized_discrete(pair: HypothesisPair) -> TwoLevelEVariable:
    x, w0, w1 = pair.grid_weights()
    lr = pair.lr(x)
    levels = np.unique(lr)
    growth = []
    for t in levels:
        above = lr > t
        growth.append(_quant_growth(w0[above].sum(), w1[above].sum()))
    growth = np.array(growth)
    best = growth.max()
    ties = levels[growth >= best - 1e-15]
    k = int(np.argmax(growth))
    lo = levels[k]
    hi = levels[k + 1] if k + 1 < len(levels) else np.inf
    cand = _quantized_at(pair, float(lo), "enumeration", ties)
    rhs = quantizer_threshold_map(cand.u0, cand.u1)
    if lo <= rhs < hi:
        cand = _quantized_at(pair, float(rhs), "enumeration", ties)
    return cand


def _quantized_continuous(pair: HypothesisPair) -> TwoLevelEVariable:
    def growth_at(t):
        return _quant_growth(pair.prob_above("null", t), pair.prob_above("alt", t))

    cands = []
    t = 1.0
    for _ in range(FIXED_POINT_MAX_ITER):
        alpha, beta = pair.prob_above("null", t), pair.prob_above("alt", t)
        u0, u1 = _two_level(alpha, beta)
        t_next = (1 - FIXED_POINT_DAMPING) * t + FIXED_POINT_DAMPING * quantizer_threshold_map(u0, u1)
        if abs(t_next - t) <= FIXED_POINT_TOL * max(1.0, t):
            cands.append(_quantized_at(pair, t_next, "fixed-point"))
            break
        t = t_next
    lr = pair.lr_grid()
    lr = lr[lr > 0]
    z = scan_then_golden(lambda s: growth_at(math.exp(s)), math.log(lr.min()), math.log(lr.max()),
                         points=QUANT_SCAN_POINTS)
    cands.append(_quantized_at(pair, math.exp(z), "scan"))
    return max(cands, key=lambda c: c.growth)


# ---------------------------------------------------------------------------
# boundedness

@dataclass(frozen=True)
class ClippedEVariable:
    c1: float
    c2: float
    lambda_star: float

    @property
    def levels(self) -> tuple:
        return (self.c1 * self.lambda_star, self.c2 * self.lambda_star)

    def psi(self, l) -> np.ndarray:
        return np.clip(np.asarray(l, dtype=float) / self.lambda_star, self.c1, self.c2)


def solve_bounded(pair: HypothesisPair, c1: float, c2: float) -> ClippedEVariable:
    """E* = clip(L / lambda*, c1, c2) with lambda* spending the whole null budget."""
    c1, c2 = float(c1), float(c2)
    if not (0 <= c1 <= 1 <= c2 < math.inf):
        raise InfeasibleError(f"bounds need 0 <= c1 <= 1 <= c2 < inf, got c1={c1}, c2={c2}")
    if c1 == c2 == 1:
        return ClippedEVariable(c1, c2, 1.0)
    if c1 == 0:
        log.info("c1 = 0: growth is -inf if E* hits 0 where the alternative has mass")

    def excess(lam):
        ev = ClippedEVariable(c1, c2, lam)
        return pair.expect("null", ev.psi, ev.levels) - 1.0

    if pair.is_degenerate() or excess(1.0) == 0.0:
        return ClippedEVariable(c1, c2, 1.0)
    lo, hi = 1.0, 1.0
    if excess(1.0) > 0:
        for _ in range(MAX_DOUBLINGS * 17):
            hi *= 2
            if excess(hi) <= 0:
                break
        else:
            raise SolverError("no upper bracket for lambda*", best=hi)
        lo = hi / 2
    else:
        for _ in range(MAX_DOUBLINGS * 17):
            lo /= 2
            if excess(lo) >= 0:
                break
        else:
            raise SolverError("no lower bracket for lambda*", best=lo)
        hi = lo * 2
    if excess(hi) == 0:
        return ClippedEVariable(c1, c2, hi)
    if excess(lo) == 0:
        return ClippedEVariable(c1, c2, lo)
    lam = _root(excess, lo, hi)
    return ClippedEVariable(c1, c2, lam)


# ---------------------------------------------------------------------------
# convex integral constraints

@dataclass(frozen=True)
class ConvexPenalty:
    name: str
    eval: Callable
    deriv: Callable
    lower_bound: float = -math.inf

    def check(self) -> None:
        """Finite-difference spot checks of strict convexity and superlinearity."""
        xs = np.logspace(-4, 4, 161)
        d = np.asarray(self.deriv(xs), dtype=float)
        if not np.all(np.diff(d) > 0):
            raise ValueError(f"penalty {self.name!r}: derivative is not increasing")
        h = 1e-6 * xs
        fd = (np.asarray(self.eval(xs + h)) - np.asarray(self.eval(xs - h))) / (2 * h)
        if not np.allclose(fd, d, rtol=1e-4, atol=1e-6):
            raise ValueError(f"penalty {self.name!r}: derivative does not match finite differences")
        tail = xs[xs >= 10]
        ratio = np.asarray(self.eval(tail)) / tail
        if not np.all(np.diff(ratio) > 0):
            raise ValueError(f"penalty {self.name!r}: phi(x)/x is not increasing beyond the knee")

    def floor(self) -> float:
        """Smallest penalty reachable by a constant e-variable e <= 1."""
        xs = np.concatenate([np.logspace(-12, 0, 4001), [1.0]])
        return float(np.min(self.eval(xs)))


def _power(p: float) -> ConvexPenalty:
    return ConvexPenalty(f"power{p:g}", lambda x: np.asarray(x, dtype=float) ** p,
                         lambda x: p * np.asarray(x, dtype=float) ** (p - 1), 0.0)


PENALTIES = {
    "square": ConvexPenalty("square", lambda x: np.asarray(x, dtype=float) ** 2,
                            lambda x: 2 * np.asarray(x, dtype=float), 0.0),
    "cube": _power(3.0),
    "xlogx": ConvexPenalty("xlogx", lambda x: np.asarray(x, dtype=float) * np.log(x),
                           lambda x: np.log(x) + 1.0, -1 / math.e),
}


def get_penalty(name: str) -> ConvexPenalty:
    if name in PENALTIES:
        return PENALTIES[name]
    if name.startswith("power"):
        p = float(name[5:])
        if p <= 1:
            raise ValueError("power penalties need an exponent > 1")
        return _power(p)
    raise ValueError(f"unknown penalty {name!r}; choose from {sorted(PENALTIES)} or powerP")


@dataclass(frozen=True)
class ConvexConstrainedEVariable:
    lam: float
    gamma: float
    penalty: ConvexPenalty
    C: float
    closed_form: bool = False

    @property
    def levels(self) -> tuple:
        return ()

    def psi(self, l) -> np.ndarray:
        l = np.asarray(l, dtype=float)
        if self.gamma == 0:
            return l / self.lam
        if self.closed_form:
            return square_maximizer(l, self.lam, self.gamma)
        return pointwise_maximizer(l, self.lam, self.gamma, self.penalty)

    def kkt_residual(self, l) -> np.ndarray:
        """|L/E - lambda - gamma phi'(E)| on points with L > 0."""
        l = np.asarray(l, dtype=float)
        l = l[l > 0]
        e = self.psi(l)
        return np.abs(l / e - self.lam - self.gamma * np.asarray(self.penalty.deriv(e)))


def square_maximizer(l, lam: float, gamma: float) -> np.ndarray:
    """Positive root of 2 gamma e^2 + lam e - l = 0 (lam >= 0), cancellation-free."""
    l = np.asarray(l, dtype=float)
    s = np.sqrt(lam * lam + 8 * gamma * l)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(l > 0, 2 * l / (s + lam), 0.0)


def pointwise_maximizer(l, lam: float, gamma: float, penalty: ConvexPenalty) -> np.ndarray:
    """argmax_e  l log e - lam e - gamma phi(e), by bisection on the stationarity residual.

    The residual l/e - lam - gamma phi'(e) is strictly decreasing in e, so a
    bracket grown geometrically in both directions contains the root. Points
    whose residual is non-positive all the way down to 1e-300 maximize at 0.
    """
    l = np.atleast_1d(np.asarray(l, dtype=float))

    def resid(e):
        with np.errstate(divide="ignore", invalid="ignore"):
            r = l / e - lam - gamma * np.asarray(penalty.deriv(e), dtype=float)
        return np.where(np.isnan(r), np.inf, r)

    tiny = 1e-300
    lo = np.ones_like(l)
    hi = np.ones_like(l)
    for _ in range(1100):
        shrink = (resid(lo) <= 0) & (lo >= tiny)
        if not np.any(shrink):
            break
        lo = np.where(shrink, lo / 2, lo)
    at_zero = resid(lo) <= 0
    for _ in range(1100):
        grow = resid(hi) >= 0
        if not np.any(grow):
            break
        hi = np.where(grow, hi * 2, hi)
    for _ in range(MAX_ITER):
        mid = np.sqrt(lo * hi)
        pos = resid(mid) > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi <= lo * (1 + 2 * np.finfo(float).eps)):
            break
    best = np.where(np.abs(resid(lo)) <= np.abs(resid(hi)), lo, hi)
    return np.where(at_zero, 0.0, best)


def _dual_solve(pair: HypothesisPair, penalty: ConvexPenalty, C: float, closed_form: bool):
    """Multipliers (lambda >= 0, gamma >= 0) for the two-constraint problem.

    For fixed gamma, lambda(gamma) makes the null budget tight, or is 0 when
    the budget is slack. The outer search on gamma then drives the penalty
    expectation to C.
    """
    x, w0, _ = pair.grid_weights()
    l = pair.lr(x)
    pos = w0 > 0
    l, w0 = l[pos], w0[pos]

    def psi(lam, gamma):
        if gamma == 0:
            return l / lam
        if closed_form:
            return square_maximizer(l, lam, gamma)
        return pointwise_maximizer(l, lam, gamma, penalty)

    def budget(lam, gamma):
        return float(np.dot(w0, psi(lam, gamma))) - 1.0

    def lam_of(gamma):
        if budget(0.0, gamma) <= 0:
            return 0.0
        hi = 1.0
        for _ in range(MAX_DOUBLINGS * 17):
            if budget(hi, gamma) < 0:
                break
            hi *= 2
        else:
            raise SolverError("no bracket for the budget multiplier", best=hi)
        return _root(lambda lam: budget(lam, gamma), 0.0, hi)

    def pen_excess(gamma):
        lam = lam_of(gamma)
        return float(np.dot(w0, penalty.eval(psi(lam, gamma)))) - C

    g_hi = 1.0
    for _ in range(MAX_DOUBLINGS):
        if pen_excess(g_hi) < 0:
            break
        g_hi *= 2
    else:
        raise SolverError(f"penalty multiplier bracket not found within {MAX_DOUBLINGS} doublings",
                          best=g_hi, residual=pen_excess(g_hi))
    g_lo = g_hi / 2
    for _ in range(MAX_ITER * 5):
        if pen_excess(g_lo) > 0:
            break
        g_lo /= 2
    else:
        raise SolverError("penalty multiplier lower bracket not found", best=g_lo)
    gamma = _root(pen_excess, g_lo, g_hi)
    _check_outer_monotone(pen_excess, g_lo, g_hi)
    return lam_of(gamma), gamma


def _check_outer_monotone(fn, lo: float, hi: float, points: int = 9) -> None:
    gs = np.geomspace(lo, hi, points)
    vals = np.array([fn(g) for g in gs])
    if np.any(np.diff(vals) > 1e-12 * max(1.0, np.max(np.abs(vals)))):
        log.warning("penalty expectation is not monotone in gamma on [%g, %g]", lo, hi)


def _convex(pair: HypothesisPair, penalty: ConvexPenalty, C: float, closed_form: bool):
    C = float(C)
    floor = penalty.floor()
    if not C > floor:
        raise InfeasibleError(f"budget C={C} is not above the penalty floor {floor:g} for e <= 1")
    if pair.expect("null", lambda l: _safe_penalty(penalty, l)) <= C:
        return ConvexConstrainedEVariable(1.0, 0.0, penalty, C, closed_form)
    lam, gamma = _dual_solve(pair, penalty, C, closed_form)
    return ConvexConstrainedEVariable(lam, gamma, penalty, C, closed_form)


def solve_moment(pair: HypothesisPair, C: float) -> ConvexConstrainedEVariable:
    """Second-moment constraint E0[E^2] <= C, via the closed-form pointwise maximizer."""
    if not C > 0:
        raise InfeasibleError(f"second-moment budget must be positive, got C={C}")
    return _convex(pair, PENALTIES["square"], C, closed_form=True)


def solve_convex(pair: HypothesisPair, penalty: ConvexPenalty | str, C: float) -> ConvexConstrainedEVariable:
    """General convex penalty E0[phi(E)] <= C with numerical pointwise maximizers."""
    if isinstance(penalty, str):
        penalty = get_penalty(penalty)
    penalty.check()
    return _convex(pair, penalty, C, closed_form=False)


# ---------------------------------------------------------------------------
# growth

def growth_rate(ev, pair: HypothesisPair) -> GrowthReport:
    """Expected log e-value under the alternative and mean under the null.

    A zero e-value on a point the alternative charges gives growth -inf; it
    is flagged in ``extras`` rather than raised.
    """
    if isinstance(ev, PrivateEVariable):
        m0 = induced_marginal(ev.mechanism, "null", pair)
        m1 = induced_marginal(ev.mechanism, "alt", pair)
        return GrowthReport(ev.growth_under(m1), ev.null_expectation(m0), {"m0": m0, "m1": m1})
    psi = ev.psi if hasattr(ev, "psi") else ev
    levels = getattr(ev, "levels", ())
    extras = {}
    x, _, w1 = pair.grid_weights()
    if np.any((w1 > 0) & (psi(pair.lr(x)) <= 0)):
        growth = -math.inf
        extras["growth_flag"] = "E = 0 on a point charged by the alternative"
    else:
        growth = pair.expect("alt", lambda l: np.log(psi(l)), levels)
    if isinstance(ev, ConvexConstrainedEVariable):
        extras["penalty_expectation"] = pair.expect("null", lambda l: _safe_penalty(ev.penalty, psi(l)))
        extras["second_moment"] = pair.expect("null", lambda l: psi(l) ** 2)
        extras["max_kkt_residual"] = float(np.max(ev.kkt_residual(pair.lr_grid()), initial=0.0))
    return GrowthReport(float(growth), pair.expect("null", psi, levels), extras)


def _safe_penalty(penalty: ConvexPenalty, e) -> np.ndarray:
    # phi at 0 taken as its right limit
    e = np.asarray(e, dtype=float)
    return np.where(e > 0, penalty.eval(np.where(e > 0, e, 1.0)), penalty.eval(1e-300))
