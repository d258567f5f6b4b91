"""Bounded-mean null, Uniform(0, 1) alternative: truncating the numeraire
bet is beaten by re-optimizing the bet under the truncation.

Without a least favorable pair the constrained optimum is not a transform of
the unconstrained one. Everything here is a one-dimensional integral over
[0, 1] against the uniform law.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import brentq

from .dist import Quadrature
from .ldp import _golden_max

NODES = 256
SINGULARITY_GAP = 1e-9
GOLDEN_TOL = 1e-13


def _rule(lo: float, hi: float, lam: float = 0.0, mu: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre on [lo, hi], graded towards lo when 1 + lam (z - mu) nearly vanishes there.

    The integrands have a pole or log singularity at z = mu - 1/lam, just
    left of lo = 0 when lam is close to 1/mu; pieces doubling in width away
    from lo keep the rule accurate.
    """
    breaks = []
    if lam > 0:
        gap = lo - (mu - 1 / lam)
        width = hi - lo
        if 0 < gap < width / 4:
            step = gap
            while step < width:
                breaks.append(lo + step)
                step *= 2
    return Quadrature(lo, hi, NODES).rule(breaks)


def _check_mu(mu: float) -> None:
    if not 0 < mu < 0.5:
        raise ValueError(f"mu must lie in (0, 1/2), got {mu}")


@dataclass(frozen=True)
class CounterexampleConfig:
    mu: float
    c: float

    def __post_init__(self):
        _check_mu(self.mu)
        if not self.c > 1:
            raise ValueError(f"truncation level c must exceed 1, got {self.c}")


@dataclass(frozen=True)
class CounterexampleVerdict:
    lambda_star: float
    lambda_new: float
    growth_estar: float
    growth_eprime: float
    gap: float
    grad_at_star: float
    hypothesis: bool
    hypothesis_value: float
    first_order_residual: float
    invariants_hold: bool | None

    def to_json(self) -> dict:
        return asdict(self)


def numeraire_growth(lam: float, mu: float) -> float:
    """E_Q[log(1 + lam (X - mu))] for X ~ Uniform(0, 1)."""
    z, w = _rule(0.0, 1.0, lam, mu)
    return float(np.dot(w, np.log1p(lam * (z - mu))))


def first_order(lam: float, mu: float, upper: float = 1.0) -> float:
    """Integral over [0, upper] of (z - mu) / (1 + lam (z - mu))."""
    if upper <= 0:
        return 0.0
    z, w = _rule(0.0, upper, lam, mu)
    return float(np.dot(w, (z - mu) / (1 + lam * (z - mu))))


def _maximize(f, grad, hi: float) -> float:
    """Golden section on [0, hi], then a root polish of the derivative.

    Function values alone cannot place a smooth maximum closer than about
    sqrt(machine eps); the derivative root gets the first-order residual to
    rounding level.
    """
    lam = _golden_max(f, 0.0, hi, tol=GOLDEN_TOL)
    step = 1e-6 * max(1.0, lam)
    a, b = max(lam - step, 0.0), min(lam + step, hi)
    if grad(a) > 0 > grad(b):
        lam = brentq(grad, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
    return lam


def solve_lambda_star(mu: float) -> float:
    """Numeraire bet size: maximizer of the uniform log-growth over [0, 1/mu)."""
    _check_mu(mu)
    return _maximize(lambda lam: numeraire_growth(lam, mu), lambda lam: first_order(lam, mu),
                     1 / mu - SINGULARITY_GAP)


def truncation_point(lam: float, mu: float, c: float) -> float:
    """Where 1 + lam (z - mu) reaches c, clamped to [0, 1]."""
    if lam <= 0:
        return 1.0
    return min(max(mu + (c - 1) / lam, 0.0), 1.0)


def constrained_growth(lam: float, mu: float, c: float) -> float:
    """E_Q[log min(c, 1 + lam (X - mu))]."""
    if lam == 0:
        return 0.0
    if not 0 <= lam < 1 / mu:
        raise ValueError(f"lambda must lie in [0, 1/mu), got {lam}")
    zc = truncation_point(lam, mu, c)
    flat = (1 - zc) * math.log(c)
    if zc <= 0:
        return flat
    z, w = _rule(0.0, zc, lam, mu)
    return float(np.dot(w, np.log1p(lam * (z - mu)))) + flat


def constrained_gradient(lam: float, mu: float, c: float) -> float:
    """d/dlam of the truncated growth; the boundary terms cancel."""
    return first_order(lam, mu, truncation_point(lam, mu, c))


def null_validity(lam: float, mu: float, c: float, grid: int = 101) -> float:
    """Worst E_P[min(c, 1 + lam (X - mu))] over the Dirac at mu and two-point laws with mean mu.

    Two-point laws a <= mu <= b carry weight (b - mu)/(b - a) at a. Laws with
    a smaller mean only lower the value, since the map is non-decreasing.
    """
    def e(z):
        return np.minimum(c, 1 + lam * (np.asarray(z) - mu))

    worst = float(e(mu))
    a = np.linspace(0.0, mu, grid)
    b = np.linspace(mu, 1.0, grid)
    A, B = np.meshgrid(a, b, indexing="ij")
    ok = B > A
    pa = np.where(ok, (B - mu) / np.where(ok, B - A, 1.0), 1.0)
    vals = pa * e(A) + (1 - pa) * e(B)
    return max(worst, float(vals[ok].max()))


def verify_counterexample(cfg: CounterexampleConfig) -> CounterexampleVerdict:
    mu, c = cfg.mu, cfg.c
    lam_star = solve_lambda_star(mu)
    hyp_value = mu + (c - 1) / lam_star
    hypothesis = hyp_value < 1
    lam_new = _maximize(lambda lam: constrained_growth(lam, mu, c), lambda lam: constrained_gradient(lam, mu, c),
                        1 / mu - SINGULARITY_GAP)
    g_star = constrained_growth(lam_star, mu, c)
    g_new = constrained_growth(lam_new, mu, c)
    grad = constrained_gradient(lam_star, mu, c)
    holds = None
    if hypothesis:
        holds = bool(g_new - g_star > 0 and lam_new < lam_star and grad < 0)
    return CounterexampleVerdict(
        lambda_star=lam_star,
        lambda_new=lam_new,
        growth_estar=g_star,
        growth_eprime=g_new,
        gap=g_new - g_star,
        grad_at_star=grad,
        hypothesis=hypothesis,
        hypothesis_value=hyp_value,
        first_order_residual=first_order(lam_star, mu),
        invariants_hold=holds,
    )
