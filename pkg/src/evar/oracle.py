"""Brute-force references for small discrete problems.

These are slow on purpose and share no code with the solvers: exhaustive
subset enumeration for the binary-output problems and a lattice search over
Lagrange multipliers for the convex-penalty problem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import rel_entr

from .dist import HypothesisPair

MAX_SUBSET_SUPPORT = 20
MAX_LATTICE_SUPPORT = 50


@dataclass
class OracleResult:
    best_value: float
    best_config: object
    evaluations: int


def _discrete_masses(pair: HypothesisPair, cap: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    if not pair.is_discrete:
        raise ValueError("oracles only handle discrete pairs")
    x = pair.support
    if len(x) > cap:
        raise ValueError(f"support size {len(x)} exceeds the oracle cap of {cap}")
    return x, pair.null_dist.pdf(x), pair.alt_dist.pdf(x)


def _subsets(n: int) -> np.ndarray:
    codes = np.arange(2 ** n, dtype=np.int64)
    return ((codes[:, None] >> np.arange(n)) & 1).astype(float)


def _bern_kl(a, b) -> np.ndarray:
    return rel_entr(a, b) + rel_entr(1 - a, 1 - b)


def brute_force_binary_mechanism(pair: HypothesisPair, eps) -> OracleResult:
    """Max of the induced-marginal KL over every {high, low} assignment of Q(1|x)."""
    eps = float(getattr(eps, "epsilon", eps))
    x, p0, p1 = _discrete_masses(pair, MAX_SUBSET_SUPPORT)
    hi = np.exp(eps) / (1 + np.exp(eps))
    lo = 1 / (1 + np.exp(eps))
    S = _subsets(len(x))
    q = lo + (hi - lo) * S
    m0, m1 = q @ p0, q @ p1
    J = _bern_kl(m1, m0)
    k = int(np.argmax(J))
    high_set = tuple(float(v) for v in x[S[k] > 0])
    return OracleResult(float(J[k]), {"high_set": high_set}, int(len(S)))


def brute_force_quantizer(pair: HypothesisPair) -> OracleResult:
    """Best two-valued e-variable over all subsets S, with u1 = beta/alpha, u0 = (1-beta)/(1-alpha)."""
    x, p0, p1 = _discrete_masses(pair, MAX_SUBSET_SUPPORT)
    S = _subsets(len(x))
    alpha, beta = S @ p0, S @ p1
    degenerate = (alpha <= 0) | (alpha >= 1)
    growth = np.where(degenerate, 0.0, _bern_kl(np.clip(beta, 0, 1), np.clip(alpha, 1e-300, 1 - 1e-16)))
    k = int(np.argmax(growth))
    a, b = float(alpha[k]), float(beta[k])
    cfg = {
        "set": tuple(float(v) for v in x[S[k] > 0]),
        "alpha": a,
        "beta": b,
        "u1": b / a if a > 0 else 1.0,
        "u0": (1 - b) / (1 - a) if a < 1 else 1.0,
    }
    return OracleResult(float(growth[k]), cfg, int(len(S)))


def is_level_set(pair: HypothesisPair, members) -> bool:
    """Whether ``members`` (support values) is an upper or lower level set of L."""
    x = pair.support
    lr = pair.lr(x)
    inside = np.isin(x, np.asarray(members, dtype=float))
    if inside.all() or not inside.any():
        return True
    upper = lr[inside].min() >= lr[~inside].max()
    lower = lr[inside].max() <= lr[~inside].min()
    return bool(upper or lower)


def _maximizers(l, lam, gam, dphi, iters: int = 64) -> np.ndarray:
    """Pointwise argmax of l log e - lam e - gam phi(e), bisecting on log e in [-40, 40].

    Cells whose maximizer escapes the bracket come back as +inf.
    """
    shape = np.broadcast_shapes(l.shape, lam.shape, gam.shape)
    lo = np.full(shape, -40.0)
    hi = np.full(shape, 40.0)

    def slope(u):
        e = np.exp(u)
        return l / e - lam - gam * dphi(e)

    escaped = slope(hi) > 0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        up = slope(mid) > 0
        lo = np.where(up, mid, lo)
        hi = np.where(up, hi, mid)
    e = np.exp(0.5 * (lo + hi))
    e = np.where(l > 0, e, np.where(slope(np.full(shape, -40.0)) > 0, e, 0.0))
    return np.where(escaped, np.inf, e)


def _evaluate(l, w0, w1, phi, dphi, lam, gam):
    """Mean under P0, penalty mean, growth and finiteness for each (lam, gam) cell."""
    E = _maximizers(l[None, :], lam[:, None], gam[:, None], dphi)
    finite = np.all(np.isfinite(E), axis=1)
    Es = np.where(np.isfinite(E), E, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        pen = np.where(Es > 0, phi(np.where(Es > 0, Es, 1.0)), phi(1e-300)) @ w0
        logE = np.where(w1 > 0, np.log(np.where(Es > 0, Es, 0.0)), 0.0)
    return Es @ w0, pen, logE @ w1, finite


def _boundary_lambda(l, w0, w1, phi, dphi, C, gams, iters: int = 80, guess=None):
    """Smallest feasible lambda for each gamma, by doubling then bisection.

    ``guess`` brackets the search as [guess/2, 2 guess] when both ends
    straddle the boundary, which shortens the bisection.
    """

    def feasible(lam):
        mean0, pen, _, finite = _evaluate(l, w0, w1, phi, dphi, lam, gams)
        return finite & (mean0 <= 1.0) & (pen <= C)

    zero_ok = feasible(np.zeros_like(gams))
    lo = np.zeros_like(gams)
    hi = np.ones_like(gams)
    if guess is not None and guess > 0:
        a, b = np.full_like(gams, guess / 2), np.full_like(gams, 2 * guess)
        if not feasible(a).any() and feasible(b).all():
            lo, hi, iters = a, b, 56
    for _ in range(200):
        bad = ~feasible(hi)
        if not bad.any():
            break
        hi = np.where(bad, 2 * hi, hi)
    ok = feasible(hi)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        f = feasible(mid)
        hi = np.where(f, mid, hi)
        lo = np.where(f, lo, mid)
    lam = np.where(zero_ok, 0.0, hi)
    _, _, growth, _ = _evaluate(l, w0, w1, phi, dphi, lam, gams)
    return lam, np.where(ok | zero_ok, growth, -np.inf)


def grid_dual_oracle(pair: HypothesisPair, penalty, C: float, size: int = 96,
                     zoom_size: int = 17, zooms: int = 60) -> OracleResult:
    """Best feasible growth over a gamma lattice with lambda on the feasibility boundary.

    For each gamma the smallest lambda meeting both the budget and the
    penalty bound is found by bisection; growth is non-increasing in lambda,
    so that is the best cell in its column. The gamma lattice is then zoomed
    around the incumbent. Every evaluated cell is feasible, so the result is
    a lower bound on the optimum.
    """
    x, p0, p1 = _discrete_masses(pair, MAX_LATTICE_SUPPORT)
    l = pair.lr(x)
    phi, dphi = penalty.eval, penalty.deriv
    gams = np.concatenate([[0.0], np.geomspace(1e-10, 1e6, size - 1)])
    lams, growth = _boundary_lambda(l, p0, p1, phi, dphi, C, gams)
    evals = gams.size
    k = int(np.argmax(growth))
    if not np.isfinite(growth[k]):
        return OracleResult(-np.inf, {"feasible": False}, evals)
    best, bl, bg = growth[k], lams[k], gams[k]
    lo, hi = gams[max(k - 1, 0)], gams[min(k + 1, size - 1)]
    for _ in range(zooms):
        gams = np.linspace(lo, hi, zoom_size)
        lams, growth = _boundary_lambda(l, p0, p1, phi, dphi, C, gams, guess=bl)
        evals += gams.size
        k = int(np.argmax(growth))
        if growth[k] >= best:
            best, bl, bg = growth[k], lams[k], gams[k]
        lo, hi = gams[max(k - 1, 0)], gams[min(k + 1, zoom_size - 1)]
        if hi - lo <= 1e-15 * max(hi, 1e-300):
            break
    return OracleResult(float(best), {"lambda": float(bl), "gamma": float(bg), "feasible": True}, evals)
