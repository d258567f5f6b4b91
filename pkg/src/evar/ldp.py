"""Binary epsilon-LDP mechanisms and the e-variables they induce.

A binary mechanism reports Y=1 with probability e^eps/(1+e^eps) when the
likelihood ratio exceeds its threshold and 1/(1+e^eps) otherwise. The
e-variable on the privatized bit is the ratio of the induced Bernoulli
marginals, so it is valid under the null marginal by construction.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .dist import Distribution, HypothesisPair, bernoulli_kl

log = logging.getLogger(__name__)

FIXED_POINT_DAMPING = 0.5
FIXED_POINT_TOL = 1e-10
FIXED_POINT_MAX_ITER = 10_000
GOLDEN_TOL = 1e-12
SCAN_POINTS = 257
MARGIN_TOL = 1e-14


class SolverError(RuntimeError):
    """A numerical solver failed; carries its best iterate."""

    def __init__(self, msg: str, best=None, residual: float | None = None):
        super().__init__(msg)
        self.best = best
        self.residual = residual


class DominanceError(ValueError):
    """A composite member breaks the stochastic-dominance ordering."""

    def __init__(self, msg: str, report=None):
        super().__init__(msg)
        self.report = report


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float

    def __post_init__(self):
        if not (isinstance(self.epsilon, (int, float)) and math.isfinite(self.epsilon) and self.epsilon > 0):
            raise ValueError(f"privacy budget must be positive and finite, got {self.epsilon!r}")

    @property
    def p_high(self) -> float:
        return float(expit(self.epsilon))

    @property
    def p_low(self) -> float:
        return float(expit(-self.epsilon))


def _budget(eps) -> PrivacyBudget:
    return eps if isinstance(eps, PrivacyBudget) else PrivacyBudget(float(eps))


@dataclass(frozen=True)
class BinaryMechanism:
    """Q(1|x) = p_high if L(x) > threshold else p_low."""

    threshold: float
    epsilon: PrivacyBudget

    def prob_one(self, lr) -> np.ndarray:
        lr = np.asarray(lr, dtype=float)
        return np.where(lr > self.threshold, self.epsilon.p_high, self.epsilon.p_low)

    def channel(self, lr) -> np.ndarray:
        """Rows [Q(0|x), Q(1|x)] for each likelihood-ratio value.

        Q(0|x) is taken from the opposite sigmoid rather than 1 - Q(1|x), which
        would lose relative precision when e^eps is large.
        """
        above = np.asarray(lr, dtype=float) > self.threshold
        hi, lo = self.epsilon.p_high, self.epsilon.p_low
        return np.stack([np.where(above, lo, hi), np.where(above, hi, lo)], axis=-1)

    def check_ldp(self, lr) -> bool:
        """Both output-likelihood ratios bounded by e^eps over the given inputs."""
        q = self.channel(lr)
        bound = math.exp(self.epsilon.epsilon)
        hi, lo = q.max(axis=0), q.min(axis=0)
        return bool(np.all(hi <= bound * lo * (1 + 1e-15)))


@dataclass(frozen=True)
class PrivateEVariable:
    v0: float
    v1: float
    mechanism: BinaryMechanism
    m0: float
    m1: float

    @property
    def marginals(self) -> tuple[float, float]:
        return self.m0, self.m1

    @property
    def growth(self) -> float:
        return bernoulli_kl(self.m1, self.m0)

    def evaluate(self, y) -> np.ndarray:
        y = np.asarray(y)
        return np.where(y == 1, self.v1, self.v0)

    def null_expectation(self, m: float | None = None) -> float:
        m = self.m0 if m is None else m
        return m * self.v1 + (1 - m) * self.v0

    def growth_under(self, m: float) -> float:
        """E[log E] when the privatized bit is Ber(m)."""
        out = 0.0
        if m > 0:
            out += m * math.log(self.v1)
        if m < 1:
            out += (1 - m) * math.log(self.v0)
        return out


@dataclass(frozen=True)
class ThresholdSolution:
    t: float
    mechanism: BinaryMechanism
    J: float
    m0: float
    m1: float
    residual: float
    interior: bool
    method: str

    def __iter__(self):
        # allows ``t, mech, J = solve_binary_threshold(...)``
        return iter((self.t, self.mechanism, self.J))


@dataclass
class WealthTrajectory:
    log_wealths: np.ndarray
    ys: np.ndarray
    e_values: np.ndarray
    seed: int
    config: dict = field(default_factory=dict)

    @property
    def wealths(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_wealths)

    @property
    def mean_log_growth(self) -> float:
        return float(self.log_wealths[-1] / (len(self.log_wealths) - 1))


def induced_marginal(mech: BinaryMechanism, pair_member: Distribution | str, pair: HypothesisPair) -> float:
    """Probability that the mechanism outputs 1 when X ~ pair_member."""
    eps = mech.epsilon
    p = pair.prob_above(pair_member, mech.threshold)
    return eps.p_low + (eps.p_high - eps.p_low) * p


def _marginals(pair: HypothesisPair, t: float, eps: PrivacyBudget) -> tuple[float, float]:
    mech = BinaryMechanism(t, eps)
    return induced_marginal(mech, "null", pair), induced_marginal(mech, "alt", pair)


def objective_kl(mech: BinaryMechanism, pair: HypothesisPair) -> float:
    """KL divergence between the induced Bernoulli marginals."""
    m0 = induced_marginal(mech, "null", pair)
    m1 = induced_marginal(mech, "alt", pair)
    return bernoulli_kl(m1, m0)


def kairouz_mechanism(pair: HypothesisPair, eps) -> BinaryMechanism:
    """Two-output staircase mechanism: low output wherever p0 >= p1."""
    return BinaryMechanism(1.0, _budget(eps))


def threshold_map(m0: float, m1: float) -> float:
    """Stationarity map for the threshold given the induced marginals.

    Tends to 1 as the marginals merge, which keeps iteration well defined on
    flat stretches of the objective.
    """
    if abs(m1 - m0) <= MARGIN_TOL:
        return 1.0
    log_odds = math.log(m1 * (1 - m0) / (m0 * (1 - m1)))
    return (m1 - m0) / (m0 * (1 - m0) * log_odds)


def _solution(pair, t, eps, method) -> ThresholdSolution:
    m0, m1 = _marginals(pair, t, eps)
    rhs = threshold_map(m0, m1)
    interior = abs(m1 - m0) > MARGIN_TOL
    return ThresholdSolution(t, BinaryMechanism(t, eps), bernoulli_kl(m1, m0), m0, m1,
                             abs(t - rhs), interior, method)


def solve_binary_threshold(pair: HypothesisPair, eps) -> ThresholdSolution:
    """Optimal threshold for a binary eps-LDP mechanism.

    Discrete pairs are solved exactly by enumerating thresholds at the distinct
    likelihood-ratio values. Continuous pairs run a damped fixed-point
    iteration and a scan plus golden-section search over log t; the candidate
    with the larger objective is returned.
    """
    eps = _budget(eps)
    if pair.is_degenerate():
        return _solution(pair, 1.0, eps, "degenerate")
    if pair.is_discrete:
        return _solve_discrete(pair, eps)
    return _solve_continuous(pair, eps)


def _solve_discrete(pair: HypothesisPair, eps: PrivacyBudget) -> ThresholdSolution:
    x, w0, w1 = pair.grid_weights()
    lr = pair.lr(x)
    levels = np.unique(lr)
    # P(L > level) for each distinct level, from the top down
    order = np.argsort(lr)
    tail0 = 1.0 - np.cumsum(w0[order])
    tail1 = 1.0 - np.cumsum(w1[order])
    last = np.searchsorted(lr[order], levels, side="right") - 1
    a0, a1 = np.clip(tail0[last], 0, 1), np.clip(tail1[last], 0, 1)
    span = eps.p_high - eps.p_low
    m0s, m1s = eps.p_low + span * a0, eps.p_low + span * a1
    J = np.array([bernoulli_kl(b, a) for a, b in zip(m0s, m1s)])
    k = int(np.argmax(J))
    lo = levels[k]
    hi = levels[k + 1] if k + 1 < len(levels) else np.inf
    rhs = threshold_map(m0s[k], m1s[k])
    # any t in [lo, hi) gives the same mechanism; prefer the stationary one
    t = rhs if lo <= rhs < hi else float(lo)
    return _solution(pair, float(t), eps, "enumeration")


def _log_t_range(pair: HypothesisPair) -> tuple[float, float]:
    lr = pair.lr_grid()
    lr = lr[lr > 0]
    return float(np.log(lr.min())), float(np.log(lr.max()))


def _golden_max(f, a: float, b: float, tol: float = GOLDEN_TOL, max_iter: int = 200) -> float:
    g = (math.sqrt(5) - 1) / 2
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol * max(1.0, abs(a) + abs(b)):
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def scan_then_golden(f, lo: float, hi: float, points: int = SCAN_POINTS) -> float:
    """Maximize f on [lo, hi]: coarse scan, then golden section around the best cell."""
    grid = np.linspace(lo, hi, points)
    vals = np.array([f(z) for z in grid])
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, points - 1)]
    z = _golden_max(f, a, b)
    return z if f(z) >= vals[k] else float(grid[k])


def _solve_continuous(pair: HypothesisPair, eps: PrivacyBudget) -> ThresholdSolution:
    def J_at(t):
        m0, m1 = _marginals(pair, t, eps)
        return bernoulli_kl(m1, m0)

    candidates = []
    t, converged = 1.0, False
    for _ in range(FIXED_POINT_MAX_ITER):
        m0, m1 = _marginals(pair, t, eps)
        t_next = (1 - FIXED_POINT_DAMPING) * t + FIXED_POINT_DAMPING * threshold_map(m0, m1)
        if abs(t_next - t) <= FIXED_POINT_TOL * max(1.0, abs(t)):
            t, converged = t_next, True
            break
        t = t_next
    if converged:
        candidates.append(_solution(pair, t, eps, "fixed-point"))
    else:
        log.info("threshold fixed point did not settle; relying on golden-section search")

    lo, hi = _log_t_range(pair)
    z = scan_then_golden(lambda s: J_at(math.exp(s)), lo, hi)
    candidates.append(_solution(pair, math.exp(z), eps, "golden-section"))
    best = max(candidates, key=lambda s: s.J)
    if not np.isfinite(best.J):
        raise SolverError("no finite objective found for the threshold", best=best.t, residual=best.residual)
    return best


def private_evariable(mech: BinaryMechanism, pair: HypothesisPair) -> PrivateEVariable:
    """E = dM1/dM0 on the privatized bit."""
    m0 = induced_marginal(mech, "null", pair)
    m1 = induced_marginal(mech, "alt", pair)
    return PrivateEVariable(v0=(1 - m1) / (1 - m0), v1=m1 / m0, mechanism=mech, m0=m0, m1=m1)


def kelly_fraction(q: float, eps) -> float:
    """Privacy-attenuated Kelly fraction (2q - 1) * tanh(eps / 2)."""
    if not 0.5 < q < 1:
        raise ValueError(f"q must lie in (1/2, 1), got {q}")
    eps = _budget(eps)
    return (2 * q - 1) * math.tanh(eps.epsilon / 2)


def simulate_ldp_kelly(q_true: float, q_alt: float, eps, rounds: int, seed: int = 0) -> WealthTrajectory:
    if rounds < 1:
        raise ValueError("rounds must be at least 1")
    if not 0 < q_true < 1:
        raise ValueError(f"q_true must lie in (0, 1), got {q_true}")
    eps = _budget(eps)
    f = kelly_fraction(q_alt, eps)
    rng = np.random.default_rng(seed)
    x = rng.random(rounds) < q_true
    flip = rng.random(rounds) < eps.p_low
    y = (x ^ flip).astype(np.int8)
    e = 1.0 + f * (2.0 * y - 1.0)
    log_w = np.concatenate([[0.0], np.cumsum(np.log(e))])
    cfg = {"q_alt": q_alt, "q_true": q_true, "epsilon": eps.epsilon, "rounds": rounds}
    return WealthTrajectory(log_w, y, e, seed, cfg)


def randomized_postprocess(pair: HypothesisPair, ev: PrivateEVariable, x, u) -> np.ndarray:
    """E as a function of (L(x), u) with u ~ Uniform[0, 1) independent of x.

    Returns v1 exactly when u < Q(1|x), so P_u(v1 | x) equals the channel.
    """
    lr = pair.lr(x)
    u = np.asarray(u, dtype=float)
    eps = ev.mechanism.epsilon
    above = lr > ev.mechanism.threshold
    fire = (above & (u < eps.p_high)) | (~above & (u < eps.p_low))
    out = np.where(fire, ev.v1, ev.v0)
    return float(out) if np.ndim(out) == 0 else out


@dataclass
class MemberCheck:
    label: str
    role: str
    marginal: float
    margin: float
    null_expectation: float
    growth: float
    ok: bool


@dataclass
class CompositeLDPReport:
    epsilon: float
    threshold: float
    m0_star: float
    m1_star: float
    worst_case_growth: float
    members: list[MemberCheck]
    tol: float

    @property
    def ok(self) -> bool:
        return all(m.ok for m in self.members)

    @property
    def violations(self) -> list[MemberCheck]:
        return [m for m in self.members if not m.ok]

    @property
    def argmin_alt_growth(self) -> str | None:
        alts = [m for m in self.members if m.role == "alt"]
        return min(alts, key=lambda m: m.growth).label if alts else None


def composite_ldp(problem, eps, tol: float | None = None, strict: bool = True):
    """Optimal binary LDP e-variable for a composite problem with an LFD pair.

    Solves the simple problem on the LFD pair, then checks that every supplied
    null member has output-1 probability no larger than the LFD null's and
    every alternative member no smaller than the LFD alternative's.
    """
    eps = _budget(eps)
    pair = problem.lfd
    tol = problem.default_tol if tol is None else tol
    sol = solve_binary_threshold(pair, eps)
    ev = private_evariable(sol.mechanism, pair)
    if ev.m1 <= ev.m0 + MARGIN_TOL:
        log.warning("LFD marginals coincide (m0*=%g, m1*=%g); the composite classes may touch", ev.m0, ev.m1)
    members = []
    for label, dist in problem.null_members:
        m = induced_marginal(sol.mechanism, dist, pair)
        ne = ev.null_expectation(m)
        members.append(MemberCheck(label, "null", m, ev.m0 - m, ne, ev.growth_under(m),
                                   m <= ev.m0 + tol and ne <= 1 + tol))
    for label, dist in problem.alt_members:
        m = induced_marginal(sol.mechanism, dist, pair)
        members.append(MemberCheck(label, "alt", m, m - ev.m1, ev.null_expectation(m), ev.growth_under(m),
                                   m >= ev.m1 - tol))
    report = CompositeLDPReport(eps.epsilon, sol.t, ev.m0, ev.m1, ev.growth, members, tol)
    if strict and not report.ok:
        bad = report.violations[0]
        raise DominanceError(
            f"{bad.role} member {bad.label!r} breaks dominance (margin {bad.margin:.3g}); "
            "the supplied pair is not least favorable", report)
    return ev, report
