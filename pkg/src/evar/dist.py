"""Distributions, likelihood ratios, expectations and KL divergences.

Discrete laws are finite mass functions. Continuous laws (gaussian, uniform)
are integrated with Gauss-Legendre quadrature on a bounded window. Callers
that integrate a discontinuous or kinked function of the likelihood ratio pass
the offending likelihood-ratio levels; the window is then split at the points
where the ratio crosses those levels so each piece is smooth.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq
from scipy.special import rel_entr

DEFAULT_NODES = 256
MIN_NODES = 16
GAUSS_WINDOW_SD = 8.0
PROB_SUM_TOL = 1e-12
DEGENERATE_TOL = 1e-12
CROSSING_SCAN_POINTS = 4097

DISCRETE_KINDS = ("discrete", "bernoulli")
CONTINUOUS_KINDS = ("gaussian", "uniform")


class IntegrationError(ArithmeticError):
    """A non-finite integrand value was hit at a point carrying mass."""


class AbsoluteContinuityError(ValueError):
    """The alternative charges a point the null does not."""


@lru_cache(maxsize=32)
def _legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


@dataclass(frozen=True)
class Quadrature:
    lo: float
    hi: float
    nodes: int = DEFAULT_NODES

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi) and self.lo < self.hi):
            raise ValueError(f"quadrature window must satisfy lo < hi, got [{self.lo}, {self.hi}]")
        if int(self.nodes) != self.nodes or self.nodes < MIN_NODES:
            raise ValueError(f"quadrature needs at least {MIN_NODES} nodes, got {self.nodes}")

    def rule(self, breaks: Iterable[float] = ()) -> tuple[np.ndarray, np.ndarray]:
        """Composite rule on [lo, hi], one full Legendre rule per piece."""
        cuts = sorted({float(b) for b in breaks if self.lo < b < self.hi})
        edges = [self.lo, *cuts, self.hi]
        t, w = _legendre(int(self.nodes))
        xs, ws = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            half = 0.5 * (b - a)
            xs.append(a + half * (t + 1.0))
            ws.append(half * w)
        return np.concatenate(xs), np.concatenate(ws)

    def to_json(self) -> dict:
        return {"lo": self.lo, "hi": self.hi, "nodes": int(self.nodes)}


@dataclass(frozen=True, eq=False)
class Distribution:
    """A univariate law: finite mass function or quadrature-backed density.

    Build instances with the ``discrete``, ``bernoulli``, ``gaussian`` and
    ``uniform`` constructors rather than directly.
    """

    kind: str
    params: dict = field(default_factory=dict)
    support: np.ndarray | None = None
    probs: np.ndarray | None = None
    quad: Quadrature | None = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def discrete(cls, support: Sequence[float], probs: Sequence[float]) -> "Distribution":
        support, probs = _prune(support, probs)
        return cls("discrete", {}, support, probs)

    @classmethod
    def bernoulli(cls, p: float) -> "Distribution":
        p = float(p)
        if not 0.0 <= p <= 1.0:
            raise ValueError(f"Bernoulli parameter must lie in [0, 1], got {p}")
        support, probs = _prune([0.0, 1.0], [1.0 - p, p])
        return cls("bernoulli", {"p": p}, support, probs)

    @classmethod
    def gaussian(cls, mean: float, sd: float = 1.0, quad: Quadrature | None = None) -> "Distribution":
        mean, sd = float(mean), float(sd)
        if not (np.isfinite(mean) and np.isfinite(sd) and sd > 0):
            raise ValueError(f"gaussian needs finite mean and sd > 0, got ({mean}, {sd})")
        if quad is None:
            quad = Quadrature(mean - GAUSS_WINDOW_SD * sd, mean + GAUSS_WINDOW_SD * sd)
        return cls("gaussian", {"mean": mean, "sd": sd}, quad=quad)

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0, quad: Quadrature | None = None) -> "Distribution":
        lo, hi = float(lo), float(hi)
        if not lo < hi:
            raise ValueError(f"uniform needs lo < hi, got [{lo}, {hi}]")
        if quad is None:
            quad = Quadrature(lo, hi)
        return cls("uniform", {"lo": lo, "hi": hi}, quad=quad)

    # -- densities --------------------------------------------------------
    @property
    def is_discrete(self) -> bool:
        return self.kind in DISCRETE_KINDS

    def logpdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            m, s = self.params["mean"], self.params["sd"]
            return -0.5 * ((x - m) / s) ** 2 - np.log(s) - 0.5 * np.log(2 * np.pi)
        if self.kind == "uniform":
            lo, hi = self.params["lo"], self.params["hi"]
            inside = (x >= lo) & (x <= hi)
            return np.where(inside, -np.log(hi - lo), -np.inf)
        with np.errstate(divide="ignore"):
            return np.log(self.pdf(x))

    def pdf(self, x) -> np.ndarray:
        """Density for continuous kinds, probability mass for discrete ones."""
        x = np.asarray(x, dtype=float)
        if not self.is_discrete:
            return np.exp(self.logpdf(x))
        idx = np.searchsorted(self.support, x)
        idx = np.clip(idx, 0, len(self.support) - 1)
        hit = self.support[idx] == x
        return np.where(hit, self.probs[idx], 0.0)

    def points(self, breaks: Iterable[float] = (), quad: "Quadrature | None" = None) -> tuple[np.ndarray, np.ndarray]:
        """Evaluation points and their probability weights; ``quad`` overrides the own window."""
        if self.is_discrete:
            return self.support, self.probs
        x, w = (quad or self.quad).rule(breaks)
        return x, w * self.pdf(x)

    @property
    def window(self) -> tuple[float, float]:
        if self.is_discrete:
            return float(self.support[0]), float(self.support[-1])
        return self.quad.lo, self.quad.hi

    @property
    def mean(self) -> float:
        return expectation(self, lambda x: x)

    # -- serialization ----------------------------------------------------
    def to_json(self) -> dict:
        if self.kind == "discrete":
            return {"type": "discrete", "support": self.support.tolist(), "probs": self.probs.tolist()}
        if self.kind == "bernoulli":
            return {"type": "bernoulli", "p": self.params["p"]}
        out = {"type": self.kind, **self.params}
        out["quad"] = self.quad.to_json()
        return out

    @classmethod
    def from_json(cls, spec: dict) -> "Distribution":
        if not isinstance(spec, dict) or "type" not in spec:
            raise ValueError(f"distribution spec needs a 'type' field: {spec!r}")
        kind = spec["type"]
        quad = Quadrature(**spec["quad"]) if spec.get("quad") else None
        if kind == "discrete":
            return cls.discrete(spec["support"], spec["probs"])
        if kind == "bernoulli":
            return cls.bernoulli(spec["p"])
        if kind == "gaussian":
            return cls.gaussian(spec["mean"], spec.get("sd", 1.0), quad)
        if kind == "uniform":
            return cls.uniform(spec["lo"], spec["hi"], quad)
        raise ValueError(f"unknown distribution type {kind!r}")

    def __repr__(self) -> str:
        if self.kind == "discrete":
            return f"Distribution.discrete(n={len(self.support)})"
        args = ", ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"Distribution.{self.kind}({args})"


def _prune(support, probs) -> tuple[np.ndarray, np.ndarray]:
    support = np.asarray(support, dtype=float)
    probs = np.asarray(probs, dtype=float)
    if support.ndim != 1 or support.shape != probs.shape or len(support) == 0:
        raise ValueError("support and probs must be non-empty 1-d sequences of equal length")
    if not (np.all(np.isfinite(support)) and np.all(np.isfinite(probs))):
        raise ValueError("support and probs must be finite")
    if np.any(probs < 0):
        raise ValueError("probabilities must be nonnegative")
    if abs(probs.sum() - 1.0) > PROB_SUM_TOL:
        raise ValueError(f"probabilities sum to {probs.sum()!r}, not 1")
    if np.any(np.diff(support) <= 0):
        raise ValueError("support values must be strictly increasing")
    keep = probs > 0
    return support[keep], probs[keep]


def expectation(dist: Distribution, f: Callable, breaks: Iterable[float] = (),
                quad: Quadrature | None = None) -> float:
    """E[f(X)] for X ~ dist; exact sum for discrete laws, quadrature otherwise."""
    x, w = dist.points(breaks, quad)
    fx = np.broadcast_to(np.asarray(f(x), dtype=float), x.shape)
    bad = (w > 0) & ~np.isfinite(fx)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise IntegrationError(f"integrand is {fx[i]} at x={x[i]!r} (weight {w[i]:.3g})")
    return float(np.dot(w, np.where(w > 0, fx, 0.0)))


class HypothesisPair:
    """A null/alternative pair with likelihood ratio L = d(alt)/d(null).

    Both members must be discrete, or both continuous. Discrete pairs live on
    the union of the two supports; continuous pairs share a quadrature window
    covering both members.
    """

    def __init__(self, null_dist: Distribution, alt_dist: Distribution):
        if null_dist.is_discrete != alt_dist.is_discrete:
            raise ValueError("null and alternative must both be discrete or both continuous")
        self.null_dist = null_dist
        self.alt_dist = alt_dist
        self.is_discrete = null_dist.is_discrete
        if self.is_discrete:
            self.support = np.union1d(null_dist.support, alt_dist.support)
            self.quad = None
        else:
            q0, q1 = null_dist.quad, alt_dist.quad
            self.quad = Quadrature(min(q0.lo, q1.lo), max(q0.hi, q1.hi), max(q0.nodes, q1.nodes))
            self.support = None
        x = self.grid()
        p0, p1 = null_dist.pdf(x), alt_dist.pdf(x)
        bad = (p1 > 0) & (p0 <= 0)
        if np.any(bad):
            raise AbsoluteContinuityError(
                f"alternative has mass at x={x[bad][0]!r} where the null has none")

    def grid(self) -> np.ndarray:
        """The working grid: union support, or the shared quadrature nodes."""
        if self.is_discrete:
            return self.support
        return self.quad.rule()[0]

    def grid_weights(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(x, null weights, alt weights) on the working grid."""
        if self.is_discrete:
            x = self.support
            return x, self.null_dist.pdf(x), self.alt_dist.pdf(x)
        x, w = self.quad.rule()
        return x, w * self.null_dist.pdf(x), w * self.alt_dist.pdf(x)

    def lr(self, x) -> np.ndarray:
        """Likelihood ratio at x (vectorized); zero where neither law has mass."""
        x = np.asarray(x, dtype=float)
        if self.is_discrete:
            p0, p1 = self.null_dist.pdf(x), self.alt_dist.pdf(x)
            if np.any((p1 > 0) & (p0 <= 0)):
                raise AbsoluteContinuityError("likelihood ratio requested where the null has no mass")
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(p0 > 0, p1 / np.where(p0 > 0, p0, 1.0), 0.0)
        l0, l1 = self.null_dist.logpdf(x), self.alt_dist.logpdf(x)
        if np.any(np.isfinite(l1) & ~np.isfinite(l0)):
            raise AbsoluteContinuityError("likelihood ratio requested where the null has no density")
        with np.errstate(invalid="ignore"):
            return np.where(np.isfinite(l0), np.exp(np.where(np.isfinite(l0), l1 - l0, 0.0)), 0.0)

    def lr_grid(self) -> np.ndarray:
        return self.lr(self.grid())

    def is_degenerate(self) -> bool:
        """True when the two laws coincide on the working grid."""
        x, w0, w1 = self.grid_weights()
        return bool(np.max(np.abs(w1 - w0)) <= DEGENERATE_TOL * max(1.0, float(np.max(w0))))

    def crossings(self, levels: Iterable[float], lo: float, hi: float) -> list[float]:
        """Points in (lo, hi) where L crosses any of ``levels`` (continuous pairs)."""
        levels = [float(v) for v in levels if v is not None and np.isfinite(v) and v > 0]
        if self.is_discrete or not levels:
            return []
        xs = np.linspace(lo, hi, CROSSING_SCAN_POINTS)
        with np.errstate(divide="ignore"):
            logl = np.log(self.lr(xs))
        out = []
        for level in levels:
            g = logl - np.log(level)
            sign = np.sign(g)
            for i in np.flatnonzero(sign[:-1] * sign[1:] < 0):
                fn = lambda z, v=np.log(level): float(np.log(self.lr(z)) - v)
                out.append(brentq(fn, xs[i], xs[i + 1], xtol=1e-14, rtol=4 * np.finfo(float).eps))
            out.extend(xs[sign == 0].tolist())
        return sorted(set(out))

    def expect(self, member: Distribution | str, g: Callable, levels: Iterable[float] = ()) -> float:
        """E_member[g(L(X))], splitting the window where L crosses ``levels``."""
        dist = self._member(member)
        if dist.is_discrete:
            return expectation(dist, lambda x: g(self.lr(x)))
        # the pair window covers tails where L * p0 still carries mass
        q = dist.quad
        quad = Quadrature(min(q.lo, self.quad.lo), max(q.hi, self.quad.hi), max(q.nodes, self.quad.nodes))
        breaks = [*self.crossings(levels, quad.lo, quad.hi), q.lo, q.hi]
        return expectation(dist, lambda x: g(self.lr(x)), breaks, quad)

    def prob_above(self, member: Distribution | str, t: float) -> float:
        """P_member(L(X) > t)."""
        return self.expect(member, lambda l: (l > t).astype(float), levels=(t,))

    def _member(self, member) -> Distribution:
        if member == "null":
            return self.null_dist
        if member == "alt":
            return self.alt_dist
        if not isinstance(member, Distribution):
            raise TypeError(f"expected 'null', 'alt' or a Distribution, got {member!r}")
        if member.is_discrete != self.is_discrete:
            raise ValueError("member kind does not match the pair")
        return member

    def to_json(self) -> dict:
        return {"null": self.null_dist.to_json(), "alt": self.alt_dist.to_json()}

    @classmethod
    def from_json(cls, spec: dict) -> "HypothesisPair":
        return cls(Distribution.from_json(spec["null"]), Distribution.from_json(spec["alt"]))

    def __repr__(self) -> str:
        return f"HypothesisPair(null={self.null_dist!r}, alt={self.alt_dist!r})"


@dataclass
class GrowthReport:
    growth_rate: float
    null_expectation: float
    extras: dict = field(default_factory=dict)

    @property
    def is_e_variable(self) -> bool:
        return self.null_expectation <= 1 + 1e-9


def likelihood_ratio(pair: HypothesisPair, x) -> float | np.ndarray:
    """d(alt)/d(null) at x; scalar in, scalar out."""
    out = pair.lr(x)
    return float(out) if np.ndim(out) == 0 else out


def kl_divergence(p1: Distribution, p0: Distribution) -> float:
    """D(p1 || p0) in nats."""
    pair = HypothesisPair(p0, p1)
    if pair.is_discrete:
        x = pair.support
        return float(np.sum(rel_entr(p1.pdf(x), p0.pdf(x))))
    # log L is smooth for the supported kinds, so no window splitting is needed
    x, w = pair.quad.rule()
    w1 = w * p1.pdf(x)
    logl = p1.logpdf(x) - p0.logpdf(x)
    return float(np.dot(w1[w1 > 0], logl[w1 > 0]))


def bernoulli_kl(m1: float, m0: float) -> float:
    """d(Ber(m1) || Ber(m0))."""
    return float(rel_entr(m1, m0) + rel_entr(1.0 - m1, 1.0 - m0))
