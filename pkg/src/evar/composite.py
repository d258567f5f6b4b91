"""Composite testing through a least favorable pair.

A simple-vs-simple solution that is a non-decreasing function of the LFD
likelihood ratio stays valid for every null member and keeps its growth for
every alternative member. The member grids here are the checkable stand-in
for the full families.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .dist import Distribution, HypothesisPair, kl_divergence

DISCRETE_TOL = 1e-12
QUADRATURE_TOL = 1e-8
FAMILIES = ("gaussian-location", "bernoulli")
_FAMILY_ALIASES = {"gauss-mlr": "gaussian-location", "gaussian": "gaussian-location",
                   "bernoulli-mlr": "bernoulli"}


class LiftError(ValueError):
    """The simple solution is not monotone in the LFD likelihood ratio."""


class LFDPair(HypothesisPair):
    """(P0*, P1*) with L* = dP1*/dP0*."""

    def __init__(self, p0_star: Distribution, p1_star: Distribution):
        super().__init__(p0_star, p1_star)
        total = self.expect("null", lambda l: l)
        tol = DISCRETE_TOL if self.is_discrete else QUADRATURE_TOL
        if abs(total - 1) > tol:
            raise ValueError(f"E_P0*[L*] = {total!r}, expected 1")
        if not np.isfinite(kl_divergence(p1_star, p0_star)):
            raise ValueError("KL(P1*, P0*) is not finite")

    @property
    def p0_star(self) -> Distribution:
        return self.null_dist

    @property
    def p1_star(self) -> Distribution:
        return self.alt_dist

    def lr_star(self, x):
        return self.lr(x)


@dataclass
class CompositeProblem:
    lfd: LFDPair
    null_members: list = field(default_factory=list)
    alt_members: list = field(default_factory=list)

    def __post_init__(self):
        self.null_members = [_labelled(m) for m in self.null_members]
        self.alt_members = [_labelled(m) for m in self.alt_members]

    @property
    def default_tol(self) -> float:
        return DISCRETE_TOL if self.lfd.is_discrete else QUADRATURE_TOL


def _labelled(member):
    if isinstance(member, Distribution):
        return repr(member), member
    label, dist = member
    return str(label), dist


def mlr_boundary_lfd(family: str, theta0: float, theta1: float) -> LFDPair:
    """Boundary members of a one-sided separated MLR family as the LFD pair."""
    family = _FAMILY_ALIASES.get(family, family)
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {FAMILIES}")
    if not theta0 < theta1:
        raise ValueError(f"families must be separated: theta0={theta0} is not below theta1={theta1}")
    return LFDPair(family_member(family, theta0), family_member(family, theta1))


def family_member(family: str, theta: float) -> Distribution:
    family = _FAMILY_ALIASES.get(family, family)
    if family == "gaussian-location":
        return Distribution.gaussian(theta, 1.0)
    if family == "bernoulli":
        return Distribution.bernoulli(theta)
    raise ValueError(f"unknown family {family!r}")


def mlr_problem(family: str, theta0: float, theta1: float,
                null_grid: Sequence[float], alt_grid: Sequence[float]) -> CompositeProblem:
    lfd = mlr_boundary_lfd(family, theta0, theta1)
    if any(t > theta0 for t in null_grid) or any(t < theta1 for t in alt_grid):
        raise ValueError("null grid must lie at or below theta0 and alternative grid at or above theta1")
    nulls = [(f"theta={t:g}", family_member(family, t)) for t in null_grid]
    alts = [(f"theta={t:g}", family_member(family, t)) for t in alt_grid]
    return CompositeProblem(lfd, nulls, alts)


@dataclass
class CompositeEVariable:
    psi: Callable
    lfd: LFDPair
    provenance: str
    table_l: np.ndarray = field(default_factory=lambda: np.empty(0))
    table_e: np.ndarray = field(default_factory=lambda: np.empty(0))
    levels: tuple = ()
    claimed_growth: float = float("nan")

    def __call__(self, x) -> np.ndarray:
        return self.psi(self.lfd.lr(x))


def _tabulate(psi, lfd: LFDPair):
    l = np.unique(lfd.lr_grid())
    return l, np.asarray(psi(l), dtype=float)


def lift(psi_source, problem: CompositeProblem) -> CompositeEVariable:
    """Wrap a monotone simple solution on the LFD pair as a composite e-variable."""
    psi = psi_source.psi if hasattr(psi_source, "psi") else psi_source
    lfd = problem.lfd
    l, e = _tabulate(psi, lfd)
    if np.any(np.diff(e) < 0):
        k = int(np.flatnonzero(np.diff(e) < 0)[0])
        raise LiftError(f"psi decreases between L*={l[k]:.6g} and L*={l[k + 1]:.6g}; lift refused")
    levels = tuple(getattr(psi_source, "levels", ()))
    with np.errstate(divide="ignore"):
        growth = lfd.expect("alt", lambda z: np.log(psi(z)), levels)
    return CompositeEVariable(psi, lfd, type(psi_source).__name__, l, e, levels, growth)


@dataclass
class MemberResult:
    label: str
    role: str
    value: float
    margin: float
    ok: bool


@dataclass
class CompositeReport:
    tol: float
    reference_growth: float
    members: list

    @property
    def ok(self) -> bool:
        return all(m.ok for m in self.members)

    @property
    def violations(self) -> list:
        return [m for m in self.members if not m.ok]

    @property
    def argmin_alt_growth(self) -> str | None:
        alts = [m for m in self.members if m.role == "alt"]
        return min(alts, key=lambda m: m.value).label if alts else None

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "tol": self.tol,
            "reference_growth": self.reference_growth,
            "argmin_alt_growth": self.argmin_alt_growth,
            "members": [vars(m) for m in self.members],
        }


def validate_composite(ev: CompositeEVariable, problem: CompositeProblem, tol: float | None = None) -> CompositeReport:
    """Null means and alternative growths of psi(L*) across the member grids.

    Null rows hold E_P0[psi(L*)] with margin 1 - value; alternative rows hold
    E_P1[log psi(L*)] with margin value - E_P1*[log psi(L*)]. A row fails
    when its margin is below -tol.
    """
    tol = problem.default_tol if tol is None else tol
    lfd = ev.lfd
    with np.errstate(divide="ignore"):
        ref = lfd.expect("alt", lambda z: np.log(ev.psi(z)), ev.levels)
    rows = []
    for label, dist in problem.null_members:
        val = lfd.expect(dist, ev.psi, ev.levels)
        rows.append(MemberResult(label, "null", val, 1.0 - val, val <= 1.0 + tol))
    for label, dist in problem.alt_members:
        with np.errstate(divide="ignore"):
            val = lfd.expect(dist, lambda z: np.log(ev.psi(z)), ev.levels)
        rows.append(MemberResult(label, "alt", val, val - ref, val >= ref - tol))
    return CompositeReport(tol, ref, rows)
