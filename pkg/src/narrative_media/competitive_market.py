"""Competitive equilibrium for the heterogeneous American-Dream family.

Each outlet serves a negligible share of consumers, so every type takes the
aggregate (P1, P0) as given.  Low-cost types get full information with the
TRUE narrative and act on the state; high-cost types get FATALISTIC and never
act.  The cutoff solves 2c + F(c) = 1.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .distributions import Cdf, parse_cdf
from .menu_design import AggregateBehavior
from .model_core import NARRATIVES, ModelError, Narrative

ROOT_TOL = 1e-10
DEV_TOL = 1e-9
DEV_STEP = 0.05
A_RULES = tuple(itertools.product((0, 1), repeat=2))  # (a(s=0), a(s=1))


@dataclass(frozen=True, eq=False)
class CompetitiveProfile:
    cutoff: float
    sigma: float  # p(a=1 | t=1) in the aggregate
    cdf: Cdf
    residual: float
    nodes: np.ndarray
    utilities: np.ndarray

    @property
    def low_strategy(self) -> dict:
        return {"q0": 0.0, "q1": 1.0, "narrative": Narrative.TRUE.name, "a_rule": [0, 1]}

    @property
    def high_strategy(self) -> dict:
        return {"q0": 0.0, "q1": 1.0, "narrative": Narrative.FATALISTIC.name, "a_rule": [0, 0]}

    def aggregate(self) -> AggregateBehavior:
        return AggregateBehavior(self.cdf(self.cutoff), 0.0)

    @property
    def aggregate_utility(self) -> float:
        F, cb = self.cdf, self.cutoff
        Fc = F(cb)
        return float(0.25 * Fc - 0.5 * F.moment(cb) + self.sigma / 4.0 * (1.0 - Fc))

    def with_cutoff(self, cutoff: float, n: int | None = None) -> "CompetitiveProfile":
        """Same strategies split at another cutoff (aggregate recomputed from it)."""
        return _profile(self.cdf, cutoff, n or len(self.nodes))

    def to_dict(self) -> dict:
        return {
            "F": self.cdf.label,
            "cutoff": self.cutoff,
            "residual": self.residual,
            "sigma": self.sigma,
            "low_types": self.low_strategy,
            "high_types": self.high_strategy,
            "aggregate_utility": self.aggregate_utility,
        }


def _profile(F: Cdf, cutoff: float, n: int) -> CompetitiveProfile:
    if not (0.0 < cutoff < 1.0):
        raise ModelError(f"cutoff: must lie in (0, 1), got {cutoff!r}")
    sigma = F(cutoff)
    nodes = np.linspace(0.0, 1.0, n)
    # the exact cutoff type takes the low-type strategy
    utils = np.where(nodes <= cutoff, 0.25 - nodes / 2.0, sigma / 4.0)
    return CompetitiveProfile(cutoff, sigma, F, abs(2.0 * cutoff + sigma - 1.0), nodes, utils)


def competitive_equilibrium(F="uniform", n: int = 2001) -> CompetitiveProfile:
    F = parse_cdf(F)
    g = lambda c: 2.0 * c + F(c) - 1.0
    c = optimize.bisect(g, 0.0, 1.0, xtol=1e-15, maxiter=200)
    prof = _profile(F, c, n)
    if prof.residual >= ROOT_TOL:
        raise ModelError(f"cutoff equation residual {prof.residual:.3g} exceeds {ROOT_TOL}")
    return prof


def _outcome_beliefs(code: int, p1: float, p0: float) -> np.ndarray:
    """p_N(y=1 | t, a) as a (2, 2) array [t, a] fitted to the aggregate."""
    if code == 0:
        return np.array([[0.0, 1.0], [0.0, 0.5]])
    if code == 1:
        tot = p1 + p0
        rho = p1 / tot if tot > 0.0 else 0.5
        py = 0.5 * (2.0 - rho)  # p(y=1 | a=1); p(y=1 | a=0) = 0
        return np.array([[0.0, py], [0.0, py]])
    if code == 2:
        return np.array([[p0, p0], [p1 / 2.0, p1 / 2.0]])
    py = p0 / 2.0 + p1 / 4.0
    return np.full((2, 2), py)


def deviation_values(c, aggregate: AggregateBehavior, step: float = DEV_STEP):
    """U_c for every (q0, q1, N, a-rule) on the deviation grid.

    Returns (values[types, deviations], table of deviations).
    """
    n = int(round(1.0 / step))
    if abs(n * step - 1.0) > 1e-9:
        raise ModelError(f"deviation step: 1/step must be an integer, got {step!r}")
    qs = np.linspace(0.0, 1.0, n + 1)
    c = np.atleast_1d(np.asarray(c, dtype=float))
    rows, cols = [], []
    for N in NARRATIVES:
        pN = _outcome_beliefs(N.code, aggregate.p1, aggregate.p0)
        for rule in A_RULES:
            for q0 in qs:
                for q1 in qs:
                    # p(s=1|t): t=0 -> q0, t=1 -> q1; state t=1 is the one where y pays off
                    ps1 = np.array([q0, q1])
                    benefit = 0.0
                    cost = 0.0
                    for t in (0, 1):
                        for s, ps in ((0, 1.0 - ps1[t]), (1, ps1[t])):
                            a = rule[s]
                            benefit += 0.5 * ps * t * pN[t, a]
                            cost += 0.5 * ps * a
                    rows.append((benefit, cost))
                    cols.append((float(q0), float(q1), N, rule))
    bc = np.array(rows)
    vals = bc[None, :, 0] - c[:, None] * bc[None, :, 1]
    return vals, cols


@dataclass(frozen=True)
class CompetitiveViolation:
    c: float
    kind: str  # "deviation", "action", "dominance"
    detail: str
    gain: float

    def to_dict(self) -> dict:
        return {"c": self.c, "kind": self.kind, "detail": self.detail, "gain": self.gain}


def verify_competitive(profile: CompetitiveProfile, F=None, step: float = DEV_STEP, n_types: int = 201,
                       tol: float = DEV_TOL) -> list:
    F = parse_cdf(F) if F is not None else profile.cdf
    agg = AggregateBehavior(F(profile.cutoff), 0.0)
    if abs(agg.p1 - profile.sigma) > 0.0:
        raise ModelError("profile sigma does not match F at its cutoff")
    c = np.linspace(0.0, 1.0, n_types)
    vals, cols = deviation_values(c, agg, step)
    low = c <= profile.cutoff
    own = np.where(low, 0.25 - c / 2.0, agg.p1 / 4.0)
    out = []
    best = vals.max(axis=1)
    arg = vals.argmax(axis=1)
    for i in np.flatnonzero(best - own > tol):
        q0, q1, N, rule = cols[arg[i]]
        out.append(CompetitiveViolation(float(c[i]), "deviation", f"q0={q0:g} q1={q1:g} N={N.name} a={list(rule)}", float(best[i] - own[i])))
    # action rule optimality of the assigned strategies (same signal, other rules)
    idx = {(q0, q1, N, rule): j for j, (q0, q1, N, rule) in enumerate(cols)}
    for i in range(n_types):
        N = Narrative.TRUE if low[i] else Narrative.FATALISTIC
        alt = max(vals[i, idx[(0.0, 1.0, N, r)]] for r in A_RULES)
        if alt - own[i] > tol:
            out.append(CompetitiveViolation(float(c[i]), "action", f"{N.name} rule not a best reply", float(alt - own[i])))
    # dominance facts given the aggregate
    by_n = {N: np.array([j for j, col in enumerate(cols) if col[2] is N]) for N in NARRATIVES}
    full_true = vals[:, idx[(0.0, 1.0, Narrative.TRUE, (0, 1))]]
    full_true = np.maximum(full_true, vals[:, idx[(0.0, 1.0, Narrative.TRUE, (0, 0))]])
    gap = vals[:, by_n[Narrative.TRUE]].max(axis=1) - full_true
    for i in np.flatnonzero(gap > tol):
        out.append(CompetitiveViolation(float(c[i]), "dominance", "full information not optimal under TRUE", float(gap[i])))
    gap = vals[:, by_n[Narrative.DENIAL]].max(axis=1) - vals[:, by_n[Narrative.FATALISTIC]].max(axis=1)
    for i in np.flatnonzero(gap > tol):
        out.append(CompetitiveViolation(float(c[i]), "dominance", "DENIAL beats FATALISTIC", float(gap[i])))
    out.sort(key=lambda v: (v.c, v.kind))
    return out
