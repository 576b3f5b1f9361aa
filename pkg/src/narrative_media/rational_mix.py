"""Mixed populations: a share lam of rational consumers, the rest anticipatory.

Everyone has the same cost c and faces one media strategy (q, N) from the
family p(s=1 | t=1) = 1, p(s=1 | t=0) = q.  Rational consumers read any (q, N)
as (q, TRUE).  Non-rational consumers fit N to the joint distribution produced
by both groups, so rational behaviour feeds into their beliefs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .menu_design import _base
from .model_core import NARRATIVES, ModelError, Narrative

Q_STEP = 1e-3
PAIR_STEP = 0.01
TIE = 1e-12


def mixed_objective(q, c, lam):
    """Aggregate payoff of (q, EMPOWERING) when both groups act on s=1."""
    q = np.asarray(q, dtype=float)
    out = lam / 4.0 + (1.0 - lam) * 0.25 * (2.0 - 1.0 / (1.0 + q)) - (1.0 + q) * c / 2.0
    return float(out) if out.ndim == 0 else out


def mixed_objective_derivative(q, c, lam):
    q = np.asarray(q, dtype=float)
    out = (1.0 - lam) / (4.0 * (1.0 + q) ** 2) - c / 2.0
    return float(out) if out.ndim == 0 else out


def _check(c, lam):
    if not (0.0 < c < 0.5):
        raise ModelError(f"c: must lie in (0, 1/2), got {c!r}")
    if not (0.0 <= lam <= 1.0):
        raise ModelError(f"lambda: must lie in [0, 1], got {lam!r}")


def rational_value(q, c):
    """Rational payoff and action: (q, TRUE) with the better of a(1) in {0, 1}."""
    u1 = 0.25 - (1.0 + np.asarray(q, dtype=float)) * c / 2.0
    act = (u1 > TIE).astype(float)
    return np.where(act > 0, u1, 0.0), act


def singleton_values(q, N, c, lam):
    """(aggregate, U_r, U_nr, a_nr) for the singleton menu {(q, N)}, vectorized in q.

    Non-rational behaviour is the media-preferred self-consistent action; with
    nobody acting, beliefs use the vanishing-tremble limit.
    """
    N = Narrative.parse(N)
    q = np.atleast_1d(np.asarray(q, dtype=float))
    u_r, a_r = rational_value(q, c)
    best = np.full(q.shape, -np.inf)
    u_nr = np.full(q.shape, np.nan)
    a_out = np.zeros(q.shape)
    for a_nr in (0.0, 1.0):
        own, _, _ = _option_values(q, N.code, c, lam, a_r, a_nr, a_nr)
        other, _, _ = _option_values(q, N.code, c, lam, a_r, a_nr, 1.0 - a_nr)
        ok = own >= other - TIE if lam < 1.0 else np.ones(q.shape, dtype=bool)
        agg = lam * u_r + (1.0 - lam) * own
        take = ok & (agg > best + TIE)
        best = np.where(take, agg, best)
        u_nr = np.where(take, own, u_nr)
        a_out = np.where(take, a_nr, a_out)
    return best, u_r, u_nr, a_out


def _option_values(q, code, c, lam, a_r, a_agg, a_dev):
    """Payoff of a_dev for a negligible non-rational consumer when the group plays a_agg."""
    p1 = lam * a_r + (1.0 - lam) * a_agg
    p0 = q * p1
    return _base(code, p1, p0, a_dev) - a_dev * (1.0 + q) * c / 2.0, p1, p0


@dataclass(frozen=True)
class MixSolution:
    lam: float
    c: float
    q: float
    N: Narrative
    U_r: float
    U_nr: float
    aggregate: float
    a_nr: int
    per_narrative: dict

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "c": self.c,
            "q": self.q,
            "narrative": self.N.name,
            "U_r": self.U_r,
            "U_nr": self.U_nr,
            "aggregate": self.aggregate,
            "nonrational_action": self.a_nr,
            "per_narrative": {k: v for k, v in self.per_narrative.items()},
        }


def _best_q(N, c, lam, step):
    n = int(round(1.0 / step))
    grid = np.linspace(0.0, 1.0, n + 1)
    vals = singleton_values(grid, N, c, lam)[0]
    k = int(np.argmax(vals))
    q0, v0 = float(grid[k]), float(vals[k])
    lo, hi = max(0.0, q0 - step), min(1.0, q0 + step)
    fun = lambda x: -float(singleton_values(x, N, c, lam)[0][0])
    r = optimize.minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    if -r.fun > v0 + TIE:
        return float(r.x), float(-r.fun)
    return q0, v0


def optimize_mixed(c: float, lam: float, step: float = Q_STEP) -> MixSolution:
    _check(c, lam)
    per = {}
    for N in NARRATIVES:
        per[N] = _best_q(N, c, lam, step)
    top = max(v for _, v in per.values())
    N = next(n for n in NARRATIVES if per[n][1] >= top - TIE)
    q = per[N][0]
    agg, u_r, u_nr, a_nr = singleton_values(q, N, c, lam)
    return MixSolution(lam, c, q, N, float(u_r[0]), float(u_nr[0]), float(agg[0]), int(a_nr[0]),
                       {n.name: {"q": qv, "aggregate": v} for n, (qv, v) in per.items()})


# -- lambda path -------------------------------------------------------------


def empowering_interior(c: float, lam: float) -> tuple[float, float]:
    """First-order condition for (q, EMPOWERING), clamped to [0, 1]."""
    q = min(1.0, max(0.0, np.sqrt((1.0 - lam) / (2.0 * c)) - 1.0))
    return q, mixed_objective(q, c, lam)


def fatalistic_corner(c: float, lam: float) -> float:
    return lam * (0.25 - c / 2.0) + (1.0 - lam) * lam / 4.0


def crossover_lambda(c: float, n_scan: int = 1000):
    """Smallest lam where (0, FATALISTIC) overtakes the EMPOWERING interior optimum (None if never)."""
    _check(c, 0.0)
    d = lambda lam: empowering_interior(c, lam)[1] - fatalistic_corner(c, lam)
    lams = np.linspace(0.0, 1.0, n_scan + 1)[:-1]  # both sides agree at lam = 1
    vals = np.array([d(x) for x in lams])
    for i in range(len(lams) - 1):
        if vals[i] > 0.0 and vals[i + 1] <= 0.0:
            return float(optimize.brentq(d, lams[i], lams[i + 1], xtol=1e-14))
    return None


def lambda_sweep(c: float, lams) -> list:
    from ._parallel import parallel_map

    return parallel_map(lambda lam: optimize_mixed(c, float(lam)), list(lams))


# -- singleton sufficiency -------------------------------------------------


def best_two_item_menu(c: float, lam: float, step: float = PAIR_STEP):
    """Best two-item menu from the restricted family on a q-grid.

    Rational consumers pick their favourite item read as TRUE; non-rational
    consumers pick item and action, and an option counts only if it is a best
    reply given the aggregate it generates.  Returns (value, items).
    """
    _check(c, lam)
    n = int(round(1.0 / step))
    qs = np.linspace(0.0, 1.0, n + 1)
    items = [(q, N) for N in NARRATIVES for q in qs]
    iq = np.array([q for q, _ in items])
    ic = np.array([N.code for _, N in items])
    order = np.lexsort((ic, iq))  # rational tie-break: lower q, then narrative order
    rank = np.empty(len(items), dtype=int)
    rank[order] = np.arange(len(items))
    ur, ar = rational_value(iq, c)
    i, j = np.triu_indices(len(items), k=0)
    # rational choice within each pair
    pick_i = (ur[i] > ur[j] + TIE) | ((np.abs(ur[i] - ur[j]) <= TIE) & (rank[i] <= rank[j]))
    r_item = np.where(pick_i, i, j)
    a_r, q_r, u_r = ar[r_item], iq[r_item], ur[r_item]
    best = np.full(len(i), -np.inf)
    options = [(i, 0.0), (i, 1.0), (j, 0.0), (j, 1.0)]
    for k_idx, a in options:
        p1 = lam * a_r + (1.0 - lam) * a
        p0 = lam * a_r * q_r + (1.0 - lam) * a * iq[k_idx]
        own = _base(ic[k_idx], p1, p0, a) - a * (1.0 + iq[k_idx]) * c / 2.0
        ok = np.ones(len(i), dtype=bool)
        if lam < 1.0:
            for m_idx, b in options:
                alt = _base(ic[m_idx], p1, p0, b) - b * (1.0 + iq[m_idx]) * c / 2.0
                ok &= own >= alt - TIE
        val = lam * u_r + (1.0 - lam) * own
        best = np.where(ok & (val > best), val, best)
    k = int(np.argmax(best))
    return float(best[k]), (items[i[k]], items[j[k]])
