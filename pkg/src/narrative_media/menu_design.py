"""Menu design for a monopoly platform facing heterogeneous action costs.

Family: binary American-Dream environment, type c in [0, 1] drawn from a cdf F,
signals restricted to p(s=1 | t=1) = 1 and p(s=1 | t=0) = q.  A type always
plays a=0 after s=0, so its behaviour is summarized by a1 = a(s=1).

All narratives are fitted to the population-wide joint distribution, so a
type's payoff depends on the aggregate (P1, P0) = (p(a=1|t=1), p(a=1|t=0)):

    TRUE        1/4 a1                       - a1 (1+q) c / 2
    EMPOWERING  1/4 (2 - P1/(P1+P0)) a1      - a1 (1+q) c / 2
    FATALISTIC  P1/4                         - a1 (1+q) c / 2
    DENIAL      P1/8 + P0/4                  - a1 (1+q) c / 2

Every payoff is affine in c, which is what makes interval assignments and exact
cutoffs possible.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from .distributions import Cdf, parse_cdf
from .model_core import ModelError, Narrative

IC_TOL = 1e-9
FP_TOL = 1e-10
ROOT_TOL = 1e-10
DAMPING = 0.5
Q_STEP = 0.005
MAX_FP_ITERS = 1000
TRUE_MASS = 1e-9  # smallest type mass for which a TRUE item counts as used
ORACLE_Q = tuple(np.round(np.linspace(0.0, 1.0, 11), 10))
LOW_ACTION = (Narrative.FATALISTIC, Narrative.DENIAL)


@dataclass(frozen=True, eq=False)
class TypeGrid:
    nodes: np.ndarray
    weights: np.ndarray
    cdf: Cdf

    @classmethod
    def build(cls, F="uniform", n: int = 2001) -> "TypeGrid":
        if n < 2:
            raise ModelError(f"grid size: need at least 2 nodes, got {n}")
        cdf = parse_cdf(F)
        nodes = np.linspace(0.0, 1.0, n)
        edges = np.concatenate([[0.0], 0.5 * (nodes[1:] + nodes[:-1]), [1.0]])
        weights = np.diff(cdf(edges))
        return cls(nodes, weights / weights.sum(), cdf)

    def __len__(self) -> int:
        return len(self.nodes)


@dataclass(frozen=True)
class MenuItem:
    q: float
    N: Narrative

    def __post_init__(self):
        q = float(self.q)
        if not (0.0 <= q <= 1.0):
            raise ModelError(f"menu item q: must lie in [0, 1], got {self.q!r}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "N", Narrative.parse(self.N))

    @property
    def key(self):
        # consumer tie-break: lower q first, then canonical narrative order
        return (self.q, self.N.code)

    def to_dict(self) -> dict:
        return {"q": self.q, "narrative": self.N.name}


@dataclass(frozen=True)
class AggregateBehavior:
    p1: float  # p(a=1 | t=1)
    p0: float  # p(a=1 | t=0)

    def to_dict(self) -> dict:
        return {"p_a1_t1": self.p1, "p_a1_t0": self.p0}


@dataclass(frozen=True, eq=False)
class Assignment:
    """Piecewise-constant choice over types: intervals (lo, hi, item index, a1).

    Intervals are closed on the right, so an exact cutoff type belongs to the
    lower interval; the first interval also contains c = 0.
    """

    items: tuple
    intervals: tuple

    def __post_init__(self):
        items = tuple(self.items)
        ivs = tuple((float(lo), float(hi), int(k), int(a)) for lo, hi, k, a in self.intervals)
        if not ivs:
            raise ModelError("assignment: no intervals")
        if abs(ivs[0][0]) > 1e-12 or abs(ivs[-1][1] - 1.0) > 1e-12:
            raise ModelError("assignment: intervals must cover [0, 1]")
        for (lo, hi, k, a), nxt in zip(ivs, ivs[1:] + (None,)):
            if hi < lo:
                raise ModelError(f"assignment: interval ({lo}, {hi}) is reversed")
            if nxt is not None and abs(nxt[0] - hi) > 1e-12:
                raise ModelError(f"assignment: gap or overlap at c={hi}")
            if not 0 <= k < len(items):
                raise ModelError(f"assignment: item index {k} not in the menu")
            if a not in (0, 1):
                raise ModelError(f"assignment: action a(1) must be 0 or 1, got {a}")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "intervals", ivs)

    @classmethod
    def from_nodes(cls, grid: TypeGrid, items, choice, a1) -> "Assignment":
        """Node-level choices; each node owns the cell between neighbouring midpoints."""
        x = grid.nodes
        edges = np.concatenate([[0.0], 0.5 * (x[1:] + x[:-1]), [1.0]])
        ivs = []
        for i, (k, a) in enumerate(zip(np.asarray(choice), np.asarray(a1))):
            if ivs and ivs[-1][2] == k and ivs[-1][3] == a:
                ivs[-1][1] = edges[i + 1]
            else:
                ivs.append([edges[i], edges[i + 1], int(k), int(a)])
        return cls(tuple(items), tuple(tuple(v) for v in ivs))

    def node_choice(self, nodes: np.ndarray):
        his = np.array([iv[1] for iv in self.intervals])
        j = np.minimum(np.searchsorted(his, nodes, side="left"), len(his) - 1)
        k = np.array([iv[2] for iv in self.intervals])[j]
        a = np.array([iv[3] for iv in self.intervals])[j]
        return k, a

    def to_dict(self) -> dict:
        return {
            "items": [it.to_dict() for it in self.items],
            "intervals": [{"lo": lo, "hi": hi, "item": k, "a1": a} for lo, hi, k, a in self.intervals],
        }


def aggregate_behavior(assignment: Assignment, grid: TypeGrid) -> AggregateBehavior:
    F = grid.cdf
    p1 = p0 = 0.0
    for lo, hi, k, a in assignment.intervals:
        if a:
            mass = F(hi) - F(lo)
            p1 += mass
            p0 += mass * assignment.items[k].q
    return AggregateBehavior(p1, p0)


# -- payoffs ---------------------------------------------------------------


def _base(code, p1, p0, a1):
    """Half of p_N(y=1 | t=1, a) before the cost term; arrays broadcast."""
    code = np.asarray(code)
    tot = p1 + p0
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(tot > 0.0, p1 / np.where(tot > 0.0, tot, 1.0), 0.5)
    act = np.where(code == 0, 0.25, 0.25 * (2.0 - rho)) * a1
    return np.select([code <= 1, code == 2], [act, p1 / 4.0], p1 / 8.0 + p0 / 4.0)


def type_utility(c, item: MenuItem, a1: int, aggregate: AggregateBehavior):
    if item.N is Narrative.EMPOWERING and a1 and aggregate.p1 + aggregate.p0 <= 0.0:
        raise ModelError("type_utility: p(a=1) = 0 under the aggregate, so p(y | a=1) is undefined for EMPOWERING")
    base = _base(item.N.code, aggregate.p1, aggregate.p0, a1)
    out = base - a1 * (1.0 + item.q) * np.asarray(c, dtype=float) / 2.0
    return float(out) if np.ndim(out) == 0 else out


def _best_action(c, item: MenuItem, aggregate: AggregateBehavior):
    u0 = type_utility(c, item, 0, aggregate) + np.zeros_like(np.asarray(c, dtype=float))
    if item.N is Narrative.EMPOWERING and aggregate.p1 + aggregate.p0 <= 0.0:
        # vanishing-tremble limit: p(t | a=1) = prior
        u1 = 0.25 * 1.5 - (1.0 + item.q) * np.asarray(c, dtype=float) / 2.0
    else:
        u1 = type_utility(c, item, 1, aggregate)
    a = (u1 > u0 + 1e-15).astype(int)
    return np.where(a == 1, u1, u0), a


@dataclass(frozen=True)
class Violation:
    node: int
    c: float
    kind: str  # "ic" or "action"
    assigned: int
    preferred: int
    gap: float

    def to_dict(self) -> dict:
        return {"node": self.node, "c": self.c, "kind": self.kind, "assigned": self.assigned, "preferred": self.preferred, "gap": self.gap}


def check_incentive_compatibility(menu, assignment: Assignment, grid: TypeGrid, tol: float = IC_TOL) -> list:
    menu = tuple(menu)
    for it in assignment.items:
        if it not in menu:
            raise ModelError(f"assignment uses {it} which is not in the menu")
    agg = aggregate_behavior(assignment, grid)
    c = grid.nodes
    k, a = assignment.node_choice(c)
    own = np.empty(len(c))
    alt = np.empty(len(c))
    for j, it in enumerate(assignment.items):
        sel = k == j
        if not sel.any():
            continue
        cs = c[sel]
        ua = _eval(cs, it, a[sel], agg)
        own[sel] = ua
        alt[sel] = _eval(cs, it, 1 - a[sel], agg)
    index = {id(it): menu.index(it) for it in assignment.items}
    assigned = np.array([index[id(assignment.items[j])] for j in k])
    # cross-item comparison only; a better action on the same item is an "action" violation
    best = np.full(len(c), -np.inf)
    arg = np.zeros(len(c), dtype=int)
    for j, it in enumerate(menu):
        u, _ = _best_action(c, it, agg)
        better = (u > best) & (assigned != j)
        best = np.where(better, u, best)
        arg = np.where(better, j, arg)
    out = []
    for i in np.flatnonzero(alt - own > tol):
        out.append(Violation(int(i), float(c[i]), "action", index[id(assignment.items[k[i]])], index[id(assignment.items[k[i]])], float(alt[i] - own[i])))
    for i in np.flatnonzero(best - own > tol):
        out.append(Violation(int(i), float(c[i]), "ic", index[id(assignment.items[k[i]])], int(arg[i]), float(best[i] - own[i])))
    out.sort(key=lambda v: (v.node, v.kind))
    return out


def _eval(c, item, a1, agg):
    u1 = np.full(len(c), np.nan)
    if np.any(a1 == 1):
        if item.N is Narrative.EMPOWERING and agg.p1 + agg.p0 <= 0.0:
            u1 = 0.375 - (1.0 + item.q) * c / 2.0
        else:
            u1 = type_utility(c, item, 1, agg) + 0.0 * c
    u0 = type_utility(c, item, 0, agg) + 0.0 * c
    return np.where(a1 == 1, u1, u0)


# -- structured search -----------------------------------------------------


def _low_value(code, p1, p0):
    return np.where(code == 2, p1 / 4.0, p1 / 8.0 + p0 / 4.0)


def _no_true_cutoff(F: Cdf, qa, code: int, iters: int = 80):
    """Vectorized bisection of EMP(c) = L(c) in c for each q^a; returns c*."""
    qa = np.atleast_1d(np.asarray(qa, dtype=float))
    aE = 0.25 * (2.0 - 1.0 / (1.0 + qa))
    bE = (1.0 + qa) / 2.0

    def h(c):
        Fc = F(c)
        return aE - bE * c - _low_value(code, Fc, qa * Fc)

    lo, hi = np.zeros_like(qa), np.ones_like(qa)
    top = h(hi) >= 0.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        pos = h(mid) > 0.0
        lo, hi = np.where(pos, mid, lo), np.where(pos, hi, mid)
    c = np.where(top, 1.0, 0.5 * (lo + hi))
    return c, h(c)


def _no_true_value(F: Cdf, qa, code: int):
    qa = np.atleast_1d(np.asarray(qa, dtype=float))
    c, res = _no_true_cutoff(F, qa, code)
    Fc = F(c)
    aE = 0.25 * (2.0 - 1.0 / (1.0 + qa))
    val = aE * Fc - (1.0 + qa) / 2.0 * F.moment(c) + _low_value(code, Fc, qa * Fc) * (1.0 - Fc)
    return val, c, res


def _envelope(p1, p0, qa, qs, code):
    tot = p1 + p0
    with np.errstate(invalid="ignore", divide="ignore"):
        rho = np.where(tot > 0.0, p1 / np.where(tot > 0.0, tot, 1.0), 0.5)
    aE, bE = 0.25 * (2.0 - rho), (1.0 + qa) / 2.0
    aT, bT = 0.25, (1.0 + qs) / 2.0
    L = _low_value(code, p1, p0)
    c1 = (aE - aT) / (bE - bT)
    c2 = (aT - L) / bT
    c3 = (aE - L) / bE
    use = c1 < c2
    lo = np.clip(np.where(use, c1, c3), 0.0, 1.0)
    hi = np.clip(np.where(use, c2, c3), 0.0, 1.0)
    return lo, hi, (aE, bE, aT, bT, L)


def _true_fixed_point(F: Cdf, qa, qs, code: int, max_iter: int = MAX_FP_ITERS):
    """Damped iteration on the aggregate (P1, P0) for the three-item family."""
    qa = np.atleast_1d(np.asarray(qa, dtype=float))
    qs = np.atleast_1d(np.asarray(qs, dtype=float))
    p1, p0 = np.ones_like(qa), qa.copy()
    done = np.zeros(len(qa), dtype=bool)
    res = np.full(len(qa), np.inf)
    for _ in range(max_iter):
        lo, hi, _ = _envelope(p1, p0, qa, qs, code)
        Flo, Fhi = F(lo), F(hi)
        n1, n0 = Fhi, qa * Flo + qs * (Fhi - Flo)
        res = np.maximum(np.abs(n1 - p1), np.abs(n0 - p0))
        done = res < FP_TOL
        if done.all():
            break
        p1 = np.where(done, p1, (1.0 - DAMPING) * p1 + DAMPING * n1)
        p0 = np.where(done, p0, (1.0 - DAMPING) * p0 + DAMPING * n0)
    lo, hi, (aE, bE, aT, bT, L) = _envelope(p1, p0, qa, qs, code)
    Flo, Fhi = F(lo), F(hi)
    Mlo, Mhi = F.moment(lo), F.moment(hi)
    val = aE * Flo - bE * Mlo + aT * (Fhi - Flo) - bT * (Mhi - Mlo) + L * (1.0 - Fhi)
    return val, lo, hi, p1, p0, done, res


@dataclass(frozen=True, eq=False)
class OracleMenu:
    menu: tuple
    utility: float
    menus_checked: int
    unconverged: int

    def to_dict(self) -> dict:
        return {"menu": [it.to_dict() for it in self.menu], "utility": self.utility, "menus_checked": self.menus_checked, "unconverged": self.unconverged}


@dataclass(frozen=True, eq=False)
class MenuSolution:
    menu: tuple
    assignment: Assignment
    aggregate: AggregateBehavior
    utility: float
    low_narrative: Narrative
    cutoffs: tuple  # (c*, c**)
    cutoff_residual: float
    fixed_point_residual: float
    ic_violations: list
    oracle: OracleMenu | None = None
    search_trace: dict = field(default_factory=dict)

    @property
    def oracle_ok(self) -> bool | None:
        if self.oracle is None:
            return None
        return self.utility >= self.oracle.utility - 1e-3

    @property
    def binds(self) -> str:
        c1, c2 = self.cutoffs
        return "c** > c*" if c2 > c1 + 1e-12 else "c** = c*"

    def to_dict(self) -> dict:
        return {
            "menu": [it.to_dict() for it in self.menu],
            "cutoffs": {"c_star": self.cutoffs[0], "c_star_star": self.cutoffs[1], "binds": self.binds},
            "aggregate_utility": self.utility,
            "aggregate": self.aggregate.to_dict(),
            "low_action_narrative": self.low_narrative.name,
            "cutoff_residual": self.cutoff_residual,
            "fixed_point_residual": self.fixed_point_residual,
            "assignment": self.assignment.to_dict(),
            "ic_check": {"violations": len(self.ic_violations), "ok": not self.ic_violations,
                         "first": [v.to_dict() for v in self.ic_violations[:5]]},
            "oracle": None if self.oracle is None else dict(self.oracle.to_dict(), ok=self.oracle_ok),
            "search_trace": self.search_trace,
        }


def _polish_no_true(F, code, q0, step):
    lo, hi = max(0.0, q0 - step), min(1.0, q0 + step)
    fun = lambda q: -float(_no_true_value(F, q, code)[0][0])
    r = optimize.minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    cands = [q0, float(r.x), lo, hi]
    vals = [-fun(q) for q in cands]
    k = int(np.argmax(vals))
    return cands[k], vals[k]


def _refine_true(F, code, qa, qs, step, levels: int = 30):
    def score(a, s):
        if not (0.0 <= s < a <= 1.0):
            return -np.inf, None
        out = _true_fixed_point(F, a, s, code)
        if not out[5][0] or F(out[2][0]) - F(out[1][0]) <= TRUE_MASS:
            return -np.inf, None
        return float(out[0][0]), out

    best, out = score(qa, qs)
    delta = step
    moves = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (-1, -1), (1, -1), (-1, 1)]
    for _ in range(levels):
        for _ in range(8):
            trial = [(score(qa + da * delta, qs + ds * delta), qa + da * delta, qs + ds * delta) for da, ds in moves]
            (v, o), a, s = max(trial, key=lambda z: z[0][0])
            if v <= best + 1e-15:
                break
            best, out, qa, qs = v, o, a, s
        delta /= 2.0
    return qa, qs, best, out


def optimize_menu(grid: TypeGrid | None = None, low_narratives=LOW_ACTION, allow_true: bool = True,
                  q_step: float = Q_STEP, oracle: bool = True) -> MenuSolution:
    """Best menu within the structured family, checked for IC and against a brute-force oracle."""
    grid = grid or TypeGrid.build()
    F = grid.cdf
    low_narratives = tuple(Narrative.parse(n) for n in low_narratives)
    for n in low_narratives:
        if n not in LOW_ACTION:
            raise ModelError(f"low-action narrative must be FATALISTIC or DENIAL, got {n.name}")
    n_q = int(round(1.0 / q_step))
    if abs(n_q * q_step - 1.0) > 1e-9:
        raise ModelError(f"q_step: 1/q_step must be an integer, got {q_step!r}")
    qgrid = np.linspace(0.0, 1.0, n_q + 1)
    trace: dict = {"q_step": q_step, "branches": []}
    cands = []
    for L in low_narratives:
        code = L.code
        vals, _, _ = _no_true_value(F, qgrid, code)
        k = int(np.argmax(vals))
        qa, v = _polish_no_true(F, code, float(qgrid[k]), q_step)
        cands.append((v, 0, L, qa, None))
        trace["branches"].append({"low": L.name, "true_item": False, "grid_best": float(vals[k]), "q_a": qa, "utility": v})
        if allow_true:
            ia, is_ = np.triu_indices(len(qgrid), k=1)
            qa_arr, qs_arr = qgrid[is_], qgrid[ia]  # q* < q^a
            val, lo, hi, _, _, done, _ = _true_fixed_point(F, qa_arr, qs_arr, code)
            uses = done & (F(hi) - F(lo) > TRUE_MASS)
            trace_b = {"low": L.name, "true_item": True, "candidates": int(len(qa_arr)), "unconverged": int((~done).sum())}
            if uses.any():
                j = int(np.argmax(np.where(uses, val, -np.inf)))
                qa2, qs2, v2, _ = _refine_true(F, code, float(qa_arr[j]), float(qs_arr[j]), q_step)
                trace_b.update(grid_best=float(val[j]), q_a=qa2, q_star=qs2, utility=v2)
                if np.isfinite(v2):
                    cands.append((v2, 1, L, qa2, qs2))
            trace["branches"].append(trace_b)
    # a third item must pay for itself by more than IC_TOL; then canonical narrative order
    top = max(z[0] for z in cands)
    cands = [z for z in cands if z[0] >= top - IC_TOL]
    cands.sort(key=lambda z: (z[1], -z[0], z[2].code))
    v, has_true, L, qa, qs = cands[0]
    sol = _assemble(grid, L, qa, qs if has_true else None)
    trace["winner"] = {"low": L.name, "true_item": bool(has_true)}
    orc = brute_force_menu(grid) if oracle else None
    return MenuSolution(**sol, oracle=orc, search_trace=trace)


def _assemble(grid: TypeGrid, L: Narrative, qa: float, qs: float | None) -> dict:
    F = grid.cdf
    emp, low = MenuItem(qa, Narrative.EMPOWERING), MenuItem(1.0, L)  # q is payoff-irrelevant for a low-action item; report q = 1
    if qs is None:
        val, c, res = _no_true_value(F, qa, L.code)
        c1 = c2 = float(c[0])
        items = (emp, low)
        intervals = [(0.0, c1, 0, 1), (c1, 1.0, 1, 0)]
        cut_res = 0.0 if c1 >= 1.0 else abs(float(res[0]))
        fp_res = 0.0
    else:
        val, lo, hi, p1, p0, done, fres = _true_fixed_point(F, qa, qs, L.code)
        if not done[0]:
            raise ModelError(f"aggregate fixed point did not converge for q_a={qa}, q*={qs}, low={L.name} (residual {fres[0]:.3g})")
        c1, c2 = float(lo[0]), float(hi[0])
        tru = MenuItem(qs, Narrative.TRUE)
        items = (emp, tru, low)
        intervals = [(0.0, c1, 0, 1), (c1, c2, 1, 1), (c2, 1.0, 2, 0)]
        _, _, (aE, bE, aT, bT, Lv) = _envelope(p1, p0, np.array([qa]), np.array([qs]), L.code)
        r1 = abs(float(aE[0] - bE[0] * c1 - (aT - bT[0] * c1))) if 0.0 < c1 < 1.0 else 0.0
        r2 = abs(float(aT - bT[0] * c2 - Lv[0])) if 0.0 < c2 < 1.0 else 0.0
        cut_res = max(r1, r2)
        fp_res = float(fres[0])
    asg = Assignment(items, tuple(intervals))
    agg = aggregate_behavior(asg, grid)
    return dict(
        menu=items,
        assignment=asg,
        aggregate=agg,
        utility=float(val[0]),
        low_narrative=L,
        cutoffs=(c1, c2),
        cutoff_residual=cut_res,
        fixed_point_residual=fp_res,
        ic_violations=check_incentive_compatibility(items, asg, grid),
    )


# -- brute-force oracle ----------------------------------------------------


def oracle_items(q_values=ORACLE_Q) -> tuple:
    items = [MenuItem(q, n) for n in (Narrative.TRUE, Narrative.EMPOWERING) for q in q_values]
    items += [MenuItem(0.0, Narrative.FATALISTIC), MenuItem(0.0, Narrative.DENIAL)]
    return tuple(sorted(items, key=lambda it: it.key))


def _consumer_equilibria(F: Cdf, q, code, starts, max_iter: int = 2000, tol: float = FP_TOL):
    """Consumer fixed points for a batch of menus (M, k), cutoffs exact in F.

    Each item contributes two affine lines in c (a1 = 0 and a1 = 1); a type
    picks the top line, so behaviour given the aggregate is read off the upper
    envelope between pairwise intersections.
    """
    M, k = q.shape
    n_lines = 2 * k
    item = np.repeat(np.arange(k), 2)
    act = np.tile([0, 1], k)
    pairs = np.array(list(itertools.combinations(range(n_lines), 2)))

    def respond(idx, p1, p0):
        qi = q[idx]
        slope = -act[None, :] * (1.0 + qi[:, item]) / 2.0
        inter = _base(code[idx][:, item], p1[:, None], p0[:, None], act[None, :])
        m = len(idx)
        rows = np.arange(m)[:, None]
        da = inter[:, pairs[:, 1]] - inter[:, pairs[:, 0]]
        db = slope[:, pairs[:, 0]] - slope[:, pairs[:, 1]]
        with np.errstate(invalid="ignore", divide="ignore"):
            x = np.where(db != 0.0, da / np.where(db != 0.0, db, 1.0), 0.0)
        x = np.sort(np.concatenate([np.zeros((m, 1)), np.clip(x, 0.0, 1.0), np.ones((m, 1))], axis=1), axis=1)
        mid = 0.5 * (x[:, 1:] + x[:, :-1])
        vals = inter[:, :, None] + slope[:, :, None] * mid[:, None, :]
        win = np.argmax(vals, axis=1)  # lines ordered by item tie-break key, a1 = 0 first
        Fx = F(x)
        dF = Fx[:, 1:] - Fx[:, :-1]
        Mx = F.moment(x)
        dM = Mx[:, 1:] - Mx[:, :-1]
        a1 = act[win]
        qw = qi[rows, item[win]]
        value = (inter[rows, win] * dF + slope[rows, win] * dM).sum(axis=1)
        return (a1 * dF).sum(axis=1), (a1 * qw * dF).sum(axis=1), value

    best_val = np.full(M, -np.inf)
    any_ok = np.zeros(M, dtype=bool)
    for p1s, p0s in starts:
        p1, p0 = np.full(M, p1s), np.full(M, p0s)
        val = np.full(M, -np.inf)
        ok = np.zeros(M, dtype=bool)
        live = np.arange(M)
        for _ in range(max_iter):
            n1, n0, v = respond(live, p1[live], p0[live])
            done = np.maximum(np.abs(n1 - p1[live]), np.abs(n0 - p0[live])) < tol
            ok[live[done]] = True
            val[live[done]] = v[done]
            p1[live] = (1.0 - DAMPING) * p1[live] + DAMPING * n1
            p0[live] = (1.0 - DAMPING) * p0[live] + DAMPING * n0
            live = live[~done]
            if not len(live):
                break
        better = ok & (val > best_val)
        best_val = np.where(better, val, best_val)
        any_ok |= ok
    return best_val, any_ok


def brute_force_menu(grid: TypeGrid, q_values=ORACLE_Q, max_items: int = 3, batch: int = 4096) -> OracleMenu:
    """Exhaustive menus of up to ``max_items`` items from a coarse item set, best consumer equilibrium each."""
    items = oracle_items(q_values)
    qs = np.array([it.q for it in items])
    codes = np.array([it.N.code for it in items])
    starts = ((1.0, 1.0), (1.0, 0.0), (0.3, 0.1))
    best, best_menu, checked, bad = -np.inf, None, 0, 0
    for k in range(1, max_items + 1):
        combos = np.array(list(itertools.combinations(range(len(items)), k)))
        for s in range(0, len(combos), batch):
            cb = combos[s : s + batch]
            val, ok = _consumer_equilibria(grid.cdf, qs[cb], codes[cb], starts)
            checked += len(cb)
            bad += int((~ok).sum())
            if ok.any():
                i = int(np.argmax(np.where(ok, val, -np.inf)))
                if val[i] > best + 1e-12:
                    best, best_menu = float(val[i]), tuple(items[j] for j in cb[i])
    return OracleMenu(best_menu, best, checked, bad)
