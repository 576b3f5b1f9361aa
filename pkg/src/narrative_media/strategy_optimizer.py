"""Rational benchmark and optimal media strategies for a homogeneous population.

The default search runs in the direct-recommendation domain: signals are
action recommendations, the consumer obeys, and a recommendation kernel X[t, a]
is feasible when obedience holds at every recommendation sent with positive
probability.  Beliefs use the vanishing-tremble limit.

With binary actions the feasible set has two kinds of pieces: full-dimensional
regions where obedience is slack, and indifference surfaces where a
recommended action ties with the other one (mixed behaviour in the original
game).  The grid only samples the first kind, so indifference surfaces are
located separately by bracketing the obedience margin along grid lines.  Each
kind of candidate then gets its own local refinement.

``domain="full"`` instead searches signal kernels on the environment's own
signal space and scores each candidate by its best certified equilibrium.  It
is much slower and serves as a cross-check of the direct search.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import kernels
from ._parallel import parallel_map
from .equilibrium import EquilibriumResult, find_equilibria, is_equilibrium
from .model_core import (
    NARRATIVES,
    ConsumerStrategy,
    Environment,
    ModelError,
    Narrative,
    SignalFunction,
)

GRID_STEP = 0.02
REFINE_ITERS = 40
OPT_TOL = 1e-9  # obedience and comparison tolerance
IMPROVEMENT = 1e-6  # "strictly better than the benchmark"
MAX_GRID_POINTS = 2_000_000
INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True, eq=False)
class MediaStrategy:
    I: SignalFunction
    N: Narrative

    def to_dict(self) -> dict:
        return {"narrative": self.N.name, "signal": self.I.kernel.tolist()}


@dataclass(frozen=True, eq=False)
class NarrativeBest:
    signal: SignalFunction
    utility: float
    equilibrium: EquilibriumResult


@dataclass(frozen=True, eq=False)
class OptimizationReport:
    best: MediaStrategy
    equilibrium: EquilibriumResult
    utility: float
    benchmark: float
    per_narrative_best: dict
    argmax_narratives: tuple
    search_trace: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        out = {
            "narrative": self.best.N.name,
            "signal": self.best.I.kernel.tolist(),
            "utility": self.utility,
            "benchmark": self.benchmark,
            "improvement": self.utility - self.benchmark,
            "argmax_narratives": [n.name for n in self.argmax_narratives],
        }
        if self.best.I.kernel.shape == (2, 2):
            out["q0"] = float(self.best.I.kernel[0, 1])
            out["q1"] = float(self.best.I.kernel[1, 1])
        out["equilibrium"] = self.equilibrium.to_dict()
        out["per_narrative_best"] = {
            n.name: {"signal": nb.signal.kernel.tolist(), "utility": nb.utility}
            for n, nb in self.per_narrative_best.items()
        }
        out["search_trace"] = self.search_trace
        return out


@dataclass(frozen=True, eq=False)
class DirectDomain:
    """Search domain with S = A where every signal is an obeyed recommendation."""

    env: Environment
    source: Environment

    @property
    def search_dim(self) -> int:
        return self.env.n_states * self.env.n_actions

    @property
    def original_dim(self) -> int:
        return self.source.n_states * self.source.n_signals

    def obedient_strategy(self) -> ConsumerStrategy:
        return ConsumerStrategy.obedient(self.env.n_actions)


def restrict_to_direct(env: Environment) -> DirectDomain:
    return DirectDomain(env.with_signals(env.actions), env)


# -- benchmark -----------------------------------------------------------


def benchmark_value(env: Environment) -> float:
    return float(env.prior @ env.expected_utility().max(axis=1))


def benchmark_actions(env: Environment) -> np.ndarray:
    """Per-state argmax of expected utility (lowest index on ties)."""
    return np.argmax(env.expected_utility(), axis=1)


def is_regular(env: Environment, tol: float = OPT_TOL) -> bool:
    """Unique benchmark best reply in every state, distinct across states."""
    W = env.expected_utility()
    best = W.max(axis=1, keepdims=True)
    if np.any((W >= best - tol).sum(axis=1) > 1):
        return False
    acts = benchmark_actions(env)
    return len(set(acts.tolist())) == len(acts)


def rational_benchmark(env: Environment):
    """(full-information TRUE strategy, per-state argmax equilibrium, benchmark value)."""
    T, S, A, _ = env.shape
    acts = benchmark_actions(env)
    if S >= T:
        I = SignalFunction.full_information(T, S)
        sigma = np.zeros((S, A))
        sigma[:, 0] = 1.0
        sigma[np.arange(T)] = 0.0
        sigma[np.arange(T), acts] = 1.0
        work_env = env
    elif S >= A:
        # too few signals to reveal the state: recommend the benchmark action instead
        X = np.zeros((T, S))
        X[np.arange(T), acts] = 1.0
        I = SignalFunction(X)
        sigma = np.eye(S, A)
        work_env = env
    else:
        raise ModelError("benchmark needs at least as many signals as states or actions")
    value = benchmark_value(env)
    check = is_equilibrium(work_env, I, Narrative.TRUE, sigma)
    strategy = ConsumerStrategy(sigma)
    eqm = EquilibriumResult(strategy, value, strategy.support(), check.trace, 0.0)
    return MediaStrategy(I, Narrative.TRUE), eqm, value


# -- simplex grids -------------------------------------------------------


def simplex_grid(n_parts: int, dim: int) -> np.ndarray:
    """All points of the dim-simplex with coordinates in multiples of 1/n_parts."""
    if dim == 1:
        return np.ones((1, 1))
    pts = []
    for cut in itertools.combinations(range(n_parts + dim - 1), dim - 1):
        prev, row = -1, []
        for c in cut:
            row.append(c - prev - 1)
            prev = c
        row.append(n_parts + dim - 2 - prev)
        pts.append(row)
    return np.array(pts, dtype=float)[::-1] / n_parts


def kernel_grid(n_rows: int, n_cols: int, step: float) -> np.ndarray:
    n_parts = int(round(1.0 / step))
    if not math.isclose(n_parts * step, 1.0, rel_tol=0, abs_tol=1e-9):
        raise ModelError(f"grid_step: 1/step must be an integer, got {step!r}")
    rows = simplex_grid(n_parts, n_cols)
    count = len(rows) ** n_rows
    if count > MAX_GRID_POINTS:
        raise ModelError(f"grid_step {step} gives {count} candidates; use a coarser step")
    idx = np.array(list(itertools.product(range(len(rows)), repeat=n_rows)))
    return rows[idx]


# -- direct-domain search ------------------------------------------------


class _Direct:
    def __init__(self, env: Environment, code: int, tol: float = OPT_TOL):
        self.env, self.code, self.tol = env, code, tol
        self.T, self.A = env.n_states, env.n_actions
        self.evals = 0
        self._arrays = tuple(np.ascontiguousarray(a, dtype=float) for a in (env.prior, env.outcome_kernel, env.utility))
        self._impl = kernels.backend_module(kernels.BACKEND)

    def table(self, X: np.ndarray) -> np.ndarray:
        self.evals += len(X)
        return np.asarray(self._impl.values_direct_batch(*self._arrays, np.ascontiguousarray(X, dtype=float), self.code, 0.0))

    def evaluate(self, X: np.ndarray):
        """Utility (-inf when infeasible), normalized obedience margins, weighted table."""
        X = np.clip(X, 0.0, 1.0)
        G = self.table(X)
        ps = np.einsum("t,bts->bs", self.env.prior, X)
        diag = np.einsum("bss->bs", G)
        slack = G.max(axis=2) - diag
        feasible = np.all(slack <= self.tol * ps + 1e-300, axis=1)
        util = np.where(feasible, G.max(axis=2).sum(axis=1), -np.inf)
        return util, G, ps

    def margins(self, G, ps):
        """m[b, s] = V(s, s) - max_{a != s} V(s, a); NaN at null recommendations."""
        diag = np.einsum("bss->bs", G)
        others = G.copy()
        idx = np.arange(self.A)
        others[:, idx, idx] = -np.inf
        with np.errstate(invalid="ignore", divide="ignore"):
            m = (diag - others.max(axis=2)) / ps
        return np.where(ps > 0.0, m, np.nan)

    # binary-action kernels are parametrized by x[t] = X[t, 1]
    @staticmethod
    def to_kernel(x: np.ndarray) -> np.ndarray:
        x = np.clip(x, 0.0, 1.0)
        return np.stack([1.0 - x, x], axis=-1)

    def margin_at(self, x: np.ndarray, s: int) -> np.ndarray:
        """Binary-action margin m_s for a batch of parameter vectors."""
        X = self.to_kernel(x)
        G = self.table(X)
        ps = X[:, :, s] @ self.env.prior
        with np.errstate(invalid="ignore", divide="ignore"):
            m = (G[:, s, s] - G[:, s, 1 - s]) / ps
        return np.where(ps > 0.0, m, np.nan)

    def margin_scalar(self, x: np.ndarray, s: int) -> float:
        X = np.empty((1, self.T, 2))
        X[0, :, 1] = x
        X[0, :, 0] = 1.0 - x
        G = self.table(X)[0]
        ps = float(self.env.prior @ X[0, :, s])
        return (G[s, s] - G[s, 1 - s]) / ps if ps > 0.0 else math.nan


def _pattern_search(search: _Direct, X0: np.ndarray, u0: float, step: float, iters: int, trace: list):
    """Coordinate pattern search on the recommendation kernel, halving the step."""
    T, A = X0.shape
    moves = []
    for t in range(T):
        for i in range(A):
            for j in range(A):
                if i != j:
                    d = np.zeros((T, A))
                    d[t, i], d[t, j] = 1.0, -1.0
                    moves.append(d)
    if A == 2:
        # joint moves across rows help along slanted ridges
        for signs in itertools.product((-1.0, 0.0, 1.0), repeat=T):
            if sum(1 for s in signs if s) >= 2:
                d = np.zeros((T, A))
                d[:, 1], d[:, 0] = signs, [-s for s in signs]
                moves.append(d)
    moves = np.array(moves)
    X, u, delta = X0.copy(), u0, step
    for _ in range(iters):
        for _ in range(8):
            cand = X[None] + delta * moves
            cand = cand[np.all((cand >= -1e-15) & (cand <= 1.0 + 1e-15), axis=(1, 2))]
            if not len(cand):
                break
            util, _, _ = search.evaluate(cand)
            k = int(np.argmax(util))
            if util[k] > u + 1e-15:
                X, u = np.clip(cand[k], 0.0, 1.0), float(util[k])
            else:
                break
        delta /= 2.0
    trace.append({"kind": "interior", "utility": u})
    return X, u


def _bisect_roots(search: _Direct, lo: np.ndarray, hi: np.ndarray, s: int, axis: np.ndarray):
    """Vectorized bisection of the margin m_s along one coordinate per bracket."""
    m_lo = search.margin_at(lo, s)
    for _ in range(60):
        mid = lo.copy()
        rows = np.arange(len(lo))
        mid[rows, axis] = 0.5 * (lo[rows, axis] + hi[rows, axis])
        m_mid = search.margin_at(mid, s)
        same = np.sign(m_mid) == np.sign(m_lo)
        lo = np.where(same[:, None], mid, lo)
        m_lo = np.where(same, m_mid, m_lo)
        hi = np.where(same[:, None], hi, mid)
        if np.max(hi[rows, axis] - lo[rows, axis]) < 1e-15:
            break
    return 0.5 * (lo + hi)


def _curve_root(search: _Direct, x: np.ndarray, s: int, axis: int, guess: float, width: float):
    """Root of m_s along ``axis`` nearest to ``guess``; None if no sign change."""

    y = x.copy()

    def f(v):
        y[axis] = v
        return search.margin_scalar(y, s)

    # cheap path: tight bracket around the previous root
    d = min(width, 1e-3)
    a, b = max(0.0, guess - d), min(1.0, guess + d)
    fa, fb = f(a), f(b)
    if math.isfinite(fa) and math.isfinite(fb) and fa * fb <= 0.0:
        r = a if fa == 0.0 else b if fb == 0.0 else optimize.brentq(f, a, b, xtol=1e-15, rtol=1e-15, maxiter=200)
        return r if abs(f(r)) <= OPT_TOL else None
    w = width
    while True:
        a, b = max(0.0, guess - w), min(1.0, guess + w)
        pts = np.linspace(a, b, 9)
        ys = x[None].repeat(len(pts), axis=0)
        ys[:, axis] = pts
        vals = search.margin_at(ys, s)
        best = None
        for i in range(len(pts) - 1):
            if np.isfinite(vals[i]) and np.isfinite(vals[i + 1]) and vals[i] * vals[i + 1] <= 0.0:
                mid = 0.5 * (pts[i] + pts[i + 1])
                if best is None or abs(mid - guess) < abs(best[0] - guess):
                    best = (mid, pts[i], pts[i + 1], vals[i], vals[i + 1])
        if best is not None:
            _, lo, hi, vlo, vhi = best
            if vlo == 0.0:
                r = lo
            elif vhi == 0.0:
                r = hi
            else:
                r = optimize.brentq(f, lo, hi, xtol=1e-15, rtol=1e-15, maxiter=200)
            return r if abs(f(r)) <= OPT_TOL else None
        if a == 0.0 and b == 1.0:
            return None
        w *= 4.0


def _curve_value(search: _Direct, x: np.ndarray, s: int, axis: int, guess: float, width: float):
    r = _curve_root(search, x, s, axis, guess, width)
    if r is None:
        return -np.inf, None
    y = x.copy()
    y[axis] = r
    util, _, _ = search.evaluate(search.to_kernel(y[None]))
    return float(util[0]), y


def _refine_curve(search: _Direct, x0: np.ndarray, u0: float, s: int, axis: int, step: float, iters: int, trace: list):
    """Golden-section along each free coordinate, re-solving the tie on ``axis``."""
    x, u = x0.copy(), u0
    free = [k for k in range(len(x)) if k != axis]
    width = step
    # golden section on [x_k - width, x_k + width]; re-center while the optimum sits at an edge
    for _ in range(max(1, iters // 8) if free else 0):
        at_edge = False
        for k in free:
            lo, hi = max(0.0, x[k] - width), min(1.0, x[k] + width)
            lo0, hi0 = lo, hi

            def g(v, k=k):
                y = x.copy()
                y[k] = v
                return _curve_value(search, y, s, axis, x[axis], width)

            c, d = hi - INVPHI * (hi - lo), lo + INVPHI * (hi - lo)
            (fc, yc), (fd, yd) = g(c), g(d)
            while hi - lo > 1e-11:
                if fc >= fd:
                    hi, d, fd, yd = d, c, fc, yc
                    c = hi - INVPHI * (hi - lo)
                    fc, yc = g(c)
                else:
                    lo, c, fc, yc = c, d, fd, yd
                    d = lo + INVPHI * (hi - lo)
                    fd, yd = g(d)
            for fv, yv in ((fc, yc), (fd, yd)):
                if yv is not None and fv > u + 1e-15:
                    x, u = yv, fv
                    if (x[k] - lo0 < 1e-9 and lo0 > 0.0) or (hi0 - x[k] < 1e-9 and hi0 < 1.0):
                        at_edge = True
        if not at_edge:
            break
    trace.append({"kind": "indifference", "recommendation": int(s), "utility": u})
    return x, u


def _indifference_candidates(search: _Direct, xs: np.ndarray, margins: np.ndarray, n: int):
    """Roots of each obedience margin bracketed along grid lines (binary actions)."""
    T = search.T
    shape = (n,) * T
    out = []
    for s in range(2):
        m = margins[:, s].reshape(shape)
        for axis in range(T):
            a = np.moveaxis(m, axis, -1)
            lo_m, hi_m = a[..., :-1], a[..., 1:]
            hit = np.isfinite(lo_m) & np.isfinite(hi_m) & (lo_m * hi_m < 0.0)
            if not hit.any():
                continue
            idx = np.argwhere(hit)
            grid_idx = np.moveaxis(np.arange(np.prod(shape)).reshape(shape), axis, -1)
            lo_flat = grid_idx[tuple(idx.T)]
            hi_idx = idx.copy()
            hi_idx[:, -1] += 1
            hi_flat = grid_idx[tuple(hi_idx.T)]
            roots = _bisect_roots(search, xs[lo_flat].copy(), xs[hi_flat].copy(), s, np.full(len(idx), axis))
            mm = search.margin_at(roots, s)
            keep = np.abs(mm) <= OPT_TOL
            for r in roots[keep]:
                out.append((s, axis, r))
    return out


def _intersection_candidates(search: _Direct, xs: np.ndarray, margins: np.ndarray, n: int):
    """Points where both recommendations are indifferent (two states, binary actions)."""
    if search.T != 2:
        return []
    m0 = margins[:, 0].reshape(n, n)
    m1 = margins[:, 1].reshape(n, n)
    out = []

    def F(z):
        mm = search.margins(*search.evaluate(search.to_kernel(np.clip(z, 0.0, 1.0)[None]))[1:])[0]
        return np.nan_to_num(mm, nan=1.0)

    def spans(m):
        w = np.stack([m[:-1, :-1], m[1:, :-1], m[:-1, 1:], m[1:, 1:]])
        with np.errstate(invalid="ignore"):
            return np.all(np.isfinite(w), axis=0) & (w.min(axis=0) <= 0.0) & (w.max(axis=0) >= 0.0)

    for i, j in np.argwhere(spans(m0) & spans(m1)):
        z0 = 0.5 * (xs[i * n + j] + xs[(i + 1) * n + j + 1])
        sol = optimize.root(F, z0, method="hybr", tol=1e-14)
        z = np.asarray(sol.x)
        if np.all(z >= 0.0) and np.all(z <= 1.0) and np.max(np.abs(F(z))) <= 1e-10:
            if all(np.max(np.abs(z - y)) > 1e-9 for y in out):
                out.append(z)
    return out


def _search_direct(env: Environment, N: Narrative, grid_step: float, refine_iters: int):
    search = _Direct(env, N.code)
    T, A = env.n_states, env.n_actions
    X = kernel_grid(T, A, grid_step)
    util, G, ps = search.evaluate(X)
    trace = {"domain": "direct", "grid_step": grid_step, "grid_points": int(len(X)), "refine_iters": refine_iters}
    best_X, best_u, best_kind = None, -np.inf, "none"
    steps: list = []
    if np.isfinite(util).any():
        k = int(np.argmax(util))
        best_X, best_u = _pattern_search(search, X[k], float(util[k]), grid_step, refine_iters, steps)
        best_kind = "interior"
    trace["grid_best"] = float(util.max()) if np.isfinite(util).any() else None
    if A == 2:
        n = int(round(1.0 / grid_step)) + 1
        xs = X[:, :, 1]
        margins = search.margins(G, ps)
        curves = _indifference_candidates(search, xs, margins, n)
        scored = []
        for s, axis, r in curves:
            u = float(search.evaluate(search.to_kernel(r[None]))[0][0])
            if np.isfinite(u):
                scored.append((u, s, axis, r))
        scored.sort(key=lambda z: -z[0])
        trace["indifference_candidates"] = len(scored)
        for u, s, axis, r in scored[:3]:
            xr, ur = _refine_curve(search, r, u, s, axis, grid_step, refine_iters, steps)
            if ur > best_u + 1e-15:
                best_X, best_u, best_kind = search.to_kernel(xr), ur, "indifference"
        points = _intersection_candidates(search, xs, margins, n)
        trace["double_indifference_candidates"] = len(points)
        if points:
            pu, _, _ = search.evaluate(search.to_kernel(np.array(points)))
            k = int(np.argmax(pu))
            if pu[k] > best_u + 1e-15:
                best_X, best_u, best_kind = search.to_kernel(points[k]), float(pu[k]), "double_indifference"
    trace["refinement"] = steps
    trace["winner"] = best_kind
    trace["evaluations"] = search.evals
    if best_X is None:
        raise ModelError(f"no obedient recommendation kernel found for {N.name}")
    return np.clip(best_X, 0.0, 1.0), best_u, trace


# -- full-domain search --------------------------------------------------


def _head_utility(env, N, kernel) -> float:
    res = find_equilibria(env, kernel, N, epsilon=0.0)
    return res[0].utility if res else -np.inf


def _search_full(env: Environment, N: Narrative, grid_step: float, refine_iters: int):
    T, S = env.n_states, env.n_signals
    X = kernel_grid(T, S, grid_step)
    util = np.array(parallel_map(lambda k: _head_utility(env, N, k), list(X)))
    trace = {"domain": "full", "grid_step": grid_step, "grid_points": int(len(X)), "refine_iters": refine_iters}
    k = int(np.argmax(util))
    best, u = X[k].copy(), float(util[k])
    trace["grid_best"] = u
    moves = []
    for t in range(T):
        for i in range(S):
            for j in range(S):
                if i != j:
                    d = np.zeros((T, S))
                    d[t, i], d[t, j] = 1.0, -1.0
                    moves.append(d)
    delta = grid_step
    for _ in range(refine_iters):
        cand = [best + delta * d for d in moves]
        cand = [c for c in cand if np.all(c >= -1e-15) and np.all(c <= 1.0 + 1e-15)]
        vals = parallel_map(lambda c: _head_utility(env, N, np.clip(c, 0.0, 1.0)), cand)
        if vals and max(vals) > u + 1e-15:
            i = int(np.argmax(vals))
            best, u = np.clip(cand[i], 0.0, 1.0), float(vals[i])
        else:
            delta /= 2.0
    trace["winner"] = "full"
    return best, u, trace


def optimize_signal_for_narrative(
    env: Environment,
    N,
    grid_step: float = GRID_STEP,
    refine_iters: int = REFINE_ITERS,
    domain: str = "direct",
    return_trace: bool = False,
):
    """Best signal kernel for a fixed narrative: (SignalFunction, EquilibriumResult, utility).

    In the direct domain the signal space is relabelled as the action space.
    """
    N = Narrative.parse(N)
    if not (0.0 < grid_step <= 0.25):
        raise ModelError(f"grid_step: must lie in (0, 0.25], got {grid_step!r}")
    if refine_iters < 0:
        raise ModelError("refine_iters: must be non-negative")
    if domain == "direct":
        work = restrict_to_direct(env).env
        X, u, trace = _search_direct(work, N, grid_step, refine_iters)
        sigma = ConsumerStrategy.obedient(env.n_actions)
    elif domain == "full":
        work = env
        X, u, trace = _search_full(env, N, grid_step, refine_iters)
        res = find_equilibria(env, X, N, epsilon=0.0)
        sigma = res[0].strategy
    else:
        raise ModelError(f"domain: expected 'direct' or 'full', got {domain!r}")
    X = X / X.sum(axis=1, keepdims=True)
    I = SignalFunction(X)
    check = is_equilibrium(work, I, N, sigma)
    trace["certified"] = check.ok
    eqm = EquilibriumResult(sigma, u, sigma.support(), check.trace, 0.0)
    if return_trace:
        return I, eqm, u, trace
    return I, eqm, u


def optimize_media_strategy(
    env: Environment,
    grid_step: float = GRID_STEP,
    refine_iters: int = REFINE_ITERS,
    domain: str = "direct",
    narratives=NARRATIVES,
) -> OptimizationReport:
    per, traces = {}, {}
    for N in narratives:
        N = Narrative.parse(N)
        I, eqm, u, trace = optimize_signal_for_narrative(env, N, grid_step, refine_iters, domain, return_trace=True)
        per[N] = NarrativeBest(I, u, eqm)
        traces[N.name] = trace
    top = max(nb.utility for nb in per.values())
    argmax = tuple(n for n in NARRATIVES if n in per and per[n].utility >= top - OPT_TOL)
    head = argmax[0]
    bench = benchmark_value(env)
    return OptimizationReport(
        best=MediaStrategy(per[head].signal, head),
        equilibrium=per[head].equilibrium,
        utility=per[head].utility,
        benchmark=bench,
        per_narrative_best=per,
        argmax_narratives=argmax,
        search_trace=traces,
    )


def induced_action_distribution(env: Environment, I, sigma) -> np.ndarray:
    """p(a | t) generated by the signal kernel and the strategy."""
    Ik = I.kernel if isinstance(I, SignalFunction) else np.asarray(I)
    sk = sigma.kernel if isinstance(sigma, ConsumerStrategy) else np.asarray(sigma)
    return Ik @ sk
