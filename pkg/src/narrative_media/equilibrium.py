"""Consumer equilibria for a fixed media strategy (I, N).

A strategy is certified as a limit of tremble equilibria by evaluating it along
a decreasing ladder of uniform trembles: at every rung the actions it plays
with probability above the tremble must be best responses, and the worst
violation must not grow as the tremble shrinks.

``find_equilibria`` enumerates support profiles.  With binary actions the
mixing weights solve scalar (or 2x2) indifference conditions, bracketed on a
scan grid and polished by Brent's method / Powell's hybrid method.  Larger
action sets fall back on bounded least squares from several starts; a
profile whose solve stalls is listed as undetermined.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from . import kernels
from .model_core import (
    DEFAULT_EPSILON,
    ConsumerStrategy,
    Environment,
    ModelError,
    Narrative,
    SignalFunction,
)

DEFAULT_LADDER = (1e-3, 1e-6, 1e-9)
BR_TOL = 1e-9
CERT_TOL = 1e-8
ROOT_TOL = 1e-10
EDGE = 1e-10


@dataclass(frozen=True, eq=False)
class EquilibriumResult:
    strategy: ConsumerStrategy
    utility: float
    support_profile: tuple
    epsilon_trace: tuple
    epsilon: float = DEFAULT_EPSILON

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.kernel.tolist(),
            "utility": self.utility,
            "support_profile": [sorted(s) for s in self.support_profile],
            "epsilon_trace": [list(p) for p in self.epsilon_trace],
        }


@dataclass(frozen=True)
class EquilibriumCheck:
    ok: bool
    trace: tuple

    def __bool__(self) -> bool:
        return self.ok

    @property
    def worst(self) -> float:
        return self.trace[-1][1]


class EquilibriumList(list):
    """Certified equilibria, media-optimal first; ``undetermined`` lists stalled support profiles."""

    def __init__(self, items=(), undetermined=()):
        super().__init__(items)
        self.undetermined = list(undetermined)

    @property
    def head(self) -> EquilibriumResult | None:
        return self[0] if self else None


def _arrays(env: Environment, I, sigma=None):
    Ik = I.kernel if isinstance(I, SignalFunction) else np.asarray(I, dtype=float)
    if Ik.shape != (env.n_states, env.n_signals):
        raise ModelError(f"signal kernel: expected shape {(env.n_states, env.n_signals)}, got {Ik.shape}")
    if sigma is None:
        return Ik
    sk = sigma.kernel if isinstance(sigma, ConsumerStrategy) else np.asarray(sigma, dtype=float)
    if sk.shape != (env.n_signals, env.n_actions):
        raise ModelError(f"strategy kernel: expected shape {(env.n_signals, env.n_actions)}, got {sk.shape}")
    return Ik, sk


def best_responses(env, I, N, sigma, epsilon: float = DEFAULT_EPSILON, tol: float = BR_TOL) -> tuple:
    """Per-signal argmax sets of V(s, .) with beliefs fit to the smoothed strategy.

    Null signals impose no restriction, so every action is returned for them.
    """
    Ik, sk = _arrays(env, I, sigma)
    G = kernels.values(env, Ik, sk, Narrative.parse(N).code, epsilon)
    ps = env.prior @ Ik
    out = []
    for s in range(env.n_signals):
        if ps[s] <= 0.0:
            out.append(frozenset(range(env.n_actions)))
            continue
        V = G[s] / ps[s]
        out.append(frozenset(int(a) for a in np.flatnonzero(V >= V.max() - tol)))
    return tuple(out)


def _violation(env, Ik, sk, code, eps) -> float:
    G = kernels.values(env, Ik, sk, code, eps)
    ps = env.prior @ Ik
    smoothed = (1.0 - eps) * sk + eps / env.n_actions
    worst = 0.0
    for s in np.flatnonzero(ps > 0.0):
        V = G[s] / ps[s]
        played = smoothed[s] > eps
        if played.any():
            worst = max(worst, float(V.max() - V[played].min()))
    return worst


def is_equilibrium(env, I, N, sigma, tol: float = CERT_TOL, ladder=DEFAULT_LADDER) -> EquilibriumCheck:
    Ik, sk = _arrays(env, I, sigma)
    ladder = tuple(float(e) for e in ladder)
    if not ladder or any(not (0.0 < e < 1.0) for e in ladder) or any(b >= a for a, b in zip(ladder, ladder[1:])):
        raise ModelError("ladder: must be a non-empty strictly decreasing sequence in (0, 1)")
    code = Narrative.parse(N).code
    trace = tuple((e, _violation(env, Ik, sk, code, e)) for e in ladder)
    shrinking = all(b <= a + tol for (_, a), (_, b) in zip(trace, trace[1:]))
    return EquilibriumCheck(bool(trace[-1][1] <= tol and shrinking), trace)


# -- enumeration ---------------------------------------------------------


def _subsets(n: int):
    out = []
    for k in range(1, n + 1):
        out.extend(frozenset(c) for c in itertools.combinations(range(n), k))
    return out


class _Problem:
    """Cached arrays and helpers for one (env, I, N, eps)."""

    def __init__(self, env, Ik, code, eps):
        self.env, self.Ik, self.code, self.eps = env, Ik, code, eps
        self.ps = env.prior @ Ik
        self.live = [int(s) for s in np.flatnonzero(self.ps > 0.0)]
        self.S, self.A = env.n_signals, env.n_actions

    def batch(self, sigmas):
        return kernels.values_sigma_batch(self.env, self.Ik, sigmas, self.code, self.eps)

    def utility(self, G):
        return G.max(axis=-1).sum(axis=-1)

    def pure_ok(self, G, fixed: dict) -> np.ndarray:
        """Whether every fixed (pure) live signal plays a best response; G is batched."""
        ok = np.ones(G.shape[0], dtype=bool)
        for s, a in fixed.items():
            V = G[:, s, :] / self.ps[s]
            ok &= V[:, a] >= V.max(axis=1) - BR_TOL
        return ok


def _base_strategy(prob: _Problem, profile) -> tuple[np.ndarray, dict, list]:
    sigma = np.zeros((prob.S, prob.A))
    sigma[:, 0] = 1.0  # null signals: canonical lowest action
    fixed, mixing = {}, []
    for s, support in zip(prob.live, profile):
        sigma[s] = 0.0
        if len(support) == 1:
            a = next(iter(support))
            sigma[s, a] = 1.0
            fixed[s] = a
        else:
            mixing.append((s, tuple(sorted(support))))
    return sigma, fixed, mixing


def _binary_residual(prob, G, s):
    return (G[..., s, 1] - G[..., s, 0]) / prob.ps[s]


def _solve_one(prob, sigma, fixed, s, scan):
    """One binary mixing signal: roots of V(s,1) - V(s,0) in the weight on action 1."""
    grid = np.linspace(0.0, 1.0, scan)
    sig = np.repeat(sigma[None], scan, axis=0)
    sig[:, s, 0], sig[:, s, 1] = 1.0 - grid, grid
    G = prob.batch(sig)
    r = _binary_residual(prob, G, s)
    interior = slice(1, scan - 1)
    if np.all(np.abs(r) <= 1e-12):
        # indifferent along the whole segment: keep the best interior point
        ok = prob.pure_ok(G, fixed)[interior]
        U = np.where(ok, prob.utility(G)[interior], -np.inf)
        if not np.isfinite(U).any():
            return [], False
        return [sig[1 + int(np.argmax(U))]], False

    def f(m):
        one = sigma.copy()
        one[s] = (1.0 - m, m)
        return float(_binary_residual(prob, prob.batch(one[None])[0], s))

    roots = []
    for i in range(scan - 1):
        if r[i] == 0.0 and 0 < i:
            roots.append(grid[i])
        elif r[i] * r[i + 1] < 0.0:
            roots.append(optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200))
    out = []
    for m in roots:
        if not (EDGE < m < 1.0 - EDGE) or abs(f(m)) > ROOT_TOL:
            continue  # boundary solution (a pure profile) or a jump, not a root
        one = sigma.copy()
        one[s] = (1.0 - m, m)
        if prob.pure_ok(prob.batch(one[None]), fixed)[0]:
            out.append(one)
    return out, False


def _solve_two(prob, sigma, fixed, pair, scan):
    """Two binary mixing signals: cells where both residuals change sign, polished by hybr."""
    s1, s2 = pair
    n = max(9, scan // 2 + 1)
    grid = np.linspace(0.0, 1.0, n)
    M1, M2 = np.meshgrid(grid, grid, indexing="ij")
    sig = np.repeat(sigma[None], n * n, axis=0)
    sig[:, s1, 0], sig[:, s1, 1] = 1.0 - M1.ravel(), M1.ravel()
    sig[:, s2, 0], sig[:, s2, 1] = 1.0 - M2.ravel(), M2.ravel()
    G = prob.batch(sig)
    R1 = _binary_residual(prob, G, s1).reshape(n, n)
    R2 = _binary_residual(prob, G, s2).reshape(n, n)
    flat1, flat2 = np.all(np.abs(R1) <= 1e-12), np.all(np.abs(R2) <= 1e-12)
    U = prob.utility(G).reshape(n, n)
    ok = prob.pure_ok(G, fixed).reshape(n, n)

    def build(m1, m2):
        one = sigma.copy()
        one[s1] = (1.0 - m1, m1)
        one[s2] = (1.0 - m2, m2)
        return one

    if flat1 and flat2:
        inner = np.where(ok[1:-1, 1:-1], U[1:-1, 1:-1], -np.inf)
        if not np.isfinite(inner).any():
            return [], False
        i, j = np.unravel_index(int(np.argmax(inner)), inner.shape)
        return [build(grid[i + 1], grid[j + 1])], False
    if flat1 or flat2:
        # one signal is indifferent everywhere: scan it, solve the other
        best, best_u = None, -np.inf
        for k in range(1, n - 1):
            free = grid[k]
            line = R2[k, :] if flat1 else R1[:, k]
            target = s2 if flat1 else s1

            def f(m, free=free):
                one = build(free, m) if flat1 else build(m, free)
                return float(_binary_residual(prob, prob.batch(one[None])[0], target))

            for i in range(n - 1):
                if line[i] * line[i + 1] < 0.0:
                    m = optimize.brentq(f, grid[i], grid[i + 1], xtol=1e-15, rtol=1e-15, maxiter=200)
                    if not (EDGE < m < 1.0 - EDGE) or abs(f(m)) > ROOT_TOL:
                        continue
                    one = build(free, m) if flat1 else build(m, free)
                    Gm = prob.batch(one[None])
                    u = float(prob.utility(Gm)[0])
                    if prob.pure_ok(Gm, fixed)[0] and u > best_u:
                        best, best_u = one, u
        return ([best] if best is not None else []), False

    def F(x):
        Gx = prob.batch(build(*x)[None])[0]
        return [float(_binary_residual(prob, Gx, s1)), float(_binary_residual(prob, Gx, s2))]

    found, stalled = [], []
    for i in range(n - 1):
        for j in range(n - 1):
            c1, c2 = R1[i : i + 2, j : j + 2], R2[i : i + 2, j : j + 2]
            if not (c1.min() <= 0.0 <= c1.max() and c2.min() <= 0.0 <= c2.max()):
                continue
            x0 = [(grid[i] + grid[i + 1]) / 2, (grid[j] + grid[j + 1]) / 2]
            sol = optimize.root(F, x0, method="hybr", tol=1e-14)
            x = np.asarray(sol.x)
            res = float(np.max(np.abs(F(x)))) if np.all(np.isfinite(x)) else np.inf
            inside = np.all(x > EDGE) and np.all(x < 1.0 - EDGE)
            if inside and res <= ROOT_TOL:
                if all(np.max(np.abs(x - y)) > 1e-7 for y in found):
                    found.append(x)
            elif inside and res < 1e-6:
                stalled.append(x)
    out = []
    for x in found:
        one = build(*x)
        if prob.pure_ok(prob.batch(one[None]), fixed)[0]:
            out.append(one)
    undetermined = any(all(np.max(np.abs(x - y)) > 1e-6 for y in found) for x in stalled)
    return out, undetermined


def _solve_general(prob, sigma, fixed, mixing, starts=3, screen=256):
    """Indifference conditions for arbitrary supports via bounded least squares.

    Starts are the best points of a vectorized random screen plus the uniform mix.
    """
    sizes = [len(sup) for _, sup in mixing]
    n_free = sum(k - 1 for k in sizes)

    def build_batch(Z):
        out = np.repeat(sigma[None], len(Z), axis=0)
        pos = 0
        for (s, sup), k in zip(mixing, sizes):
            out[:, s] = 0.0
            w, rest = [], np.ones(len(Z))
            for i in range(k - 1):
                w.append(rest * Z[:, pos + i])
                rest = rest * (1.0 - Z[:, pos + i])
            w.append(rest)
            out[:, s, list(sup)] = np.stack(w, axis=1)
            pos += k - 1
        return out

    def residuals(Z):
        G = prob.batch(build_batch(Z))
        out = []
        for s, sup in mixing:
            V = G[:, s] / prob.ps[s]
            out.extend(V[:, a] - V[:, sup[0]] for a in sup[1:])
        return np.stack(out, axis=1)

    def build(z):
        return build_batch(z[None])[0]

    def F(z):
        return residuals(z[None])[0]

    def jac(z, f0=None):
        # forward differences in one batched evaluation, stepping inward at the upper bound
        h = np.where(z + 1e-7 <= 1.0, 1e-7, -1e-7)
        Z = np.vstack([z[None], z[None] + np.diag(h)])
        R = residuals(Z)
        return ((R[1:] - R[0]) / h[:, None]).T

    rng = np.random.default_rng(0)
    uniform = np.concatenate([[1.0 / (k - i) for i in range(k - 1)] for k in sizes])
    Z = np.vstack([uniform[None], rng.uniform(0.02, 0.98, (screen, n_free))])
    order = np.argsort(np.abs(residuals(Z)).max(axis=1), kind="stable")
    inits = [uniform] + [Z[i] for i in order[:starts] if i != 0][: starts - 1]
    found, stalled = [], []
    for z0 in inits:
        # short pass first; only starts that approach a root get the full-tolerance polish
        sol = optimize.least_squares(F, z0, jac=jac, bounds=(0.0, 1.0), xtol=1e-12, ftol=1e-12, gtol=1e-12, max_nfev=60)
        if np.max(np.abs(sol.fun)) > 1e-4:
            continue
        sol = optimize.least_squares(F, sol.x, jac=jac, bounds=(0.0, 1.0), xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=2000)
        one = build(sol.x)
        res = float(np.max(np.abs(F(sol.x))))
        interior = all(np.all(one[s, list(sup)] > EDGE) for s, sup in mixing)
        if res <= ROOT_TOL and interior:
            if all(np.max(np.abs(one - y)) > 1e-7 for y in found):
                found.append(one)
        elif res < 1e-6 and interior:
            stalled.append(one)
    out = [one for one in found if prob.pure_ok(prob.batch(one[None]), fixed)[0]]
    undetermined = any(all(np.max(np.abs(x - y)) > 1e-6 for y in found) for x in stalled)
    return out, undetermined


def _key(res: EquilibriumResult):
    return (-round(res.utility, 12), tuple(np.round(res.strategy.kernel.ravel(), 12)))


def find_equilibria(
    env: Environment,
    I,
    N,
    epsilon: float = DEFAULT_EPSILON,
    tol: float = CERT_TOL,
    ladder=DEFAULT_LADDER,
    scan: int = 65,
) -> EquilibriumList:
    """All certified equilibria of the consumer game induced by (I, N), best first.

    ``epsilon`` is the tremble used for beliefs while solving and for the
    reported utility (0 evaluates the vanishing-tremble limit).
    """
    Ik = _arrays(env, I)
    if epsilon < 0.0 or epsilon >= 1.0:
        raise ModelError(f"epsilon: must lie in [0, 1), got {epsilon!r}")
    N = Narrative.parse(N)
    prob = _Problem(env, Ik, N.code, epsilon)
    subsets = _subsets(prob.A)
    results, undetermined = [], []
    for profile in itertools.product(subsets, repeat=len(prob.live)):
        sigma, fixed, mixing = _base_strategy(prob, profile)
        if not mixing:
            cands, stalled = ([sigma] if prob.pure_ok(prob.batch(sigma[None]), fixed)[0] else []), False
        elif prob.A == 2 and len(mixing) == 1:
            cands, stalled = _solve_one(prob, sigma, fixed, mixing[0][0], scan)
        elif prob.A == 2 and len(mixing) == 2:
            cands, stalled = _solve_two(prob, sigma, fixed, (mixing[0][0], mixing[1][0]), scan)
        else:
            cands, stalled = _solve_general(prob, sigma, fixed, mixing)
        full_profile = [frozenset({0})] * prob.S
        for s, sup in zip(prob.live, profile):
            full_profile[s] = sup
        if stalled:
            undetermined.append(tuple(full_profile))
        for cand in cands:
            check = is_equilibrium(env, Ik, N, cand, tol=tol, ladder=ladder)
            if not check:
                continue
            U = float(prob.utility(prob.batch(cand[None]))[0])
            strategy = ConsumerStrategy(np.clip(cand, 0.0, 1.0))
            results.append(EquilibriumResult(strategy, U, tuple(full_profile), check.trace, epsilon))
    results.sort(key=_key)
    unique = []
    for r in results:
        if all(np.max(np.abs(r.strategy.kernel - u.strategy.kernel)) > 1e-9 for u in unique):
            unique.append(r)
    return EquilibriumList(unique, undetermined)
