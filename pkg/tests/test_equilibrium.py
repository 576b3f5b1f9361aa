import numpy as np
import pytest

from narrative_media import scenarios
from narrative_media.equilibrium import best_responses, find_equilibria, is_equilibrium
from narrative_media.model_core import ConsumerStrategy, ModelError, Narrative, SignalFunction, anticipatory_utility
from narrative_media.random_envs import random_environment

EPS = 1e-9
FULL = SignalFunction.full_information(2)


def _q0(c):
    return min(1.0, np.sqrt(1.0 / (2.0 * c)) - 1.0)


# -- independent oracle ------------------------------------------------------------


def _oracle_G(env, Ik, p1, N, eps=EPS):
    """Weighted values G[b, s, a] for binary strategies p(a=1|s) = p1[b, s], by raw contraction."""
    sig = np.stack([1.0 - p1, p1], axis=-1)
    sig = (1.0 - eps) * sig + eps / 2.0
    p_tsa = np.einsum("t,ts,bsa->btsa", env.prior, Ik, sig)
    p_tay = np.einsum("btsa,tay->btay", p_tsa, env.outcome_kernel)
    keep = {"TRUE": (), "EMPOWERING": (1,), "FATALISTIC": (2,), "DENIAL": (1, 2)}[N.name]
    num = p_tay.sum(axis=keep, keepdims=True) if keep else p_tay
    pN = np.broadcast_to(num / num.sum(axis=3, keepdims=True), p_tay.shape)
    W = np.einsum("btay,tay->bta", pN, env.utility)
    return np.einsum("t,ts,bta->bsa", env.prior, Ik, W)


def _bisect(f, lo, hi, iters=60):
    flo = f(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        same = np.sign(fm) == np.sign(flo)
        lo, hi = np.where(same, mid, lo), np.where(same, hi, mid)
        flo = np.where(same, fm, flo)
    return 0.5 * (lo + hi)


def oracle_supports(env, Ik, N, step=1e-3, tol=1e-8):
    """Equilibrium support profiles of a binary game: grid at `step`, bisection on indifference."""
    grid = np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1)[1:-1]
    found = set()

    def ok_pure(G, s, a):
        return G[:, s, a] >= G[:, s, 1 - a] - tol

    # pure profiles
    for a0 in (0, 1):
        for a1 in (0, 1):
            G = _oracle_G(env, Ik, np.array([[a0, a1]], float), N)
            if ok_pure(G, 0, a0)[0] and ok_pure(G, 1, a1)[0]:
                found.add(((a0,), (a1,)))
    # one signal mixing
    for s in (0, 1):
        for b in (0, 1):
            def margin(x):
                p = np.empty((len(x), 2))
                p[:, s], p[:, 1 - s] = x, b
                G = _oracle_G(env, Ik, p, N)
                return G[:, s, 1] - G[:, s, 0]

            m = margin(grid)
            idx = np.flatnonzero(np.sign(m[:-1]) != np.sign(m[1:]))
            if idx.size == 0:
                continue
            roots = _bisect(margin, grid[idx], grid[idx + 1])
            p = np.empty((len(roots), 2))
            p[:, s], p[:, 1 - s] = roots, b
            G = _oracle_G(env, Ik, p, N)
            good = ok_pure(G, 1 - s, b) & (np.abs(G[:, s, 1] - G[:, s, 0]) <= tol)
            if good.any():
                prof = [None, None]
                prof[s], prof[1 - s] = (0, 1), (b,)
                found.add(tuple(prof))
    # both mixing: for every x0 find the s=1 indifference roots, then bisect along x0
    X0, X1 = np.meshgrid(grid, grid, indexing="ij")
    G = _oracle_G(env, Ik, np.stack([X0.ravel(), X1.ravel()], axis=1), N)
    m0 = (G[:, 0, 1] - G[:, 0, 0]).reshape(X0.shape)
    m1 = (G[:, 1, 1] - G[:, 1, 0]).reshape(X0.shape)
    ch0 = np.sign(m0[:-1, :-1]) != np.sign(m0[1:, :-1])
    ch0 |= np.sign(m0[:-1, :-1]) != np.sign(m0[:-1, 1:])
    ch1 = np.sign(m1[:-1, :-1]) != np.sign(m1[1:, :-1])
    ch1 |= np.sign(m1[:-1, :-1]) != np.sign(m1[:-1, 1:])
    for i, j in np.argwhere(ch0 & ch1):
        x0 = np.array([grid[i], grid[i + 1]])
        # on each edge x0 fixed, solve m1 = 0 in x1, then bisect m0 along x0
        def m0_on_curve(x0v):
            x0v = np.atleast_1d(x0v)
            f1 = lambda x1: (_oracle_G(env, Ik, np.stack([x0v, x1], axis=1), N)[:, 1, 1]
                             - _oracle_G(env, Ik, np.stack([x0v, x1], axis=1), N)[:, 1, 0])
            x1 = _bisect(f1, np.full(len(x0v), grid[max(j - 2, 0)]), np.full(len(x0v), grid[min(j + 3, len(grid) - 1)]))
            Gc = _oracle_G(env, Ik, np.stack([x0v, x1], axis=1), N)
            return Gc[:, 0, 1] - Gc[:, 0, 0], x1, Gc

        v, _, _ = m0_on_curve(x0)
        if np.sign(v[0]) == np.sign(v[1]):
            continue
        r0 = _bisect(lambda z: m0_on_curve(z)[0], x0[:1], x0[1:])
        _, r1, Gc = m0_on_curve(r0)
        if np.abs(Gc[:, 0, 1] - Gc[:, 0, 0]).max() <= tol and np.abs(Gc[:, 1, 1] - Gc[:, 1, 0]).max() <= tol:
            found.add(((0, 1), (0, 1)))
    return found


def _supports(results):
    return {tuple(tuple(sorted(s)) for s in r.support_profile) for r in results}


@pytest.mark.parametrize("seed", range(12))
@pytest.mark.parametrize("N", list(Narrative))
def test_find_equilibria_matches_grid_oracle(seed, N):
    rng = np.random.default_rng(1000 + seed)
    env = random_environment(rng, "none")
    Ik = rng.dirichlet(np.ones(2), size=2)
    res = find_equilibria(env, Ik, N)
    assert res.undetermined == []
    assert _supports(res) == oracle_supports(env, Ik, N)


# -- scenario examples --------------------------------------------------------------


def test_best_responses_fatalistic_never_act(ad):
    for q in (0.0, 0.4, 1.0):
        I = SignalFunction.binary(q, 1.0)
        live = [s for s in range(2) if (ad.prior @ I.kernel)[s] > 0.0]
        for sig in (np.eye(2), np.array([[0.3, 0.7], [0.6, 0.4]])):
            br = best_responses(ad, I, Narrative.FATALISTIC, ConsumerStrategy(sig))
            assert all(br[s] == {0} for s in live)
    # a null signal restricts nothing
    br = best_responses(ad, SignalFunction.binary(1.0, 1.0), Narrative.FATALISTIC, ConsumerStrategy(np.eye(2)))
    assert br[0] == {0, 1}


def test_best_responses_empowering_at_optimal_signal():
    for c in (0.15, 0.2, 0.3, 0.45):
        env = scenarios.american_dream(c)
        I = SignalFunction.binary(_q0(c) - 1e-6, 1.0)
        assert best_responses(env, I, Narrative.EMPOWERING, ConsumerStrategy(np.eye(2))) == ({0}, {1})


def test_best_responses_true_full_info_whac_a_mole():
    env = scenarios.whac_a_mole(0.6)
    br = best_responses(env, FULL, Narrative.TRUE, ConsumerStrategy(np.eye(2)))
    # enumerate: in state t, act a gives p(y=a|t,a); t=0: a=0 -> 0.4, a=1 -> 0.6; t=1: a=0 -> 0.0, a=1 -> 1.0
    Wt = np.einsum("tay,tay->ta", env.outcome_kernel, env.utility)
    assert br == tuple({int(np.argmax(Wt[t]))} for t in range(2))


def test_is_equilibrium_examples(ad):
    q0 = _q0(0.2)
    assert is_equilibrium(ad, SignalFunction.binary(q0, 1.0), Narrative.EMPOWERING, ConsumerStrategy(np.eye(2)))
    bad = is_equilibrium(ad, SignalFunction.binary(0.3, 1.0), Narrative.FATALISTIC, ConsumerStrategy.constant(1, 2, 2))
    assert not bad and bad.worst > 0.1
    for beta in (0.4, 0.6, 0.9):
        env = scenarios.whac_a_mole(beta)
        q1 = 0.25 + 1.0 / (4.0 * beta)
        I = SignalFunction.binary(1.0 - q1, q1)
        assert is_equilibrium(env, I, Narrative.FATALISTIC, ConsumerStrategy(np.eye(2)))
        # both conditional subjective values exceed one half
        res = find_equilibria(env, I, Narrative.FATALISTIC)
        assert res.head.utility > 0.5


def test_is_equilibrium_rejects_bad_ladder(ad):
    with pytest.raises(ModelError, match="ladder"):
        is_equilibrium(ad, FULL, Narrative.TRUE, ConsumerStrategy(np.eye(2)), ladder=(1e-6, 1e-3))


def test_find_equilibria_fatalistic_unique_inaction(ad):
    for q in (0.0, 0.5, 1.0):
        res = find_equilibria(ad, SignalFunction.binary(q, 1.0), Narrative.FATALISTIC)
        assert len(res) == 1
        assert np.array_equal(res.head.strategy.kernel, [[1.0, 0.0], [1.0, 0.0]])
        assert res.head.utility == pytest.approx(0.0, abs=1e-9)


def test_find_equilibria_empowering_full_info():
    for c in (0.1, 0.2, 0.4):
        env = scenarios.american_dream(c)
        res = find_equilibria(env, FULL, Narrative.EMPOWERING)
        assert np.allclose(res.head.strategy.kernel, np.eye(2))
        assert res.head.utility == pytest.approx(0.25 - c / 2.0, abs=1e-8)


def test_find_equilibria_degenerate_denial():
    env = scenarios.degenerate_inaction()
    res = find_equilibria(env, SignalFunction.binary(0.0, 0.0), Narrative.DENIAL)
    assert np.allclose(res.head.strategy.kernel[0], [1.0, 0.0])
    assert res.head.utility == pytest.approx(0.25, abs=1e-8)


@pytest.mark.parametrize("seed", range(3))
def test_returned_equilibria_certified_and_sorted(seed):
    rng = np.random.default_rng(seed)
    env = random_environment(rng, "none", T=2, S=3, A=3, Y=2)
    I = SignalFunction(rng.dirichlet(np.ones(3), size=2))
    for N in Narrative:
        res = find_equilibria(env, I, N)
        utils = [r.utility for r in res]
        assert utils == sorted(utils, reverse=True)
        for r in res:
            assert is_equilibrium(env, I, N, r.strategy, tol=1e-8)
            assert abs(r.utility - anticipatory_utility(env, I, N, r.strategy, r.epsilon)) <= 1e-9


@pytest.mark.parametrize("seed", range(6))
def test_true_equilibria_share_sigma_free_value(seed):
    rng = np.random.default_rng(50 + seed)
    env = random_environment(rng, "none")
    I = SignalFunction(rng.dirichlet(np.ones(2), size=2))
    ref = anticipatory_utility(env, I, Narrative.TRUE, ConsumerStrategy(np.full((2, 2), 0.5)))
    for r in find_equilibria(env, I, Narrative.TRUE):
        assert abs(r.utility - ref) <= 1e-9


def test_head_is_deterministic(ad):
    I = SignalFunction.binary(0.4, 1.0)
    a = find_equilibria(ad, I, Narrative.EMPOWERING)
    b = find_equilibria(ad, I.kernel.copy(), "empowering")
    assert [r.to_dict() for r in a] == [r.to_dict() for r in b]


def test_equilibrium_result_serializes(ad):
    d = find_equilibria(ad, FULL, Narrative.TRUE).head.to_dict()
    assert set(d) == {"strategy", "utility", "support_profile", "epsilon_trace"}
