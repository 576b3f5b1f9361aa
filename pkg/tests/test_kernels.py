import numpy as np
import pytest
from hypothesis import given, strategies as st

from narrative_media import kernels
from narrative_media.model_core import NARRATIVES, ConsumerStrategy, SignalFunction, anticipatory_utility
from narrative_media.random_envs import random_environment

py = kernels.backend_module("python")
try:
    cy = kernels.backend_module("cython")
except ImportError:  # extension not built
    cy = None

seeds = st.integers(0, 2**32 - 1)
shapes = st.tuples(st.integers(2, 4), st.integers(2, 3), st.integers(2, 3))


def _case(seed, T, A, Y, B=16):
    rng = np.random.default_rng(seed)
    env = random_environment(rng, "none", T=T, S=A, A=A, Y=Y)
    return env, rng.dirichlet(np.ones(A), size=(B, T)), rng.dirichlet(np.ones(A), size=(B, A))


def test_backend_is_reported():
    assert kernels.BACKEND in ("cython", "python")


@pytest.mark.skipif(cy is None, reason="compiled extension not built")
@given(seeds, shapes, st.sampled_from([0, 1, 2, 3]), st.sampled_from([0.0, 1e-9, 1e-3]))
def test_backends_agree(seed, shape, code, eps):
    env, X, sig = _case(seed, *shape)
    a = kernels.values_direct_batch(env, X, code, eps, py)
    b = kernels.values_direct_batch(env, X, code, eps, cy)
    assert np.max(np.abs(a - b)) <= 1e-13
    a = kernels.values_sigma_batch(env, X[0], sig, code, eps, py)
    b = kernels.values_sigma_batch(env, X[0], sig, code, eps, cy)
    assert np.max(np.abs(a - b)) <= 1e-13


@given(seeds, shapes, st.sampled_from(NARRATIVES))
def test_values_match_model_core(seed, shape, N):
    # anticipatory value recomputed from the weighted table must match the reference path
    env, X, sig = _case(seed, *shape, B=1)
    eps = 1e-6
    G = kernels.values(env, X[0], sig[0], N.code, eps)
    ref = anticipatory_utility(env, SignalFunction(X[0]), N, ConsumerStrategy(sig[0]), eps)
    assert abs(G.max(axis=1).sum() - ref) <= 1e-12


@given(seeds, shapes)
def test_direct_batch_is_obedient_sigma_batch(seed, shape):
    env, X, _ = _case(seed, *shape, B=4)
    A = shape[1]
    for code in range(4):
        d = kernels.values_direct_batch(env, X, code, 1e-9)
        for b in range(len(X)):
            s = kernels.values(env, X[b], np.eye(A), code, 1e-9)
            assert np.max(np.abs(d[b] - s)) <= 1e-13
