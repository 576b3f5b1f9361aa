"""Backend selection for the value kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used.  Set ``NARRATIVE_MEDIA_KERNELS=python`` to force the
numpy path (used by the equivalence tests and the benchmark).
"""

import os

import numpy as np

from . import _kernels_py


def _load(name: str | None = None):
    choice = (name or os.environ.get("NARRATIVE_MEDIA_KERNELS", "")).strip().lower()
    if choice in ("python", "numpy", "py"):
        return _kernels_py, "python"
    try:
        from . import _ckernels
    except ImportError:
        if choice in ("cython", "compiled"):
            raise
        return _kernels_py, "python"
    return _ckernels, "cython"


_impl, BACKEND = _load()


def backend_module(name: str):
    """Return the kernel module for ``"python"`` or ``"cython"``."""
    return _load(name)[0]


def _c(x) -> np.ndarray:
    return np.ascontiguousarray(x, dtype=float)


def values_sigma_batch(env, I, sigmas, code: int, eps: float, impl=None) -> np.ndarray:
    """Weighted values G[b, s, a] = p(s) V_b(s, a) for one signal kernel and many strategies."""
    impl = impl or _impl
    return np.asarray(
        impl.values_sigma_batch(_c(env.prior), _c(env.outcome_kernel), _c(env.utility), _c(I), _c(sigmas), int(code), float(eps))
    )


def values(env, I, sigma, code: int, eps: float, impl=None) -> np.ndarray:
    return values_sigma_batch(env, I, np.asarray(sigma, dtype=float)[None], code, eps, impl)[0]


def values_direct_batch(env, X, code: int, eps: float, impl=None) -> np.ndarray:
    """Weighted values G[b, s, a] for recommendation kernels X[b, t, s] with S = A, played obediently."""
    impl = impl or _impl
    return np.asarray(
        impl.values_direct_batch(_c(env.prior), _c(env.outcome_kernel), _c(env.utility), _c(X), int(code), float(eps))
    )
