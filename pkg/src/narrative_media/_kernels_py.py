"""Vectorized numpy value kernels (fallback for the compiled module).

G[b, s, a] = sum_t p(t) p(s|t) W_b(t, a), with W_b the expected utility under
the narrative-fitted outcome kernel.  ``eps`` is the uniform tremble applied to
the strategy; ``eps = 0`` evaluates the vanishing-tremble limit, where an
unplayed action is treated as uninformative about the state.
"""

import numpy as np


def _fitted_w(prior, K, U, pa, code):
    B = pa.shape[0]
    if code == 0:
        return np.broadcast_to(np.einsum("tay,tay->ta", K, U), (B,) + K.shape[:2])
    pta = prior[None, :, None] * pa
    if code == 1:
        num = np.einsum("bta,tay->bay", pta, K)
        den = pta.sum(axis=1)
        limit = np.einsum("t,tay->ay", prior, K)
        safe = np.where(den > 0.0, den, 1.0)
        p_ya = np.where((den > 0.0)[..., None], num / safe[..., None], limit[None])
        return np.einsum("bay,tay->bta", p_ya, U)
    if code == 2:
        p_yt = np.einsum("bta,tay->bty", pa, K)
        return np.einsum("bty,tay->bta", p_yt, U)
    p_y = np.einsum("bta,tay->by", pta, K)
    return np.einsum("by,tay->bta", p_y, U)


def values_sigma_batch(prior, K, U, I, sigmas, code, eps):
    A = K.shape[1]
    smoothed = (1.0 - eps) * sigmas + eps / A
    pa = np.einsum("ts,bsa->bta", I, smoothed)
    W = _fitted_w(prior, K, U, pa, code)
    return np.einsum("t,ts,bta->bsa", prior, I, W)


def values_direct_batch(prior, K, U, X, code, eps):
    A = K.shape[1]
    pa = (1.0 - eps) * X + eps / A
    W = _fitted_w(prior, K, U, pa, code)
    return np.einsum("t,bts,bta->bsa", prior, X, W)
