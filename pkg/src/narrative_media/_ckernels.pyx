# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled value kernels.

Same contract as ``_kernels_py``: given the prior, the true outcome kernel, the
utility tensor and a batch of (signal, strategy) pairs, return the weighted
value table G[b, s, a] = sum_t p(t) p(s|t) W_b(t, a), where W_b is the
expected utility under the narrative-fitted outcome kernel.  G[b, s, :] equals
p(s) V(s, :), so null signals come out as zero rows instead of NaN.
"""

import numpy as np

cdef enum:
    TRUE_CODE = 0
    EMPOWERING_CODE = 1
    FATALISTIC_CODE = 2
    DENIAL_CODE = 3


cdef void _fill_w(Py_ssize_t b, const double[::1] prior, const double[:, :, ::1] K,
                  const double[:, :, ::1] U, const double[:, :, ::1] pa, int code,
                  double[:, ::1] W, double[:, ::1] buf) noexcept nogil:
    cdef Py_ssize_t T = K.shape[0], A = K.shape[1], Y = K.shape[2]
    cdef Py_ssize_t t, a, y
    cdef double acc, m, w
    if code == TRUE_CODE:
        for t in range(T):
            for a in range(A):
                acc = 0.0
                for y in range(Y):
                    acc += K[t, a, y] * U[t, a, y]
                W[t, a] = acc
    elif code == EMPOWERING_CODE:
        for a in range(A):
            for y in range(Y):
                buf[a, y] = 0.0
            m = 0.0
            for t in range(T):
                m += prior[t] * pa[b, t, a]
            if m > 0.0:
                for t in range(T):
                    w = prior[t] * pa[b, t, a]
                    for y in range(Y):
                        buf[a, y] += w * K[t, a, y]
                for y in range(Y):
                    buf[a, y] /= m
            else:
                # limit of uniform trembles: an unplayed action is uninformative about t
                for t in range(T):
                    for y in range(Y):
                        buf[a, y] += prior[t] * K[t, a, y]
        for t in range(T):
            for a in range(A):
                acc = 0.0
                for y in range(Y):
                    acc += buf[a, y] * U[t, a, y]
                W[t, a] = acc
    elif code == FATALISTIC_CODE:
        for t in range(T):
            for y in range(Y):
                acc = 0.0
                for a in range(A):
                    acc += pa[b, t, a] * K[t, a, y]
                buf[t, y] = acc
        for t in range(T):
            for a in range(A):
                acc = 0.0
                for y in range(Y):
                    acc += buf[t, y] * U[t, a, y]
                W[t, a] = acc
    else:
        for y in range(Y):
            acc = 0.0
            for t in range(T):
                for a in range(A):
                    acc += prior[t] * pa[b, t, a] * K[t, a, y]
            buf[0, y] = acc
        for t in range(T):
            for a in range(A):
                acc = 0.0
                for y in range(Y):
                    acc += buf[0, y] * U[t, a, y]
                W[t, a] = acc


def values_sigma_batch(const double[::1] prior, const double[:, :, ::1] K, const double[:, :, ::1] U,
                       const double[:, ::1] I, const double[:, :, ::1] sigmas, int code, double eps):
    """G[b, s, a] for one signal kernel I[t, s] and a batch of strategies."""
    cdef Py_ssize_t B = sigmas.shape[0], S = I.shape[1], T = K.shape[0], A = K.shape[1], Y = K.shape[2]
    cdef Py_ssize_t b, t, s, a
    cdef double acc, tremble = eps / A
    out = np.zeros((B, S, A))
    pa_arr = np.empty((B, T, A))
    cdef double[:, :, ::1] G = out
    cdef double[:, :, ::1] pa = pa_arr
    cdef double[:, ::1] W = np.empty((T, A))
    cdef double[:, ::1] buf = np.empty((max(T, A), Y))
    with nogil:
        for b in range(B):
            for t in range(T):
                for a in range(A):
                    acc = 0.0
                    for s in range(S):
                        acc += I[t, s] * ((1.0 - eps) * sigmas[b, s, a] + tremble)
                    pa[b, t, a] = acc
            _fill_w(b, prior, K, U, pa, code, W, buf)
            for s in range(S):
                for a in range(A):
                    acc = 0.0
                    for t in range(T):
                        acc += prior[t] * I[t, s] * W[t, a]
                    G[b, s, a] = acc
    return out


def values_direct_batch(const double[::1] prior, const double[:, :, ::1] K, const double[:, :, ::1] U,
                        const double[:, :, ::1] X, int code, double eps):
    """G[b, s, a] for a batch of recommendation kernels X[b, t, s] followed obediently."""
    cdef Py_ssize_t B = X.shape[0], T = K.shape[0], A = K.shape[1], Y = K.shape[2]
    cdef Py_ssize_t b, t, s, a
    cdef double acc, tremble = eps / A
    out = np.zeros((B, A, A))
    pa_arr = np.empty((B, T, A))
    cdef double[:, :, ::1] G = out
    cdef double[:, :, ::1] pa = pa_arr
    cdef double[:, ::1] W = np.empty((T, A))
    cdef double[:, ::1] buf = np.empty((max(T, A), Y))
    with nogil:
        for b in range(B):
            for t in range(T):
                for a in range(A):
                    pa[b, t, a] = (1.0 - eps) * X[b, t, a] + tremble
            _fill_w(b, prior, K, U, pa, code, W, buf)
            for s in range(A):
                for a in range(A):
                    acc = 0.0
                    for t in range(T):
                        acc += prior[t] * X[b, t, s] * W[t, a]
                    G[b, s, a] = acc
    return out
