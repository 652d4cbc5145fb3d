# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels: chirp chip correlations, exhaustive ML search and the
per-sample log-sum-exp of the finite-alphabet mutual information estimator.

Same signatures and semantics as :mod:`spacor._fallback`.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport cos, sin, exp, log, fabs, floor, rint

cnp.import_array()


def chip_correlations(d_in, double v0, Py_ssize_t n_valid, double n_pulse,
                      double chip, Py_ssize_t K, double a):
    cdef double[::1] d = np.ascontiguousarray(d_in, dtype=np.float64)
    cdef Py_ssize_t T = d.shape[0]
    out = np.zeros((K, T), dtype=np.float64), np.zeros((K, T), dtype=np.float64)
    cdef double[:, ::1] re = out[0]
    cdef double[:, ::1] im = out[1]
    cdef double c = 0.5 * n_pulse
    cdef Py_ssize_t i, j, k
    cdef double dj, v, u, r, ph
    with nogil:
        for j in range(T):
            dj = d[j]
            for i in range(n_valid):
                v = v0 + i
                u = v - dj
                r = rint(u)
                if fabs(u - r) < 1e-7:
                    u = r
                if u < 0.0 or u >= n_pulse:
                    continue
                k = <Py_ssize_t> (u / chip + 1e-9)
                if k > K - 1:
                    k = K - 1
                ph = a * (dj * dj - 2.0 * dj * (v - c))
                re[k, j] += cos(ph)
                im[k, j] += sin(ph)
    return out[0] + 1j * out[1]


cdef inline double _dist(const double complex[:, :, ::1] H, const double complex[:, ::1] Y,
                         const double complex[:, ::1] X, Py_ssize_t s, Py_ssize_t c) noexcept nogil:
    cdef Py_ssize_t R = H.shape[1], M = H.shape[2], r, m
    cdef double complex acc
    cdef double total = 0.0
    for r in range(R):
        acc = Y[s, r]
        for m in range(M):
            if X[m, c] != 0:
                acc = acc - H[s, r, m] * X[m, c]
        total += acc.real * acc.real + acc.imag * acc.imag
    return total


def ml_search(Y_in, H_in, X_in):
    cdef const double complex[:, ::1] Y = np.ascontiguousarray(Y_in, dtype=np.complex128)
    cdef const double complex[:, :, ::1] H = np.ascontiguousarray(H_in, dtype=np.complex128)
    cdef const double complex[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.complex128)
    cdef Py_ssize_t N = Y.shape[0], C = X.shape[1], s, c, best
    out_arr = np.empty(N, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef double dmin, dc
    with nogil:
        for s in range(N):
            best = 0
            dmin = _dist(H, Y, X, s, 0)
            for c in range(1, C):
                dc = _dist(H, Y, X, s, c)
                if dc < dmin:
                    dmin = dc
                    best = c
            out[s] = best
    return out_arr


def mi_terms(Y_in, H_in, X_in, idx_in, double inv_sigma2):
    cdef const double complex[:, ::1] Y = np.ascontiguousarray(Y_in, dtype=np.complex128)
    cdef const double complex[:, :, ::1] H = np.ascontiguousarray(H_in, dtype=np.complex128)
    cdef const double complex[:, ::1] X = np.ascontiguousarray(X_in, dtype=np.complex128)
    cdef const long long[::1] idx = np.ascontiguousarray(idx_in, dtype=np.int64)
    cdef Py_ssize_t N = Y.shape[0], C = X.shape[1], s, c
    out_arr = np.empty(N, dtype=np.float64)
    cdef double[::1] out = out_arr
    buf_arr = np.empty(C, dtype=np.float64)
    cdef double[::1] buf = buf_arr
    cdef double ref, emax, acc
    with nogil:
        for s in range(N):
            ref = _dist(H, Y, X, s, idx[s])
            emax = -1e308
            for c in range(C):
                buf[c] = (ref - _dist(H, Y, X, s, c)) * inv_sigma2
                if buf[c] > emax:
                    emax = buf[c]
            acc = 0.0
            for c in range(C):
                acc += exp(buf[c] - emax)
            out[s] = (emax + log(acc)) / log(2.0)
    return out_arr
