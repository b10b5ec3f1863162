# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled path kernels; see ``_pykernels`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()


def levy_exp_grid(const double[::1] t, const double[:, ::1] W, const long long[::1] ptr,
                  const double[::1] jump_times, const double[::1] log_abs,
                  const unsigned char[::1] neg, double a, double b, double x0):
    cdef Py_ssize_t P = W.shape[0], K = W.shape[1]
    out_arr = np.empty((P, K))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, k, j, j_end
    cdef double s, bucket, sign, flips, bflips
    with nogil:
        for p in range(P):
            j = ptr[p]
            j_end = ptr[p + 1]
            s = 0.0
            flips = 0.0
            for k in range(K):
                bucket = 0.0
                bflips = 0.0
                while j < j_end and jump_times[j] <= t[k]:
                    bucket = bucket + log_abs[j]
                    bflips = bflips + neg[j]
                    j += 1
                s = s + bucket
                flips = flips + bflips
                sign = -1.0 if (<long long> flips) % 2 == 1 else 1.0
                out[p, k] = x0 * exp(a * t[k] + b * W[p, k] + s)
                if sign < 0.0:
                    out[p, k] = out[p, k] * -1.0
    return out_arr


def bridge_at_jumps(const double[::1] t, const double[:, ::1] W, const long long[::1] ptr,
                    const double[::1] jump_times, const double[::1] z):
    cdef Py_ssize_t n = jump_times.shape[0], P = W.shape[0], K = W.shape[1]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t p, j, k, prev_k
    cdef double s, w_s, tau, span, frac, var, t_right, w_right
    with nogil:
        for p in range(P):
            k = 1
            prev_k = -1
            for j in range(ptr[p], ptr[p + 1]):
                tau = jump_times[j]
                # first grid index with t[k] >= tau
                while k < K - 1 and t[k] < tau:
                    k += 1
                if tau <= 0.0:
                    out[j] = 0.0
                    prev_k = -1
                    continue
                if k == prev_k:
                    s = jump_times[j - 1]
                    w_s = out[j - 1]
                else:
                    s = t[k - 1]
                    w_s = W[p, k - 1]
                t_right = t[k]
                w_right = W[p, k]
                span = t_right - s
                frac = (tau - s) / span
                var = (tau - s) * (t_right - tau) / span
                out[j] = w_s + frac * (w_right - w_s) + sqrt(var) * z[j]
                prev_k = k
    return out_arr


def first_breach(const long long[::1] ptr, const double[::1] factors):
    cdef Py_ssize_t P = ptr.shape[0] - 1
    out_arr = np.full(P, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef Py_ssize_t p, j
    with nogil:
        for p in range(P):
            for j in range(ptr[p], ptr[p + 1]):
                if factors[j] <= 0.0:
                    out[p] = j
                    break
    return out_arr
