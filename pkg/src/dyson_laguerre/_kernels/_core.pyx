# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled mirror of _ref.py.

Every arithmetic operation appears in the same order as in the numpy
reference so the two backends agree bit for bit (the extension is compiled
with -ffp-contract=off to forbid fused multiply-adds).  Keep in sync with
_ref.py.
"""

import numpy as np


def dl_drift_batch(const double[:, ::1] x, double alpha, double beta, out=None):
    cdef Py_ssize_t r = x.shape[0], n = x.shape[1]
    out_arr = np.empty((r, n)) if out is None else out
    cdef double[:, ::1] o = out_arr
    cdef Py_ssize_t rep, i, j
    cdef double acc, base, half_beta
    if beta == 0.0 or n == 1:
        for rep in range(r):
            for i in range(n):
                o[rep, i] = alpha - x[rep, i]
        return out_arr
    half_beta = 0.5 * beta
    for rep in range(r):
        for i in range(n):
            base = alpha - x[rep, i]
            acc = 0.0
            for j in range(n):
                if j != i:
                    acc = acc + (x[rep, i] + x[rep, j]) / (x[rep, i] - x[rep, j])
            acc = acc * half_beta
            o[rep, i] = base + acc
    return out_arr


def edl_drift_batch(const double[:, ::1] y, double alpha, double beta, out=None):
    cdef Py_ssize_t r = y.shape[0], n = y.shape[1]
    out_arr = np.empty((r, n)) if out is None else out
    cdef double[:, ::1] o = out_arr
    s_arr = np.empty(n)
    cdef double[::1] s = s_arr
    cdef Py_ssize_t rep, i, j
    cdef double acc, base, two_am1
    two_am1 = 2.0 * alpha - 1.0
    if beta == 0.0 or n == 1:
        for rep in range(r):
            for i in range(n):
                o[rep, i] = two_am1 / y[rep, i] - y[rep, i] * 0.5
        return out_arr
    for rep in range(r):
        for i in range(n):
            s[i] = y[rep, i] * y[rep, i]
        for i in range(n):
            base = two_am1 / y[rep, i] - y[rep, i] * 0.5
            acc = 0.0
            for j in range(n):
                if j != i:
                    acc = acc + (s[i] + s[j]) / (s[i] - s[j])
            acc = acc * beta
            acc = acc / y[rep, i]
            o[rep, i] = base + acc
    return out_arr
