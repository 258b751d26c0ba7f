# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Fused hyper-dual tanh kernels.

Channel layout of a packed stack ``z`` (shape ``(C, P)``): row 0 is the
value, rows ``1..n_first`` first derivatives, the remaining rows pure second
derivatives; ``dd_src[j]`` is the row holding the first derivative that
second-derivative row ``1 + n_first + j`` belongs to.
"""
import numpy as np

from libc.math cimport tanh


def tanh_forward(const double[:, ::1] z, Py_ssize_t n_first, const Py_ssize_t[::1] dd_src):
    cdef Py_ssize_t C = z.shape[0]
    cdef Py_ssize_t P = z.shape[1]
    cdef Py_ssize_t n_second = C - 1 - n_first
    out = np.empty((C, P), dtype=np.float64)
    tv_arr = np.empty(P, dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef double[::1] tv = tv_arr
    cdef Py_ssize_t p, c, j, row
    cdef double t, s1, s2, zs
    with nogil:
        for p in range(P):
            t = tanh(z[0, p])
            s1 = 1.0 - t * t
            s2 = -2.0 * t * s1
            tv[p] = t
            y[0, p] = t
            for c in range(1, n_first + 1):
                y[c, p] = s1 * z[c, p]
            for j in range(n_second):
                row = 1 + n_first + j
                zs = z[dd_src[j], p]
                y[row, p] = s1 * z[row, p] + s2 * zs * zs
    return out, tv_arr


def tanh_backward(const double[:, ::1] g, const double[:, ::1] z, const double[::1] tv,
                  Py_ssize_t n_first, const Py_ssize_t[::1] dd_src):
    cdef Py_ssize_t C = z.shape[0]
    cdef Py_ssize_t P = z.shape[1]
    cdef Py_ssize_t n_second = C - 1 - n_first
    out = np.empty((C, P), dtype=np.float64)
    cdef double[:, ::1] gz = out
    cdef Py_ssize_t p, c, j, row, src
    cdef double t, s1, s2, s3, acc, gdd, zs
    with nogil:
        for p in range(P):
            t = tv[p]
            s1 = 1.0 - t * t
            s2 = -2.0 * t * s1
            s3 = s1 * (6.0 * t * t - 2.0)
            acc = g[0, p] * s1
            for c in range(1, n_first + 1):
                gz[c, p] = g[c, p] * s1
                acc = acc + g[c, p] * z[c, p] * s2
            for j in range(n_second):
                row = 1 + n_first + j
                src = dd_src[j]
                gdd = g[row, p]
                zs = z[src, p]
                gz[row, p] = gdd * s1
                acc = acc + gdd * (z[row, p] * s2 + zs * zs * s3)
                gz[src, p] = gz[src, p] + 2.0 * gdd * s2 * zs
            gz[0, p] = acc
    return out
