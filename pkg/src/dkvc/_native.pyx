# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels: pairwise scaled squared distances and the DTW
dynamic program. Mirrors ``_pure.py`` operation for operation so both
backends agree bitwise."""

import numpy as np

NAME = "native"


def scaled_sqdist(double[:, ::1] a, double[:, ::1] b, double[::1] inv_scale):
    cdef Py_ssize_t n = a.shape[0]
    cdef Py_ssize_t q = a.shape[1]
    cdef Py_ssize_t p = b.shape[0]
    out = np.empty((n, p), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double acc, d
    for i in range(n):
        for j in range(p):
            acc = 0.0
            for k in range(q):
                d = (a[i, k] - b[j, k]) * inv_scale[k]
                acc += d * d
            o[i, j] = acc
    return out


def dtw(double[:, ::1] dist):
    cdef Py_ssize_t n = dist.shape[0]
    cdef Py_ssize_t m = dist.shape[1]
    acc_arr = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] acc = acc_arr
    cdef Py_ssize_t i, j
    cdef double diag, up, left, best

    acc[0, 0] = dist[0, 0]
    for j in range(1, m):
        acc[0, j] = dist[0, j] + acc[0, j - 1]
    for i in range(1, n):
        acc[i, 0] = dist[i, 0] + acc[i - 1, 0]
        for j in range(1, m):
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            best = diag
            if up < best:
                best = up
            if left < best:
                best = left
            acc[i, j] = dist[i, j] + best

    path_arr = np.empty((n + m - 1, 2), dtype=np.int64)
    cdef long long[:, ::1] path = path_arr
    cdef Py_ssize_t k = n + m - 1
    i = n - 1
    j = m - 1
    k -= 1
    path[k, 0] = i
    path[k, 1] = j
    while i > 0 or j > 0:
        if i > 0 and j > 0:
            diag = acc[i - 1, j - 1]
            up = acc[i - 1, j]
            left = acc[i, j - 1]
            if diag <= up and diag <= left:
                i -= 1
                j -= 1
            elif up <= left:
                i -= 1
            else:
                j -= 1
        elif i > 0:
            i -= 1
        else:
            j -= 1
        k -= 1
        path[k, 0] = i
        path[k, 1] = j
    return float(acc[n - 1, m - 1]), path_arr[k:].copy()
