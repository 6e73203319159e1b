# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops for matching and cluster-robust variance."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, INFINITY

cnp.import_array()


def greedy_match_core(double[:, ::1] treated, double[:, ::1] comparison, bint replace):
    """Match each treated row, in the given order, to its nearest comparison row.

    Returns (index, distance); index is -1 once comparisons run out.
    Ties go to the lowest comparison index.
    """
    cdef Py_ssize_t n_t = treated.shape[0]
    cdef Py_ssize_t n_c = comparison.shape[0]
    cdef Py_ssize_t d = treated.shape[1]
    cdef Py_ssize_t i, j, k, best
    cdef double acc, diff, best_d
    cdef cnp.ndarray[cnp.int64_t, ndim=1] idx = np.full(n_t, -1, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dist = np.full(n_t, np.nan)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] used = np.zeros(n_c, dtype=np.uint8)

    for i in range(n_t):
        best = -1
        best_d = INFINITY
        for j in range(n_c):
            if used[j]:
                continue
            acc = 0.0
            for k in range(d):
                diff = treated[i, k] - comparison[j, k]
                acc += diff * diff
            if acc < best_d:
                best_d = acc
                best = j
        if best < 0:
            continue
        idx[i] = best
        dist[i] = sqrt(best_d)
        if not replace:
            used[best] = 1
    return idx, dist


def cluster_score_sums(double[:, ::1] X, double[::1] resid, cnp.int64_t[::1] codes, Py_ssize_t n_clusters):
    """Per-cluster score vectors: row g is sum over rows in cluster g of x_i * e_i."""
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t p = X.shape[1]
    cdef Py_ssize_t i, k
    cdef cnp.int64_t g
    cdef double e
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.zeros((n_clusters, p))
    cdef double[:, ::1] ov = out
    for i in range(n):
        g = codes[i]
        e = resid[i]
        for k in range(p):
            ov[g, k] += X[i, k] * e
    return out
