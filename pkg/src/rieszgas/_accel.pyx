# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled backend for the hot kernels (pair sums and truncated field sums).

Contracts match rieszgas._accel_np exactly; see that module for reference
semantics.  Loops are sequential, so results are deterministic.
"""

from libc.math cimport INFINITY, log, pow, sqrt

import numpy as np

BACKEND_NAME = "compiled"


def pair_energy(points, double s, bint log_kind):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double total = 0.0, r2, diff
    for i in range(n - 1):
        for j in range(i + 1, n):
            r2 = 0.0
            for c in range(d):
                diff = pts[i, c] - pts[j, c]
                r2 += diff * diff
            if log_kind:
                total += -0.5 * log(r2)
            else:
                total += pow(r2, -0.5 * s)
    return total


def pair_gradient(points, double s, bint log_kind):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1]
    out_arr = np.zeros((n, d), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double r2, coef, diff[8]
    for i in range(n - 1):
        for j in range(i + 1, n):
            r2 = 0.0
            for c in range(d):
                diff[c] = pts[i, c] - pts[j, c]
                r2 += diff[c] * diff[c]
            if log_kind:
                coef = -1.0 / r2
            else:
                coef = -s * pow(r2, -0.5 * s - 1.0)
            for c in range(d):
                out[i, c] += coef * diff[c]
                out[j, c] -= coef * diff[c]
    return out_arr


def min_separation(points):
    cdef double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t n = pts.shape[0], d = pts.shape[1]
    cdef Py_ssize_t i, j, c
    cdef double best = INFINITY, r2, diff
    if n < 2:
        return INFINITY
    for i in range(n - 1):
        for j in range(i + 1, n):
            r2 = 0.0
            for c in range(d):
                diff = pts[i, c] - pts[j, c]
                r2 += diff * diff
            if r2 < best:
                best = r2
    return sqrt(best)


def field_sum_trunc(nodes, charges, double eta, double s, bint log_kind):
    cdef double[:, ::1] nds = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef double[:, ::1] chg = np.ascontiguousarray(charges, dtype=np.float64)
    cdef Py_ssize_t m = nds.shape[0], dk = nds.shape[1]
    cdef Py_ssize_t n = chg.shape[0], d = chg.shape[1]
    out_arr = np.zeros((m, dk), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, c
    cdef double r2, y2, coef, eta2 = eta * eta
    cdef double diff[8]
    for i in range(m):
        y2 = 0.0
        for c in range(d, dk):
            y2 += nds[i, c] * nds[i, c]
        for j in range(n):
            r2 = y2
            for c in range(d):
                diff[c] = nds[i, c] - chg[j, c]
                r2 += diff[c] * diff[c]
            if eta > 0.0 and r2 < eta2:
                continue
            if log_kind:
                coef = -1.0 / r2
            else:
                coef = -s * pow(r2, -0.5 * s - 1.0)
            for c in range(d):
                out[i, c] += coef * diff[c]
            for c in range(d, dk):
                out[i, c] += coef * nds[i, c]
    return out_arr
