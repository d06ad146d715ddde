# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of the kernels in _kernels_py; same update rules and the
same arithmetic order, so both backends produce matching trajectories."""

from libc.math cimport fabs

import numpy as np

BACKEND = "compiled"


cdef inline void _score_row(double[:, ::1] X, Py_ssize_t c, double lam,
                            double m2, double beta, double[::1] sbuf) noexcept nogil:
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t i
    cdef double xi, si
    for i in range(d):
        xi = X[c, i]
        si = -lam * xi * (xi * xi - m2)
        if i < d - 1:
            si -= beta * (xi - X[c, i + 1])
        if i > 0:
            si -= beta * (xi - X[c, i - 1])
        sbuf[i] = si


def gl_sample_chunk(double[:, ::1] X, double[:, :, ::1] noise, double h,
                    double lam, double m2, double beta, double noise_scale):
    cdef Py_ssize_t s = noise.shape[0]
    cdef Py_ssize_t nc = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t t, c, i
    sbuf_arr = np.empty(d)
    cdef double[::1] sbuf = sbuf_arr
    with nogil:
        for t in range(s):
            for c in range(nc):
                _score_row(X, c, lam, m2, beta, sbuf)
                for i in range(d):
                    X[c, i] = X[c, i] + (h * sbuf[i] + noise_scale * noise[t, c, i])
    return np.asarray(X)


def gl_jacobian_chunk(double[:, ::1] X, double[:, :, ::1] J,
                      double[:, :, ::1] noise, double h, double lam, double m2,
                      double beta, double noise_scale, double[:, :, ::1] acc):
    cdef Py_ssize_t s = noise.shape[0]
    cdef Py_ssize_t nc = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t t, c, i, j
    cdef double xi, deg
    sbuf_arr = np.empty(d)
    diag_arr = np.empty(d)
    hj_arr = np.empty((d, d))
    cdef double[::1] sbuf = sbuf_arr
    cdef double[::1] diag = diag_arr
    cdef double[:, ::1] HJ = hj_arr
    with nogil:
        for t in range(s):
            for c in range(nc):
                for i in range(d):
                    xi = X[c, i]
                    deg = 2.0
                    if i == 0 or i == d - 1:
                        deg = 1.0
                    diag[i] = -(lam * (3.0 * xi * xi - m2)) - beta * deg
                for i in range(d):
                    for j in range(d):
                        HJ[i, j] = diag[i] * J[c, i, j]
                for i in range(1, d):
                    for j in range(d):
                        HJ[i, j] += beta * J[c, i - 1, j]
                for i in range(d - 1):
                    for j in range(d):
                        HJ[i, j] += beta * J[c, i + 1, j]
                for i in range(d):
                    for j in range(d):
                        J[c, i, j] = J[c, i, j] + h * HJ[i, j]
                        acc[c, i, j] += fabs(J[c, i, j])
                _score_row(X, c, lam, m2, beta, sbuf)
                for i in range(d):
                    X[c, i] = X[c, i] + (h * sbuf[i] + noise_scale * noise[t, c, i])
    return np.asarray(X)
