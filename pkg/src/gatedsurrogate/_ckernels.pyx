# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled Matérn covariance kernels.

Mirrors ``_pykernels`` exactly in semantics; selected at import by
``gatedsurrogate.kernels`` when the extension is built.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, sqrt

cnp.import_array()

cdef double SQRT3 = 1.7320508075688772
cdef double SQRT5 = 2.23606797749979


cdef inline double _matern(double t, int code) nogil:
    if code == 0:
        return exp(-t)
    elif code == 1:
        return (1.0 + SQRT3 * t) * exp(-SQRT3 * t)
    return (1.0 + SQRT5 * t + 5.0 * t * t / 3.0) * exp(-SQRT5 * t)


cdef int _nu_code(double nu) except -1:
    if nu == 0.5:
        return 0
    if nu == 1.5:
        return 1
    if nu == 2.5:
        return 2
    raise ValueError(f"unsupported nu={nu}")


def cross_cov(double[:, ::1] a, double[:, ::1] b, double nu,
              double length_scale, double signal_variance):
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0], d = a.shape[1]
    if b.shape[1] != d:
        raise ValueError("dimension mismatch")
    cdef int code = _nu_code(nu)
    out = np.empty((n, m), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double s, diff, inv_ls = 1.0 / length_scale
    with nogil:
        for i in range(n):
            for j in range(m):
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - b[j, k]
                    s = s + diff * diff
                o[i, j] = signal_variance * _matern(sqrt(s) * inv_ls, code)
    return out


def gram(double[:, ::1] a, double nu, double length_scale,
         double signal_variance, double noise_variance):
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1]
    cdef int code = _nu_code(nu)
    out = np.empty((n, n), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t i, j, k
    cdef double s, diff, v, inv_ls = 1.0 / length_scale
    with nogil:
        for i in range(n):
            o[i, i] = signal_variance + noise_variance
            for j in range(i):
                s = 0.0
                for k in range(d):
                    diff = a[i, k] - a[j, k]
                    s = s + diff * diff
                v = signal_variance * _matern(sqrt(s) * inv_ls, code)
                o[i, j] = v
                o[j, i] = v
    return out
