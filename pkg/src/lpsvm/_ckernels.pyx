# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops; see ``_pykernels`` for the reference versions."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs

cnp.import_array()


cdef inline double _clip(double v, double C) nogil:
    if v < 0.0:
        return 0.0
    if v > C:
        return C
    return v


def project_box_hyperplane(const double[::1] z, const double[::1] y, double C, int max_iter=200):
    cdef Py_ssize_t n = z.shape[0], i
    cdef double span = 0.0, lo, hi, mid, h, theta, fixed_part, yz, ai
    cdef int it, nfree
    for i in range(n):
        if fabs(z[i]) > span:
            span = fabs(z[i])
    span += C + 1.0
    lo = -span
    hi = span
    for it in range(max_iter):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        h = 0.0
        for i in range(n):
            h += y[i] * _clip(z[i] - mid * y[i], C)
        if h > 0.0:
            lo = mid
        elif h < 0.0:
            hi = mid
        else:
            lo = mid
            hi = mid
            break
    theta = 0.5 * (lo + hi)
    out = np.empty(n)
    cdef double[::1] a = out
    fixed_part = 0.0
    yz = 0.0
    nfree = 0
    for i in range(n):
        a[i] = _clip(z[i] - theta * y[i], C)
        if 0.0 < a[i] < C:
            nfree += 1
            yz += y[i] * z[i]
        else:
            fixed_part += y[i] * a[i]
    if nfree > 0:
        theta = (yz + fixed_part) / nfree
        for i in range(n):
            if 0.0 < a[i] < C:
                ai = z[i] - theta * y[i]
                if ai < 0.0 or ai > C:
                    return out
        for i in range(n):
            if 0.0 < a[i] < C:
                a[i] = z[i] - theta * y[i]
    return out


cdef inline double _ipow(double x, long e) nogil:
    cdef double r = 1.0
    while e > 0:
        if e & 1:
            r *= x
        x *= x
        e >>= 1
    return r


def monomial_features(const double[:, ::1] X, const long[:, ::1] E):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], m = E.shape[0]
    cdef Py_ssize_t i, k, j
    cdef double v
    out = np.empty((n, m))
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(n):
            for k in range(m):
                v = 1.0
                for j in range(d):
                    if E[k, j]:
                        v *= _ipow(X[i, j], E[k, j])
                o[i, k] = v
    return out


def homogeneous_coefficients(const long[:, ::1] E, const double[::1] mult, const double[::1] y,
                             const double[:, ::1] X, const double[::1] weights):
    cdef Py_ssize_t M = E.shape[0], n = E.shape[1], D = X.shape[1]
    cdef Py_ssize_t k, i, j
    cdef double yp, acc, prod
    out = np.empty(M)
    cdef double[::1] o = out
    with nogil:
        for k in range(M):
            yp = 1.0
            for i in range(n):
                if E[k, i] & 1:
                    yp *= y[i]
            acc = 0.0
            for j in range(D):
                prod = weights[j]
                for i in range(n):
                    if E[k, i]:
                        prod *= _ipow(X[i, j], E[k, i])
                acc += prod
            o[k] = mult[k] * yp * acc
    return out


def poly_eval(const long[:, ::1] E, const double[::1] coef, const double[::1] alpha):
    cdef Py_ssize_t M = E.shape[0], n = E.shape[1], k, i
    cdef double total = 0.0, term
    with nogil:
        for k in range(M):
            term = coef[k]
            for i in range(n):
                if E[k, i]:
                    term *= _ipow(alpha[i], E[k, i])
            total += term
    return total
