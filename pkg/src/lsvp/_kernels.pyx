# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled log-domain kernels.

Every reduction over source nodes uses the same fixed pairwise order, so a
result never depends on how callers schedule the output nodes.
"""

import numpy as np

from libc.math cimport exp, log, INFINITY
from libc.stdlib cimport free, malloc

cdef double _UNDERFLOW = -745.0
cdef Py_ssize_t _LEAF = 16


cdef double _pairwise(double* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, half
    cdef double s
    if n <= _LEAF:
        s = 0.0
        for i in range(n):
            s += v[i]
        return s
    half = n // 2
    return _pairwise(v, half) + _pairwise(v + half, n - half)


cdef double _lse_inplace(double* v, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t j
    cdef double top = -INFINITY
    cdef double d
    for j in range(n):
        if v[j] > top:
            top = v[j]
    if top == -INFINITY:
        return -INFINITY
    for j in range(n):
        d = v[j] - top
        if d > _UNDERFLOW:
            v[j] = exp(d)
        else:
            v[j] = 0.0
    return top + log(_pairwise(v, n))


def lse_affine(const double[:, ::1] a, const double[::1] x, const double[::1] y):
    """out[m, i] = log sum_j exp(a[m, j] + x[i] * y[j])."""
    cdef Py_ssize_t rows = a.shape[0], n = a.shape[1], p = x.shape[0]
    cdef Py_ssize_t m, i, j
    if y.shape[0] != n:
        raise ValueError("y length must match the source axis")
    out = np.empty((rows, p), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double* buf = <double*> malloc(max(n, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double xi
    try:
        with nogil:
            for m in range(rows):
                for i in range(p):
                    xi = x[i]
                    for j in range(n):
                        buf[j] = a[m, j] + xi * y[j]
                    o[m, i] = _lse_inplace(buf, n)
    finally:
        free(buf)
    return out


def lse_gauss(const double[:, ::1] a, const double[::1] x, const double[::1] y,
              double alpha, double s):
    """out[m, i] = log sum_j exp(a[m, j] - (alpha * x[i] - y[j])**2 / (2 s))."""
    cdef Py_ssize_t rows = a.shape[0], n = a.shape[1], p = x.shape[0]
    cdef Py_ssize_t m, i, j
    cdef double c, d, inv2s
    if y.shape[0] != n:
        raise ValueError("y length must match the source axis")
    if not s > 0.0:
        raise ValueError("kernel variance must be positive")
    inv2s = 1.0 / (2.0 * s)
    out = np.empty((rows, p), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double* buf = <double*> malloc(max(n, 1) * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    try:
        with nogil:
            for m in range(rows):
                for i in range(p):
                    c = alpha * x[i]
                    for j in range(n):
                        d = c - y[j]
                        buf[j] = a[m, j] - d * d * inv2s
                    o[m, i] = _lse_inplace(buf, n)
    finally:
        free(buf)
    return out


cdef void _legendre_row(const double* psi, const double* y, Py_ssize_t n,
                        const double* x, Py_ssize_t p, double* out, Py_ssize_t* arg,
                        Py_ssize_t* hull) noexcept nogil:
    cdef Py_ssize_t j, k, top = 0, i, bj
    cdef double best, val, ya, pa, yb, pb
    if n < 8:
        for i in range(p):
            best = -INFINITY
            bj = -1
            for j in range(n):
                if psi[j] != INFINITY:
                    val = x[i] * y[j] - psi[j]
                    if val > best:
                        best = val
                        bj = j
            out[i] = best
            arg[i] = bj
        return
    for j in range(n):
        if psi[j] == INFINITY:
            continue
        while top >= 2:
            ya = y[hull[top - 2]]
            pa = psi[hull[top - 2]]
            yb = y[hull[top - 1]]
            pb = psi[hull[top - 1]]
            if (yb - ya) * (psi[j] - pa) - (pb - pa) * (y[j] - ya) <= 0.0:
                top -= 1
            else:
                break
        hull[top] = j
        top += 1
    if top == 0:
        for i in range(p):
            out[i] = -INFINITY
            arg[i] = -1
        return
    k = 0
    for i in range(p):
        best = x[i] * y[hull[k]] - psi[hull[k]]
        while k + 1 < top:
            val = x[i] * y[hull[k + 1]] - psi[hull[k + 1]]
            if val >= best:
                best = val
                k += 1
            else:
                break
        out[i] = best
        arg[i] = hull[k]


def legendre_rows_arg(const double[:, ::1] psi, const double[::1] y, const double[::1] x):
    """Like :func:`legendre_rows`, also returning the maximizing source index (-1 if none)."""
    cdef Py_ssize_t rows = psi.shape[0], n = psi.shape[1], p = x.shape[0]
    cdef Py_ssize_t m
    if y.shape[0] != n:
        raise ValueError("y length must match the source axis")
    out = np.empty((rows, p), dtype=np.float64)
    arg = np.empty((rows, p), dtype=np.intp)
    cdef double[:, ::1] o = out
    cdef Py_ssize_t[:, ::1] a = arg
    cdef Py_ssize_t* hull = <Py_ssize_t*> malloc(max(n, 1) * sizeof(Py_ssize_t))
    if hull == NULL:
        raise MemoryError()
    try:
        with nogil:
            for m in range(rows):
                _legendre_row(&psi[m, 0], &y[0], n, &x[0], p, &o[m, 0], &a[m, 0], hull)
    finally:
        free(hull)
    return out, arg


def legendre_rows(const double[:, ::1] psi, const double[::1] y, const double[::1] x):
    """out[m, i] = max_j (x[i] * y[j] - psi[m, j]); y and x ascending."""
    return legendre_rows_arg(psi, y, x)[0]
