# cython: language_level=3
"""Compiled kernels; row-for-row twins of ``_kernels_py``."""
import numpy as np
from libc.math cimport sqrt, fabs, INFINITY


def soft_threshold(const double[:, ::1] X, double level):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double v, a
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    for i in range(n):
        for k in range(d):
            v = X[i, k]
            a = fabs(v) - level
            if a <= 0.0:
                o[i, k] = 0.0
            elif v > 0.0:
                o[i, k] = a
            else:
                o[i, k] = -a
    return out


def project_ball(const double[:, ::1] X, const double[::1] center, double radius):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double s, t, scale
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    for i in range(n):
        s = 0.0
        for k in range(d):
            t = X[i, k] - center[k]
            s += t * t
        if s > radius * radius:
            scale = sqrt(radius * radius / s)
            for k in range(d):
                o[i, k] = center[k] + (X[i, k] - center[k]) * scale
        else:
            for k in range(d):
                o[i, k] = X[i, k]
    return out


def project_box(const double[:, ::1] X, const double[::1] lower, const double[::1] upper):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double v
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    for i in range(n):
        for k in range(d):
            v = X[i, k]
            if v < lower[k]:
                v = lower[k]
            if v > upper[k]:
                v = upper[k]
            o[i, k] = v
    return out


def project_halfspace(const double[:, ::1] X, const double[::1] normal, double offset):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double e
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    for i in range(n):
        e = -offset
        for k in range(d):
            e += X[i, k] * normal[k]
        if e > 0.0:
            for k in range(d):
                o[i, k] = X[i, k] - e * normal[k]
        else:
            for k in range(d):
                o[i, k] = X[i, k]
    return out


def project_affine(const double[:, ::1] X, const double[::1] anchor, const double[:, ::1] basis):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], m = basis.shape[0], i, k, b
    cdef double c
    out = np.empty((n, d))
    cdef double[:, ::1] o = out
    for i in range(n):
        for k in range(d):
            o[i, k] = anchor[k]
        for b in range(m):
            c = 0.0
            for k in range(d):
                c += (X[i, k] - anchor[k]) * basis[b, k]
            for k in range(d):
                o[i, k] += c * basis[b, k]
    return out


def fne_margins(const double[:, ::1] X, const double[:, ::1] Y,
                const double[:, ::1] FX, const double[:, ::1] FY):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double dF, dx, dR, sF, sR, sx
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        sF = 0.0
        sR = 0.0
        sx = 0.0
        for k in range(d):
            dF = FX[i, k] - FY[i, k]
            dx = X[i, k] - Y[i, k]
            dR = dx - dF
            sF += dF * dF
            sR += dR * dR
            sx += dx * dx
        o[i] = sF + sR - sx
    return out


def ne_margins(const double[:, ::1] X, const double[:, ::1] Y,
               const double[:, ::1] TX, const double[:, ::1] TY):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, k
    cdef double dT, dx, sT, sx
    out = np.empty(n)
    cdef double[::1] o = out
    for i in range(n):
        sT = 0.0
        sx = 0.0
        for k in range(d):
            dT = TX[i, k] - TY[i, k]
            dx = X[i, k] - Y[i, k]
            sT += dT * dT
            sx += dx * dx
        o[i] = sqrt(sT) - sqrt(sx)
    return out


def monotone_min_margin(const double[:, ::1] X, const double[:, ::1] U):
    cdef Py_ssize_t n = X.shape[0], d = X.shape[1], i, j, k
    cdef Py_ssize_t bi = -1, bj = -1
    cdef double s, best = INFINITY
    for i in range(n - 1):
        for j in range(i + 1, n):
            s = 0.0
            for k in range(d):
                s += (X[j, k] - X[i, k]) * (U[j, k] - U[i, k])
            if s < best:
                best = s
                bi = i
                bj = j
    return best, bi, bj
