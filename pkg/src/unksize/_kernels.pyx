# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled ECM kernels. Mirrors ``_fallback`` exactly in signature."""

import numpy as np

from libc.math cimport exp, log, lgamma, INFINITY


def log_factorials(y):
    cdef const long long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef Py_ssize_t i, n = yv.shape[0]
    out = np.empty(n)
    cdef double[::1] ov = out
    for i in range(n):
        ov[i] = lgamma(<double>yv[i] + 1.0)
    return out


def estep(y, h, alphas, lambdas, lgy=None):
    cdef const long long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] av = np.ascontiguousarray(alphas, dtype=np.float64)
    cdef const double[::1] lv = np.ascontiguousarray(lambdas, dtype=np.float64)
    if lgy is None:
        lgy = log_factorials(y)
    cdef const double[::1] gv = np.ascontiguousarray(lgy, dtype=np.float64)
    cdef Py_ssize_t r = yv.shape[0], K = lv.shape[0], i, j
    pi = np.empty((r, K))
    cdef double[:, ::1] pv = pi
    log_a_arr = np.empty(K)
    log_l_arr = np.empty(K)
    cdef double[::1] log_a = log_a_arr
    cdef double[::1] log_l = log_l_arr
    for j in range(K):
        log_a[j] = log(av[j]) if av[j] > 0 else -INFINITY
        log_l[j] = log(lv[j])
    cdef double yi, hi, loghi, m, s, v, total = 0.0
    for i in range(r):
        yi = <double>yv[i]
        hi = hv[i]
        loghi = log(hi)
        m = -INFINITY
        for j in range(K):
            v = log_a[j] + yi * (log_l[j] + loghi) - lv[j] * hi - gv[i]
            pv[i, j] = v
            if v > m:
                m = v
        s = 0.0
        for j in range(K):
            v = exp(pv[i, j] - m)
            pv[i, j] = v
            s += v
        for j in range(K):
            pv[i, j] /= s
        total += m + log(s)
    return pi, total


def index_newton_terms(X, y, h, d1, d2, lam_bar):
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] d1v = np.ascontiguousarray(d1, dtype=np.float64)
    cdef const double[::1] d2v = np.ascontiguousarray(d2, dtype=np.float64)
    cdef const double[::1] lb = np.ascontiguousarray(lam_bar, dtype=np.float64)
    cdef Py_ssize_t r = xv.shape[0], p = xv.shape[1], i, a, b
    grad = np.zeros(p)
    hess = np.zeros((p, p))
    cdef double[::1] gv = grad
    cdef double[:, ::1] Hv = hess
    cdef double yi, resid, gw, w, q
    for i in range(r):
        yi = <double>yv[i]
        resid = yi / hv[i] - lb[i]
        gw = resid * d1v[i]
        q = d1v[i] / hv[i]
        w = resid * d2v[i] - yi * q * q
        for a in range(p):
            gv[a] += gw * xv[i, a]
            for b in range(a + 1):
                Hv[a, b] += w * xv[i, a] * xv[i, b]
    for a in range(p):
        for b in range(a):
            Hv[b, a] = Hv[a, b]
    return grad, hess


def t2_beta_part(y, h, lam_bar):
    cdef const long long[::1] yv = np.ascontiguousarray(y, dtype=np.int64)
    cdef const double[::1] hv = np.ascontiguousarray(h, dtype=np.float64)
    cdef const double[::1] lb = np.ascontiguousarray(lam_bar, dtype=np.float64)
    cdef Py_ssize_t i, r = yv.shape[0]
    cdef double total = 0.0
    for i in range(r):
        total += <double>yv[i] * log(hv[i]) - lb[i] * hv[i]
    return total
