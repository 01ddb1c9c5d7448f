# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels. Behaviour mirrors ``_kernels_py`` exactly."""

from libc.math cimport ceil, fabs, INFINITY

import numpy as np
cimport numpy as cnp

cnp.import_array()


cpdef Py_ssize_t left_quantile_index(Py_ssize_t n, double alpha):
    cdef Py_ssize_t k = <Py_ssize_t>ceil(alpha * n)
    if k < 1:
        k = 1
    if k > n:
        k = n
    while k > 1 and (k - 1) / <double>n >= alpha:
        k -= 1
    while k < n and k / <double>n < alpha:
        k += 1
    return k - 1


def sorted_var(const double[::1] s, double alpha):
    return float(s[left_quantile_index(s.shape[0], alpha)])


def sorted_es(const double[::1] s, double alpha):
    cdef Py_ssize_t n = s.shape[0]
    cdef double scale = 1.0 / ((1.0 - alpha) * n)
    cdef double suffix = 0.0   # sum of s[i+1:]
    cdef double best = INFINITY
    cdef double g, v
    cdef Py_ssize_t i
    for i in range(n - 1, -1, -1):
        v = s[i]
        if i == n - 1 or s[i + 1] != v:
            g = v + scale * (suffix - (n - 1 - i) * v)
            if g < best:
                best = g
        suffix = suffix + v
    return float(best)


def mean_pos_part(const double[::1] s, double shift):
    cdef Py_ssize_t i, n = s.shape[0]
    cdef double acc = 0.0, v
    for i in range(n):
        v = s[i] - shift
        if v > 0.0:
            acc += v
    return float(acc / n)


def ratio_test(const double[::1] xb, const double[::1] lb, const double[::1] ub,
               const double[::1] delta, const cnp.int64_t[::1] basis,
               double piv_tol, bint bland):
    cdef Py_ssize_t m = xb.shape[0], i, r = -1
    cdef double best = INFINITY, step, lim, mag, best_mag = -1.0
    cdef double[::1] steps = np.empty(m)
    for i in range(m):
        step = INFINITY
        if delta[i] < -piv_tol:
            lim = xb[i] - lb[i]
            if lim < 0.0:
                lim = 0.0
            step = lim / -delta[i]
        elif delta[i] > piv_tol:
            lim = ub[i] - xb[i]
            if lim < 0.0:
                lim = 0.0
            step = lim / delta[i]
        steps[i] = step
        if step < best:
            best = step
    if best == INFINITY:
        return -1, float(INFINITY)
    cdef double cut = best + 1e-12 * (best if best > 1.0 else 1.0)
    for i in range(m):
        if steps[i] <= cut:
            if bland:
                if r < 0 or basis[i] < basis[r]:
                    r = i
            else:
                mag = fabs(delta[i])
                if mag > best_mag or (mag == best_mag and basis[i] < basis[r]):
                    best_mag = mag
                    r = i
    return int(r), float(steps[r])


def price(const double[::1] d, const cnp.int8_t[::1] status, double tol, bint bland):
    cdef Py_ssize_t j, n = d.shape[0], q = -1
    cdef int dirn = 0, dq
    cdef double v, best = 0.0
    for j in range(n):
        v = 0.0
        dq = 0
        if status[j] == 1 and d[j] < -tol:
            v = -d[j]
            dq = 1
        elif status[j] == 2 and d[j] > tol:
            v = d[j]
            dq = -1
        elif status[j] == 3 and fabs(d[j]) > tol:
            v = fabs(d[j])
            dq = 1 if d[j] < 0 else -1
        if v > 0.0:
            if bland:
                return int(j), dq
            if v > best:
                best = v
                q = j
                dirn = dq
    return int(q), dirn


def eta_update(double[:, ::1] binv, const double[::1] col, Py_ssize_t r):
    """In-place product-form update of an explicit basis inverse.

    ``col`` is the entering column already multiplied by ``binv``; row ``r``
    is the pivot row.
    """
    cdef Py_ssize_t m = binv.shape[0], i, j
    cdef double piv = col[r], f
    for j in range(m):
        binv[r, j] = binv[r, j] / piv
    for i in range(m):
        if i == r:
            continue
        f = col[i]
        if f == 0.0:
            continue
        for j in range(m):
            binv[i, j] = binv[i, j] - f * binv[r, j]
