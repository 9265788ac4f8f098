# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot kernels.

Semantics mirror ``randtherm._pykernels`` exactly; see that module for the
documentation of each function.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, floor, pow, INFINITY

cnp.import_array()


cdef inline double _circ(double a, double b) nogil:
    cdef double d = fabs(a - b)
    d = d - floor(d)
    return d if d < 1.0 - d else 1.0 - d


def holder_local(values, double alpha, Py_ssize_t max_offset):
    cdef const double[::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i, j, o
    cdef double best = 0.0, diff, scale, q
    with nogil:
        for o in range(1, max_offset + 1):
            scale = pow(<double>o / <double>n, alpha)
            diff = 0.0
            for i in range(n):
                j = i + o
                if j >= n:
                    j -= n
                q = fabs(v[i] - v[j])
                if q > diff:
                    diff = q
            q = diff / scale
            if q > best:
                best = q
    return best


cdef inline Py_ssize_t _search(const double[::1] cd, const double[::1] cn,
                               double pd, double pn, bint maximize) nogil:
    cdef Py_ssize_t lo = 0, hi = cd.shape[0] - 1, mid, nxt
    cdef double cross
    while lo < hi:
        mid = (lo + hi) // 2
        nxt = mid + 1
        cross = (cd[mid] - pd) * (cn[nxt] - pn) - (cn[mid] - pn) * (cd[nxt] - pd)
        if (cross > 0) if maximize else (cross < 0):
            lo = mid + 1
        else:
            hi = mid
    return lo


cdef inline bint _pred(const double[::1] cd, const double[::1] cn, Py_ssize_t i,
                       double pd, double pn, bint maximize) nogil:
    cdef double cross = (cd[i] - pd) * (cn[i + 1] - pn) - (cn[i] - pn) * (cd[i + 1] - pd)
    return (cross > 0) if maximize else (cross < 0)


cdef inline Py_ssize_t _walk(const double[::1] cd, const double[::1] cn, double pd, double pn,
                             bint maximize, Py_ssize_t start) nogil:
    """Same index as ``_search``, found by walking from ``start``.

    The predicate is true on a prefix of the chain, so the first index where
    it fails is reached by stepping right while it holds and left while it
    fails one step back.  Long walks fall back to bisection.
    """
    cdef Py_ssize_t last = cd.shape[0] - 1, idx = start, steps = 0
    if idx > last:
        idx = last
    while idx < last and _pred(cd, cn, idx, pd, pn, maximize):
        idx += 1
        steps += 1
        if steps > 8:
            return _search(cd, cn, pd, pn, maximize)
    while idx > 0 and not _pred(cd, cn, idx - 1, pd, pn, maximize):
        idx -= 1
        steps += 1
        if steps > 8:
            return _search(cd, cn, pd, pn, maximize)
    return idx


def theta_bounds(phi, psi, double alpha, double k, Py_ssize_t max_offset,
                 upper_d, upper_n, lower_d, lower_n):
    cdef const double[::1] f = np.ascontiguousarray(phi, dtype=np.float64)
    cdef const double[::1] g = np.ascontiguousarray(psi, dtype=np.float64)
    cdef const double[::1] ud = np.ascontiguousarray(upper_d, dtype=np.float64)
    cdef const double[::1] un = np.ascontiguousarray(upper_n, dtype=np.float64)
    cdef const double[::1] ld = np.ascontiguousarray(lower_d, dtype=np.float64)
    cdef const double[::1] ln = np.ascontiguousarray(lower_n, dtype=np.float64)
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i, j, o, s
    cdef Py_ssize_t iu[2]
    cdef Py_ssize_t il[2]
    cdef double dmin = ud[0]
    cdef double lo_all = INFINITY, hi_all = -INFINITY, gap = INFINITY
    cdef double a, pd, pn, sgn, r, gmax
    with nogil:
        for o in range(1, max_offset + 1):
            a = k * pow(<double>o / <double>n, alpha)
            gmax = -INFINITY
            for i in range(n):
                j = i + o
                if j >= n:
                    j -= n
                pd = fabs(f[i] - f[j]) / a
                if pd > gmax:
                    gmax = pd
            if dmin - gmax < gap:
                gap = dmin - gmax
            if dmin - gmax <= 0.0:
                continue
            iu[0] = _search(ud, un, (f[0] - f[o]) / a, (g[0] - g[o]) / a, True)
            iu[1] = _search(ud, un, (f[o] - f[0]) / a, (g[o] - g[0]) / a, True)
            il[0] = _search(ld, ln, (f[0] - f[o]) / a, (g[0] - g[o]) / a, False)
            il[1] = _search(ld, ln, (f[o] - f[0]) / a, (g[o] - g[0]) / a, False)
            for i in range(n):
                j = i + o
                if j >= n:
                    j -= n
                for s in range(2):
                    sgn = 1.0 if s == 0 else -1.0
                    pd = sgn * (f[i] - f[j]) / a
                    pn = sgn * (g[i] - g[j]) / a
                    iu[s] = _walk(ud, un, pd, pn, True, iu[s])
                    r = (un[iu[s]] - pn) / (ud[iu[s]] - pd)
                    if r > hi_all:
                        hi_all = r
                    il[s] = _walk(ld, ln, pd, pn, False, il[s])
                    r = (ln[il[s]] - pn) / (ld[il[s]] - pd)
                    if r < lo_all:
                        lo_all = r
    return lo_all, hi_all, gap


def hyperbolic_times(s, double c):
    cdef const double[::1] v = np.ascontiguousarray(s, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0], i, cnt = 0
    out = np.empty(n, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef double t = 0.0, best = 0.0
    with nogil:
        for i in range(n):
            t += v[i] - c
            if t >= best:
                o[cnt] = i + 1
                cnt += 1
            if t > best:
                best = t
    return out[:cnt].copy()


def greedy_separated(orbits, double eps):
    cdef const double[:, ::1] v = np.ascontiguousarray(orbits, dtype=np.float64)
    cdef Py_ssize_t steps = v.shape[0], m = v.shape[1]
    cdef Py_ssize_t i, j, last = 0, cnt = 1
    out = np.empty(m, dtype=np.int64)
    cdef cnp.int64_t[::1] o = out
    cdef bint sep_last, sep_first
    o[0] = 0
    with nogil:
        for i in range(1, m):
            sep_last = False
            for j in range(steps):
                if _circ(v[j, i], v[j, last]) > eps:
                    sep_last = True
                    break
            if not sep_last:
                continue
            sep_first = False
            for j in range(steps):
                if _circ(v[j, i], v[j, 0]) > eps:
                    sep_first = True
                    break
            if sep_first:
                o[cnt] = i
                cnt += 1
                last = i
    return out[:cnt].copy()
