# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels.  Same contracts as ``_fallback``; see ``ddsgd.kernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, floor, ceil
from libc.stdlib cimport qsort

cnp.import_array()


cdef int _cmp_double(const void *a, const void *b) noexcept nogil:
    cdef double x = (<double *>a)[0]
    cdef double y = (<double *>b)[0]
    if x < y:
        return -1
    if x > y:
        return 1
    return 0


cdef Py_ssize_t _trace_one(const double *s, const double *e, const long *dims, int nd,
                           double *alphas, long *out_idx, double *out_len) noexcept nogil:
    cdef double d[3]
    cdef double L = 0.0, amin = 0.0, amax = 1.0, t0, t1, p0, p1, a0, a1, mid, pos
    cdef int k
    cdef long j, jlo, jhi, cell
    cdef Py_ssize_t na = 0, nout = 0, q
    cdef long flat
    for k in range(nd):
        d[k] = e[k] - s[k]
        L = L + d[k] * d[k]
    L = sqrt(L)
    if L == 0.0:
        return 0
    for k in range(nd):
        if d[k] == 0.0:
            if s[k] < 0.0 or s[k] > dims[k]:
                return 0
        else:
            t0 = (0.0 - s[k]) / d[k]
            t1 = (dims[k] - s[k]) / d[k]
            if t0 > t1:
                t0, t1 = t1, t0
            if t0 > amin:
                amin = t0
            if t1 < amax:
                amax = t1
    if amin >= amax:
        return 0
    alphas[na] = amin
    na += 1
    for k in range(nd):
        if d[k] != 0.0:
            p0 = s[k] + amin * d[k]
            p1 = s[k] + amax * d[k]
            if p0 > p1:
                p0, p1 = p1, p0
            jlo = <long>floor(p0) + 1
            jhi = <long>ceil(p1) - 1
            for j in range(jlo, jhi + 1):
                alphas[na] = (j - s[k]) / d[k]
                na += 1
    alphas[na] = amax
    na += 1
    qsort(alphas, na, sizeof(double), _cmp_double)
    for q in range(1, na):
        a0 = alphas[q - 1]
        a1 = alphas[q]
        if a1 <= a0:
            continue
        mid = (a0 + a1) / 2.0
        flat = 0
        for k in range(nd):
            pos = s[k] + mid * d[k]
            cell = <long>floor(pos)
            if cell < 0:
                cell = 0
            elif cell > dims[k] - 1:
                cell = dims[k] - 1
            flat = flat * dims[k] + cell
        out_idx[nout] = flat
        out_len[nout] = (a1 - a0) * L
        nout += 1
    return nout


def trace_rays(starts, ends, dims):
    """Exact per-cell intersection lengths for a batch of segments (CSR triplet)."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] S = np.ascontiguousarray(starts, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=2, mode="c"] E = np.ascontiguousarray(ends, dtype=np.float64)
    cdef cnp.ndarray[long, ndim=1, mode="c"] D = np.ascontiguousarray(dims, dtype=np.int_)
    cdef int nd = D.shape[0]
    cdef Py_ssize_t nrays = S.shape[0], r, cnt, total = 0
    if nd < 1 or nd > 3:
        raise ValueError("only 1, 2 or 3 dimensions are supported")
    if S.shape[1] != nd or E.shape[1] != nd or E.shape[0] != nrays:
        raise ValueError("starts/ends must be (nrays, ndim)")
    cdef Py_ssize_t cap = 2
    for r in range(nd):
        cap += D[r] + 1
    cdef cnp.ndarray[double, ndim=1] alphas = np.empty(cap)
    cdef cnp.ndarray[long, ndim=1] idx = np.empty(nrays * cap, dtype=np.int_)
    cdef cnp.ndarray[double, ndim=1] lens = np.empty(nrays * cap)
    cdef cnp.ndarray[long, ndim=1] indptr = np.zeros(nrays + 1, dtype=np.int_)
    with nogil:
        for r in range(nrays):
            cnt = _trace_one(&S[r, 0], &E[r, 0], &D[0], nd, &alphas[0], &idx[total], &lens[total])
            total += cnt
            indptr[r + 1] = total
    return indptr, idx[:total].copy(), lens[:total].copy()


def geometric_sums(double c1, double c2, double lam, Py_ssize_t t_max):
    """``S[t] = sum_{s<t} alpha(s) lam^(t-s-1)`` for ``t = 0..t_max``, ``alpha(s) = 1/(c1 + c2 sqrt(s))``."""
    cdef cnp.ndarray[double, ndim=1] out = np.zeros(t_max + 1)
    cdef Py_ssize_t t
    cdef double a, acc = 0.0
    with nogil:
        for t in range(1, t_max + 1):
            if t == 1 and c1 == 0.0:
                a = 0.0
            else:
                a = 1.0 / (c1 + c2 * sqrt(<double>(t - 1)))
            acc = lam * acc + a
            out[t] = acc
    return out


def project_average(double[:, ::1] v, double R, double[:, ::1] y, Py_ssize_t t):
    """Clamp ``v`` to ``[-R, R]`` in place; for ``t >= 1`` fold it into the running average ``y``."""
    cdef Py_ssize_t i, j, m = v.shape[0], n = v.shape[1]
    cdef double w, c, val
    if t >= 1 and (y.shape[0] != m or y.shape[1] != n):
        raise ValueError("y must match v")
    with nogil:
        w = 1.0 / <double>t if t >= 1 else 0.0
        c = 1.0 - w
        for i in range(m):
            for j in range(n):
                val = v[i, j]
                if val > R:
                    val = R
                elif val < -R:
                    val = -R
                v[i, j] = val
                if t >= 1:
                    y[i, j] = c * y[i, j] + w * val
