"""Pure-Python/numpy versions of the compiled kernels (identical arithmetic)."""
from __future__ import annotations

import math

import numpy as np


def _trace_one(s, e, dims):
    nd = len(dims)
    d = [e[k] - s[k] for k in range(nd)]
    L = 0.0
    for dk in d:
        L = L + dk * dk
    L = math.sqrt(L)
    if L == 0.0:
        return [], []
    amin, amax = 0.0, 1.0
    for k in range(nd):
        if d[k] == 0.0:
            if s[k] < 0.0 or s[k] > dims[k]:
                return [], []
        else:
            t0 = (0.0 - s[k]) / d[k]
            t1 = (dims[k] - s[k]) / d[k]
            if t0 > t1:
                t0, t1 = t1, t0
            amin = max(amin, t0)
            amax = min(amax, t1)
    if amin >= amax:
        return [], []
    alphas = [amin, amax]
    for k in range(nd):
        if d[k] != 0.0:
            p0 = s[k] + amin * d[k]
            p1 = s[k] + amax * d[k]
            if p0 > p1:
                p0, p1 = p1, p0
            for j in range(math.floor(p0) + 1, math.ceil(p1)):
                alphas.append((j - s[k]) / d[k])
    alphas.sort()
    idx, lens = [], []
    for a0, a1 in zip(alphas[:-1], alphas[1:]):
        if a1 <= a0:
            continue
        mid = (a0 + a1) / 2.0
        flat = 0
        for k in range(nd):
            cell = min(max(math.floor(s[k] + mid * d[k]), 0), dims[k] - 1)
            flat = flat * dims[k] + cell
        idx.append(flat)
        lens.append((a1 - a0) * L)
    return idx, lens


def trace_rays(starts, ends, dims):
    starts = np.asarray(starts, dtype=float)
    ends = np.asarray(ends, dtype=float)
    dims = [int(v) for v in dims]
    if not 1 <= len(dims) <= 3:
        raise ValueError("only 1, 2 or 3 dimensions are supported")
    if starts.ndim != 2 or starts.shape[1] != len(dims) or ends.shape != starts.shape:
        raise ValueError("starts/ends must be (nrays, ndim)")
    indptr = [0]
    idx, lens = [], []
    for s, e in zip(starts.tolist(), ends.tolist()):
        i, l = _trace_one(s, e, dims)
        idx.extend(i)
        lens.extend(l)
        indptr.append(len(idx))
    return (np.asarray(indptr, dtype=np.int_), np.asarray(idx, dtype=np.int_),
            np.asarray(lens, dtype=float))


def geometric_sums(c1, c2, lam, t_max):
    out = np.zeros(t_max + 1)
    acc = 0.0
    for t in range(1, t_max + 1):
        a = 0.0 if (t == 1 and c1 == 0.0) else 1.0 / (c1 + c2 * math.sqrt(t - 1))
        acc = lam * acc + a
        out[t] = acc
    return out


def project_average(v, R, y, t):
    np.clip(v, -R, R, out=v)
    if t >= 1:
        w = 1.0 / t
        y *= 1.0 - w
        y += w * v
