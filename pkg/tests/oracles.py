"""Independent reference implementations used to cross-check the package.

Everything here is written from the formulas directly with plain loops and
``math`` so that a transcription slip in the vectorized code shows up as a
disagreement.
"""
import math

import numpy as np


# step sizes and weighted sums ------------------------------------------------

def alpha(L, eta, t):
    return 1.0 / (2.0 * (L + eta * math.sqrt(t)))


def weighted_sum(c1, c2, lam, t):
    total = 0.0
    for s in range(t):
        if c1 == 0.0 and s == 0:
            continue
        total += lam ** (t - s - 1) / (c1 + c2 * math.sqrt(s))
    return total


def weighted_sum_closed(c2, lam, t):
    return math.sqrt(math.pi) / (lam * lam * c2 * math.sqrt(t) * math.log(1.0 / lam))


def disagreement_exact(t, G, m, lam, eta, L):
    return math.sqrt(m) * G * sum(alpha(L, eta, s) * lam ** (t - 1 - s) for s in range(t))


def disagreement_closed(t, G, m, lam, eta):
    return math.sqrt(math.pi * m) * G / (lam ** 2 * eta * math.sqrt(t) * math.log(1.0 / lam))


def constant_C(lam, G, eta, m):
    return math.sqrt(m) * G * (math.sqrt(math.pi) / (lam ** 2 * math.log(1 / lam)) + 0.5) / eta


def diameter(m, n, R):
    # diameter of [-R, R]^{m x n} in the Frobenius norm
    return math.sqrt(m * n * (2 * R) ** 2)


def constant_K(lam, G, L, eta, m, n, R, B, sigma):
    C = constant_C(lam, G, eta, m)
    D = diameter(m, n, R)
    return eta * D * D + 4 * math.sqrt(2 * m * L) * D * C * B + 4 * m * sigma * sigma / eta


def y_gap_rhs(T, lam, G, L, eta, m, n, R, B, sigma):
    D = diameter(m, n, R)
    return L * D * D / T + constant_K(lam, G, L, eta, m, n, R, B, sigma) / math.sqrt(T)


def z_gap_rhs(T, lam, G, L, eta, m, n, R, B, sigma):
    C = constant_C(lam, G, eta, m)
    D = diameter(m, n, R)
    K = constant_K(lam, G, L, eta, m, n, R, B, sigma)
    return (L * D * D + 2 * math.sqrt(m) * L * C * C) / T + (K + 2 * math.sqrt(m) * C * G) / math.sqrt(T)


def stale_gap_rhs(t, lam, G, eta, m, B):
    C = constant_C(lam, G, eta, m)
    return C * math.sqrt(2 * m) * B / math.sqrt(t) + C * 4 * m * B * B / t


# objectives ------------------------------------------------------------------

def loss_grad(variant, A, b, x, delta=0.05, mu=0.0):
    """Value and gradient of one node objective, row by row."""
    A = np.asarray(A, dtype=float)
    f, g = 0.0, np.zeros(A.shape[1])
    for a, bj in zip(A, b):
        u = float(a @ x)
        if variant in ("least-squares", "tikhonov-identity"):
            r = u - bj
            f += 0.5 * r * r
            g += r * a
        elif variant == "huber":
            r = u - bj
            if abs(r) <= delta:
                f += 0.5 * r * r
                g += r * a
            else:
                f += delta * (abs(r) - 0.5 * delta)
                g += delta * math.copysign(1.0, r) * a
        elif variant == "logistic":
            y = (bj + 1.0) / 2.0
            f += math.log1p(math.exp(-abs(u))) + max(u, 0.0) - y * u
            g += (1.0 / (1.0 + math.exp(-u)) - y) * a
        else:
            raise ValueError(variant)
    if variant == "tikhonov-identity":
        f += 0.5 * mu * float(x @ x)
        g += mu * x
    return f, g


def projected_gradient_descent(variant, A, b, L, eta, T, R, delta=0.05):
    """``x <- clip(x - alpha(t) grad f(x))`` for ``t = 0..T``, starting at 0."""
    x = np.zeros(np.asarray(A).shape[1])
    for t in range(T + 1):
        _, g = loss_grad(variant, A, b, x, delta)
        x = np.clip(x - alpha(L, eta, t) * g, -R, R)
    return x


# mixing ----------------------------------------------------------------------

def metropolis(m, edges, lazy):
    deg = [0] * m
    for i, j in edges:
        deg[i] += 1
        deg[j] += 1
    W = [[0.0] * m for _ in range(m)]
    for i, j in edges:
        w = 1.0 / (1 + max(deg[i], deg[j]))
        W[i][j] = W[j][i] = w
    for i in range(m):
        W[i][i] = 1.0 - sum(W[i][j] for j in range(m) if j != i)
    W = np.array(W)
    return 0.5 * (np.eye(m) + W) if lazy else W


def second_eigenvalue_modulus(W):
    ev = np.sort(np.abs(np.linalg.eigvals(np.asarray(W))))[::-1]
    return float(ev[1]) if len(ev) > 1 else 0.0


# rays ------------------------------------------------------------------------

def clip_segment(s, e, lo, hi):
    """Liang-Barsky: parameter interval of the segment inside the box, or None."""
    t0, t1 = 0.0, 1.0
    for k in range(len(s)):
        d = e[k] - s[k]
        if d == 0.0:
            if s[k] < lo[k] or s[k] > hi[k]:
                return None
            continue
        a, b = (lo[k] - s[k]) / d, (hi[k] - s[k]) / d
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
        if t0 >= t1:
            return None
    return t0, t1


def ray_lengths_bruteforce(s, e, dims):
    """Intersection length of segment ``s -> e`` with every unit cell, by clipping."""
    s, e = np.asarray(s, float), np.asarray(e, float)
    length = float(np.linalg.norm(e - s))
    out = np.zeros(int(np.prod(dims)))
    for flat, idx in enumerate(np.ndindex(*dims)):
        iv = clip_segment(s, e, np.array(idx, float), np.array(idx, float) + 1.0)
        if iv is not None:
            out[flat] = (iv[1] - iv[0]) * length
    return out


def inside_length(s, e, dims):
    s, e = np.asarray(s, float), np.asarray(e, float)
    iv = clip_segment(s, e, np.zeros(len(dims)), np.asarray(dims, float))
    return 0.0 if iv is None else (iv[1] - iv[0]) * float(np.linalg.norm(e - s))
