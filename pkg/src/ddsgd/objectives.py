"""Per-node convex objectives with exact and stochastic gradient oracles.

All variants are functions of the linear predictor ``u = A x``:

==================  =====================================================
least-squares       ``1/2 ||Ax - b||^2``
huber               ``sum_j h(a_j^T x - b_j)`` with threshold ``delta``
logistic            ``sum_j log(1 + exp(a_j^T x)) - b01_j a_j^T x``
tikhonov-identity   ``1/2 (||Ax - b||^2 + mu ||x||^2)``
tikhonov-gradient   ``1/2 (||Ax - b||^2 + mu ||Dx||^2)``
==================  =====================================================

Logistic labels are given in {-1, +1} and mapped to ``b01`` in {0, 1}.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from ._rng import stream

VARIANTS = ("least-squares", "huber", "logistic", "tikhonov-identity", "tikhonov-gradient")


class ObjectiveError(ValueError):
    pass


def _loss(variant: str, u: np.ndarray, b: np.ndarray, delta: float) -> np.ndarray:
    if variant == "logistic":
        return np.logaddexp(0.0, u) - b * u
    r = u - b
    if variant == "huber":
        a = np.abs(r)
        return np.where(a <= delta, 0.5 * r * r, delta * (a - 0.5 * delta))
    return 0.5 * r * r


def _dloss(variant: str, u: np.ndarray, b: np.ndarray, delta: float) -> np.ndarray:
    if variant == "logistic":
        return expit(u) - b
    r = u - b
    if variant == "huber":
        return np.clip(r, -delta, delta)
    return r


def power_norm_sq(A, tol: float = 1e-8, max_iter: int = 100000) -> float:
    """Largest eigenvalue of ``A^T A`` (``||A||_2^2``) by power iteration."""
    n = A.shape[1]
    if n == 0 or A.shape[0] == 0:
        return 0.0
    v = 1.0 + 0.1 * np.random.default_rng(0).random(n)
    v /= np.linalg.norm(v)
    est = 0.0
    for _ in range(max_iter):
        w = A.T @ (A @ v)
        w = np.asarray(w).ravel()
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        new = float(v @ w)
        v = w / nw
        if abs(new - est) <= tol * abs(new):
            return new
        est = new
    return est


@dataclass(frozen=True, eq=False)
class LocalObjective:
    """Node objective ``f_i``; ``A`` may be dense or scipy sparse."""

    variant: str
    A: object
    b: np.ndarray
    delta: float = 0.05
    mu: float = 0.0
    D: Optional[object] = None
    sigma: float = 0.0
    L: float = field(default=float("nan"))

    @property
    def n(self) -> int:
        return self.A.shape[1]

    @property
    def p(self) -> int:
        return self.A.shape[0]

    def _check(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise ObjectiveError(f"expected x of length {self.n}, got shape {x.shape}")
        return x

    def evaluate(self, x) -> float:
        x = self._check(x)
        u = np.asarray(self.A @ x).ravel()
        val = float(np.sum(_loss(self.variant, u, self.b, self.delta)))
        if self.variant == "tikhonov-identity":
            val += 0.5 * self.mu * float(x @ x)
        elif self.variant == "tikhonov-gradient":
            dx = self.D @ x
            val += 0.5 * self.mu * float(dx @ dx)
        return val

    def gradient(self, x) -> np.ndarray:
        x = self._check(x)
        u = np.asarray(self.A @ x).ravel()
        g = np.asarray(self.A.T @ _dloss(self.variant, u, self.b, self.delta)).ravel()
        if self.variant == "tikhonov-identity":
            g = g + self.mu * x
        elif self.variant == "tikhonov-gradient":
            g = g + self.mu * np.asarray(self.D.T @ (self.D @ x)).ravel()
        return g

    def stochastic_gradient(self, x, rng: np.random.Generator, return_noise: bool = False):
        """``gradient(x) + eps`` with ``eps ~ N(0, sigma^2 I)`` drawn from ``rng``."""
        g = self.gradient(x)
        eps = self.sigma * rng.standard_normal(self.n)
        if return_noise:
            return g + eps, eps
        return g + eps

    def gradient_bound(self, R: float) -> float:
        return gradient_bound(self, R)


def lipschitz_constant(obj: LocalObjective) -> float:
    """Upper bound on the Lipschitz constant of ``grad f_i``."""
    a2 = power_norm_sq(obj.A)
    if obj.variant == "logistic":
        return a2 / 4.0
    if obj.variant == "tikhonov-identity":
        return a2 + obj.mu
    if obj.variant == "tikhonov-gradient":
        return a2 + obj.mu * power_norm_sq(obj.D)
    return a2


def gradient_bound(obj: LocalObjective, R: float) -> float:
    """Analytic bound on ``sup_{||x||_inf <= R} ||grad f_i(x)||`` (noise-free)."""
    if R <= 0:
        raise ObjectiveError("box radius R must be positive")
    n = obj.n
    if obj.variant == "logistic":
        A = obj.A
        rows = np.sqrt(np.asarray(A.multiply(A).sum(axis=1)).ravel()) if sp.issparse(A) else np.linalg.norm(A, axis=1)
        return float(np.sum(rows))
    anorm = float(np.sqrt(power_norm_sq(obj.A)))
    bnorm = float(np.linalg.norm(obj.b))
    bound = anorm * (anorm * np.sqrt(n) * R + bnorm)
    if obj.variant == "huber":
        return min(bound, anorm * obj.delta * np.sqrt(obj.p))
    if obj.variant == "tikhonov-identity":
        bound += obj.mu * np.sqrt(n) * R
    elif obj.variant == "tikhonov-gradient":
        bound += obj.mu * power_norm_sq(obj.D) * np.sqrt(n) * R
    return float(bound)


def make_objective(variant: str, A, b, delta: float = 0.05, mu: float = 0.0, D=None, sigma: float = 0.0) -> LocalObjective:
    if variant not in VARIANTS:
        raise ObjectiveError(f"unknown objective variant '{variant}'")
    if not sp.issparse(A):
        A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float).ravel()
    if A.shape[0] != b.shape[0]:
        raise ObjectiveError(f"A has {A.shape[0]} rows but b has length {b.shape[0]}")
    if delta <= 0:
        raise ObjectiveError("huber threshold delta must be positive")
    if mu < 0 or sigma < 0:
        raise ObjectiveError("mu and sigma must be nonnegative")
    if variant == "logistic":
        if not np.all(np.isin(b, (-1.0, 1.0))):
            raise ObjectiveError("logistic labels must lie in {-1, +1}")
        b = (b + 1.0) / 2.0
    if variant == "tikhonov-gradient":
        if D is None or D.shape[1] != A.shape[1]:
            raise ObjectiveError("tikhonov-gradient needs a regularization operator D with n columns")
    obj = LocalObjective(variant, A, b, float(delta), float(mu), D, float(sigma))
    object.__setattr__(obj, "L", lipschitz_constant(obj))
    return obj


class Problem:
    """The sum ``f = sum_i f_i`` over ``m`` nodes, with batched node gradients."""

    def __init__(self, objectives, R: float = 1.0, x_hat=None, name: str = ""):
        objectives = list(objectives)
        if not objectives:
            raise ObjectiveError("a problem needs at least one node objective")
        variants = {o.variant for o in objectives}
        if len(variants) != 1:
            raise ObjectiveError("all node objectives must share one variant")
        ns = {o.n for o in objectives}
        if len(ns) != 1:
            raise ObjectiveError("all node objectives must share one dimension n")
        self.objectives = objectives
        self.variant = variants.pop()
        self.n = ns.pop()
        self.m = len(objectives)
        self.R = float(R)
        self.x_hat = x_hat
        self.name = name
        self.sigma = max(o.sigma for o in objectives)
        self._delta = objectives[0].delta
        self._dense = all(not sp.issparse(o.A) for o in objectives) and len({o.p for o in objectives}) == 1 \
            and self.variant in ("least-squares", "huber", "logistic")
        if self._dense:
            self._A = np.stack([o.A for o in objectives])
            self._At = np.ascontiguousarray(self._A.transpose(0, 2, 1))
            self._b = np.stack([o.b for o in objectives])
            return
        first = objectives[0]
        self._blocked = all(o.mu == first.mu and o.D is first.D for o in objectives)
        if self._blocked:
            self._mu = first.mu
            self._DtD = (first.D.T @ first.D).tocsr() if first.D is not None else None
            self._blocks = {}
            self._A_all = sp.vstack([sp.csr_matrix(o.A) for o in objectives], format="csr")
            self._b_all = np.concatenate([o.b for o in objectives])

    def _block(self, lo: int, hi: int):
        key = (lo, hi)
        if key not in self._blocks:
            A = sp.block_diag([sp.csr_matrix(o.A) for o in self.objectives[lo:hi]], format="csr")
            b = np.concatenate([o.b for o in self.objectives[lo:hi]])
            self._blocks[key] = (A, A.T.tocsr(), b)
        return self._blocks[key]

    @property
    def L(self) -> float:
        return max(o.L for o in self.objectives)

    @property
    def L_total(self) -> float:
        return float(sum(o.L for o in self.objectives))

    def G(self, stochastic: bool = True) -> float:
        """Uniform gradient bound over the box; adds ``sigma sqrt(n)`` for the noisy oracle."""
        g = max(o.gradient_bound(self.R) for o in self.objectives)
        if stochastic:
            g += self.sigma * np.sqrt(self.n)
        return float(g)

    def with_sigma(self, sigma: float) -> "Problem":
        objs = [LocalObjective(o.variant, o.A, o.b, o.delta, o.mu, o.D, float(sigma), o.L) for o in self.objectives]
        return Problem(objs, self.R, self.x_hat, self.name)

    def gradients(self, X: np.ndarray, lo: int = 0, hi: Optional[int] = None) -> np.ndarray:
        """Exact gradients ``grad f_i(X[i])`` for nodes ``lo..hi-1`` as rows."""
        hi = self.m if hi is None else hi
        if self._dense:
            u = np.matmul(self._A[lo:hi], X[lo:hi, :, None])[:, :, 0]
            d = _dloss(self.variant, u, self._b[lo:hi], self._delta)
            return np.matmul(self._At[lo:hi], d[:, :, None])[:, :, 0]
        if self._blocked:
            A, At, b = self._block(lo, hi)
            Xs = X[lo:hi]
            u = A @ Xs.ravel()
            g = (At @ _dloss(self.variant, u, b, self._delta)).reshape(Xs.shape)
            if self.variant == "tikhonov-identity":
                g += self._mu * Xs
            elif self.variant == "tikhonov-gradient":
                g += self._mu * (self._DtD @ Xs.T).T
            return g
        return np.stack([self.objectives[i].gradient(X[i]) for i in range(lo, hi)])

    def value(self, x) -> float:
        """Global objective ``f(x) = sum_i f_i(x)`` at a single point."""
        x = np.asarray(x, dtype=float)
        if self._dense:
            u = self._A @ x
            return float(np.sum(_loss(self.variant, u, self._b, self._delta)))
        if self._blocked:
            val = float(np.sum(_loss(self.variant, self._A_all @ x, self._b_all, self._delta)))
            if self.variant == "tikhonov-identity":
                val += 0.5 * self.m * self._mu * float(x @ x)
            elif self.variant == "tikhonov-gradient":
                val += 0.5 * self.m * self._mu * float(x @ (self._DtD @ x))
            return val
        return float(sum(o.evaluate(x) for o in self.objectives))

    def full_gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self._dense:
            u = self._A @ x
            d = _dloss(self.variant, u, self._b, self._delta)
            return np.einsum("ipn,ip->n", self._A, d)
        if self._blocked:
            g = self._A_all.T @ _dloss(self.variant, self._A_all @ x, self._b_all, self._delta)
            if self.variant == "tikhonov-identity":
                g = g + self.m * self._mu * x
            elif self.variant == "tikhonov-gradient":
                g = g + self.m * self._mu * (self._DtD @ x)
            return g
        return np.sum([o.gradient(x) for o in self.objectives], axis=0)


def synthetic_problem(kind: str, m: int, n: int = 10, p: int = 5, seed: int = 0, R: float = 1.0,
                      sigma: float = 0.0, delta: float = 0.05, data_noise: float = 0.001) -> Problem:
    """Random decentralized regression data.

    ``x_hat ~ U[0,1]^n``; each ``A_i`` is ``p x n`` standard normal with columns
    scaled to unit norm; ``b_i = A_i x_hat + eps`` with ``eps`` of std
    ``data_noise``.  For ``kind='logistic'`` labels are ``sign(b_i)`` with
    ``sign(0) = 1``.
    """
    variant = {"synthetic-ls": "least-squares", "ls": "least-squares", "least-squares": "least-squares",
               "huber": "huber", "logistic": "logistic"}.get(kind)
    if variant is None:
        raise ObjectiveError(f"unknown synthetic problem kind '{kind}'")
    x_hat = stream(seed, "data", "xhat").random(n)
    objs = []
    for i in range(m):
        rng = stream(seed, "data", "node", i)
        A = rng.standard_normal((p, n))
        A /= np.linalg.norm(A, axis=0, keepdims=True)
        b = A @ x_hat + data_noise * rng.standard_normal(p)
        if variant == "logistic":
            b = np.where(b >= 0, 1.0, -1.0)
        objs.append(make_objective(variant, A, b, delta=delta, sigma=sigma))
    return Problem(objs, R=R, x_hat=x_hat, name=kind)
