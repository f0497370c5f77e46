"""Numerical evaluation of the convergence bounds and empirical rate fits.

Notation follows the solver: ``alpha(t) = 1/(2(L + eta sqrt t))``, ``lam`` is
the spectral gap ``||W - J||``, ``G`` bounds the (expected) gradient norms on
the box, ``B^2`` bounds ``E[tau^2]`` and ``sigma^2`` the gradient-noise
variance.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels


class BoundError(ValueError):
    pass


def _check_lam(lam: float) -> None:
    if not 0.0 < lam < 1.0:
        raise BoundError(f"spectral gap must lie in (0, 1), got {lam}")


def disagreement_metrics(v) -> dict:
    """``frobenius = ||(I-J) v||_F`` and ``sum_sq = sum_i ||v_i - mean(v)||^2``."""
    v = np.asarray(v, dtype=float)
    if v.ndim != 2 or v.shape[0] < 1:
        raise BoundError("expected an m x n matrix with m >= 1")
    d = v - v.mean(axis=0)
    sum_sq = float(np.sum(d * d))
    return {"frobenius": math.sqrt(sum_sq), "sum_sq": sum_sq}


@dataclass(frozen=True)
class WeightedSum:
    exact: float
    bound: float
    c1_zero: bool = False


def geometric_weighted_sum(c1: float, c2: float, lam: float, t: int) -> WeightedSum:
    """Exact ``sum_{s<t} alpha(s) lam^(t-s-1)`` with ``alpha(s) = 1/(c1 + c2 sqrt s)``
    next to its closed-form bound ``sqrt(pi) lam^-2 / (c2 sqrt(t) log(1/lam))``.

    With ``c1 = 0`` the ``s = 0`` term is undefined and taken as 0 (``c1_zero``
    is set on the result).
    """
    _check_lam(lam)
    if c2 <= 0 or c1 < 0:
        raise BoundError("need c1 >= 0 and c2 > 0")
    if t < 1:
        raise BoundError("t must be at least 1")
    exact = float(kernels.geometric_sums(c1, c2, lam, t)[t])
    return WeightedSum(exact, weighted_sum_bound(c2, lam, t), c1 == 0.0)


def weighted_sum_bound(c2: float, lam, t):
    return math.sqrt(math.pi) * lam ** -2 / (c2 * np.sqrt(t) * np.log(1.0 / lam))


def weighted_sums(c1: float, c2: float, lam: float, t_max: int) -> np.ndarray:
    """All exact sums ``S[t]`` for ``t = 0..t_max`` (``S[0] = 0``)."""
    _check_lam(lam)
    return kernels.geometric_sums(c1, c2, lam, t_max)


@dataclass(frozen=True)
class DisagreementBound:
    exact_form: np.ndarray
    closed_form: np.ndarray
    y_form: np.ndarray


def disagreement_bound(t, G: float, m: int, lam: float, eta: float, L: float) -> DisagreementBound:
    """Bounds on ``E ||(I-J) x(t)||`` and ``E ||(I-J) y(t)||``.

    ``exact_form = sqrt(m) G sum_{s<t} alpha(s) lam^(t-s-1)``;
    ``closed_form = sqrt(pi m) G lam^-2 / (eta sqrt(t) log(1/lam))``;
    ``y_form`` is twice the closed form (bound for the running average).
    ``t`` may be a scalar or an array of positive integers.
    """
    _check_lam(lam)
    tt = np.atleast_1d(np.asarray(t, dtype=np.int64))
    if tt.min() < 1:
        raise BoundError("t must be at least 1")
    S = kernels.geometric_sums(2.0 * L, 2.0 * eta, lam, int(tt.max()))
    exact = math.sqrt(m) * G * S[tt]
    closed = math.sqrt(math.pi * m) * G * lam ** -2 / (eta * np.sqrt(tt) * math.log(1.0 / lam))
    out = DisagreementBound(exact, closed, 2.0 * closed)
    if np.ndim(t) == 0:
        return DisagreementBound(float(exact[0]), float(closed[0]), float(2.0 * closed[0]))
    return out


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the rate bounds plus the inputs they were computed from."""

    C: float
    K: float
    D_X: float
    lam: float
    G: float
    L: float
    eta: float
    m: int
    n: int
    R: float
    B: float
    sigma: float

    def step_difference(self, t):
        """Bound ``C / sqrt(t)`` on ``E ||x(t+1) - x(t)||``."""
        return self.C / np.sqrt(t)

    def stale_gap(self, t):
        """Bound ``C (sqrt(2m) B / sqrt(t) + 4 m B^2 / t)`` on ``E ||x(t) - x(t - tau(t))||``."""
        t = np.asarray(t, dtype=float)
        return self.C * (math.sqrt(2 * self.m) * self.B / np.sqrt(t) + 4 * self.m * self.B ** 2 / t)

    def stale_regime(self) -> float:
        """Iteration ``8 m B^2`` after which the stale gap is ``<= 2 sqrt(2m) C B / sqrt(t)``."""
        return 8.0 * self.m * self.B ** 2

    def running_average_gap(self, T):
        """Bound ``L D^2 / T + K / sqrt(T)`` on ``E f(y(T)) - f*``."""
        T = np.asarray(T, dtype=float)
        return self.L * self.D_X ** 2 / T + self.K / np.sqrt(T)

    def consensus_gap(self, T):
        """Bound ``(L D^2 + 2 sqrt(m) L C^2)/T + (K + 2 sqrt(m) C G)/sqrt(T)`` on ``E f(z(T)) - f*``."""
        T = np.asarray(T, dtype=float)
        rm = math.sqrt(self.m)
        return (self.L * self.D_X ** 2 + 2 * rm * self.L * self.C ** 2) / T \
            + (self.K + 2 * rm * self.C * self.G) / np.sqrt(T)

    def sqrt_coefficient(self) -> float:
        """Coefficient of ``1/sqrt(T)`` in :meth:`consensus_gap`."""
        return self.K + 2 * math.sqrt(self.m) * self.C * self.G


def bound_constants(*, lam: float, G: float, L: float, eta: float, m: int, n: int, R: float,
                    B: float, sigma: float) -> BoundConstants:
    _check_lam(lam)
    if eta <= 0:
        raise BoundError("eta must be positive")
    if min(G, L, R, B, sigma) < 0 or m < 1 or n < 1:
        raise BoundError("G, L, R, B, sigma must be nonnegative and m, n positive")
    C = math.sqrt(m) * G / eta * (math.sqrt(math.pi) * lam ** -2 / math.log(1.0 / lam) + 0.5)
    D = 2.0 * math.sqrt(m * n) * R
    K = eta * D ** 2 + 4.0 * math.sqrt(2.0 * m * L) * D * C * B + 4.0 * m * sigma ** 2 / eta
    return BoundConstants(C, K, D, lam, G, L, eta, m, n, R, B, sigma)


def optimal_eta(*, lam: float, G: float, L: float, m: int, n: int, R: float, B: float, sigma: float,
                grid=None) -> float:
    """``eta`` minimizing the ``1/sqrt(T)`` coefficient of the consensus-gap bound on a log grid."""
    grid = np.logspace(-6, 4, 2001) if grid is None else np.asarray(grid, dtype=float)
    vals = [bound_constants(lam=lam, G=G, L=L, eta=e, m=m, n=n, R=R, B=B, sigma=sigma).sqrt_coefficient()
            for e in grid]
    return float(grid[int(np.argmin(vals))])


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    points: int


def fit_loglog_rate(t, values, window=None) -> RateFit:
    """Least-squares line through ``(log t, log value)`` restricted to ``window = (lo, hi)``."""
    t = np.asarray(t, dtype=float)
    v = np.asarray(values, dtype=float)
    mask = np.ones(t.shape, dtype=bool) if window is None else (t >= window[0]) & (t <= window[1])
    tw, vw = t[mask], v[mask]
    if tw.size < 10:
        raise BoundError(f"need at least 10 points in the window, got {tw.size}")
    if np.any(vw <= 0) or not np.all(np.isfinite(vw)):
        raise BoundError("values in the fit window must be positive and finite")
    slope, intercept = np.polyfit(np.log(tw), np.log(vw), 1)
    return RateFit(float(slope), float(intercept), int(tw.size))
