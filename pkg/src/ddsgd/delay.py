"""Random gradient staleness and the history buffer that serves stale gradients."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from ._rng import NodeStreams

KINDS = ("none", "fixed", "uniform", "truncated-geometric")


class DelayError(ValueError):
    pass


class BufferUnderrun(RuntimeError):
    """A requested stale entry is no longer (or not yet) in the buffer."""


@dataclass(frozen=True)
class DelayModel:
    """Per-node delay law.

    ``uniform`` draws from ``{1..B}``; ``truncated-geometric`` draws ``k`` in
    ``{0..B}`` with probability proportional to ``p (1-p)^k``; ``fixed`` always
    returns ``B``.  Every draw at iteration ``t`` is clamped to ``t``.
    """

    kind: str = "none"
    B: int = 0
    p: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise DelayError(f"unknown delay kind '{self.kind}'")
        if self.B < 0:
            raise DelayError("delay bound must be nonnegative")
        if self.kind == "uniform" and self.B < 1:
            raise DelayError("uniform delays need B >= 1")
        if self.kind == "truncated-geometric" and not 0.0 < self.p <= 1.0:
            raise DelayError("truncated-geometric needs 0 < p <= 1")

    @classmethod
    def fixed(cls, tau0: int) -> "DelayModel":
        return cls("fixed", int(tau0))

    @classmethod
    def uniform(cls, B: int) -> "DelayModel":
        return cls("uniform", int(B))

    @property
    def max_delay(self) -> int:
        return 0 if self.kind == "none" else self.B

    def _geometric_pmf(self) -> np.ndarray:
        k = np.arange(self.B + 1)
        w = self.p * (1.0 - self.p) ** k
        return w / w.sum()

    def second_moment(self) -> float:
        """Exact ``E[tau^2]`` of the unclamped law (the bound ``B^2`` of the analysis)."""
        if self.kind == "none":
            return 0.0
        if self.kind == "fixed":
            return float(self.B) ** 2
        if self.kind == "uniform":
            return (self.B + 1) * (2 * self.B + 1) / 6.0
        k = np.arange(self.B + 1)
        return float(np.sum(k * k * self._geometric_pmf()))

    def from_uniform(self, u, t: int) -> np.ndarray:
        """Map uniform draws ``u`` in [0, 1) to delays at iteration ``t``."""
        u = np.asarray(u, dtype=float)
        if self.kind == "none":
            tau = np.zeros(u.shape, dtype=np.int64)
        elif self.kind == "fixed":
            tau = np.full(u.shape, self.B, dtype=np.int64)
        elif self.kind == "uniform":
            tau = 1 + np.minimum((u * self.B).astype(np.int64), self.B - 1)
        else:
            cdf = np.cumsum(self._geometric_pmf())
            tau = np.minimum(np.searchsorted(cdf, u, side="right"), self.B).astype(np.int64)
        return np.minimum(tau, t)

    def sample(self, t: int, rng: np.random.Generator, size=None):
        if t < 0:
            raise DelayError("iteration index must be nonnegative")
        tau = self.from_uniform(rng.random(size), t)
        return int(tau) if size is None else tau


def sample_delay(model: DelayModel, node: int, t: int, rng: np.random.Generator) -> int:
    """One delay ``tau_i(t)`` for ``node``; ``rng`` must be that node's delay stream."""
    return model.sample(t, rng)


def second_moment(model: DelayModel) -> float:
    return model.second_moment()


class DelaySampler:
    """Draws ``tau(t)`` for all nodes from the per-node ``"delay"`` substreams."""

    def __init__(self, model: DelayModel, seed: int, m: int):
        self.model = model
        self._streams = None if model.kind in ("none", "fixed") else NodeStreams(seed, "delay", m, 1, kind="uniform")
        self.m = m

    def next(self, t: int) -> np.ndarray:
        if self._streams is None:
            return self.model.from_uniform(np.zeros(self.m), t)
        return self.model.from_uniform(self._streams.next()[:, 0], t)


class StaleBuffer:
    """Ring buffer of the last ``depth`` gradients and iterates of every node."""

    def __init__(self, m: int, n: int, depth: int):
        if depth < 1:
            raise DelayError("buffer depth must be at least 1")
        self.depth = depth
        self.g = np.zeros((depth, m, n))
        self.x = np.zeros((depth, m, n))
        self.stamp = np.full(depth, -1, dtype=np.int64)
        self._rows = np.arange(m)

    @classmethod
    def for_model(cls, m: int, n: int, model: DelayModel) -> "StaleBuffer":
        return cls(m, n, model.max_delay + 1)

    def push(self, t: int, g: np.ndarray, x: np.ndarray) -> None:
        k = t % self.depth
        self.g[k] = g
        self.x[k] = x
        self.stamp[k] = t

    def lookup(self, t: int, tau: np.ndarray) -> np.ndarray:
        """Rows ``g_i(t - tau_i)``; raises :class:`BufferUnderrun` if any is missing."""
        s = t - np.asarray(tau)
        slots = s % self.depth
        if np.any(tau < 0) or np.any(tau >= self.depth) or np.any(self.stamp[slots] != s):
            raise BufferUnderrun(f"stale gradient for delays {np.asarray(tau).tolist()} at t={t} not buffered")
        return self.g[slots, self._rows]

    def lookup_x(self, t: int, tau: np.ndarray) -> np.ndarray:
        s = t - np.asarray(tau)
        slots = s % self.depth
        if np.any(self.stamp[slots] != s):
            raise BufferUnderrun(f"stale iterate at t={t} not buffered")
        return self.x[slots, self._rows]

    def window(self) -> list:
        return sorted(int(s) for s in self.stamp if s >= 0)


def write_delays_csv(delays: np.ndarray, path) -> None:
    """Dump realized delays, one row per iteration: ``t, tau_0, ..., tau_{m-1}``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"tau_{i}" for i in range(delays.shape[1])])
        for t, row in enumerate(delays):
            w.writerow([t] + [int(v) for v in row])
