"""Decentralized delayed stochastic gradient descent.

Each node ``i`` mixes its neighbours' iterates, takes a step along a stale
stochastic gradient and projects onto the box ``||x||_inf <= R``::

    x(t+1) = clip(W x(t) - alpha(t) g(t - tau(t)), -R, R)

and keeps a running average ``y(T) = (1/T) sum_{t=1..T} x(t+1)``.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from ._rng import NodeStreams, stream
from .delay import DelayModel, DelaySampler, StaleBuffer
from .network import MixingMatrix
from .objectives import Problem


class DivergenceError(FloatingPointError):
    """Iterates became non-finite."""

    def __init__(self, t: int, what: str = "iterate"):
        super().__init__(f"non-finite {what} at iteration {t}")
        self.t = t


@dataclass(frozen=True)
class StepSizePolicy:
    """``alpha(t) = 1 / (2 (L + eta sqrt(t)))``."""

    L: float
    eta: float = 0.01

    def __post_init__(self):
        if self.L < 0 or self.eta < 0 or (self.L == 0 and self.eta == 0):
            raise ValueError("step policy needs L >= 0, eta >= 0, not both zero")

    def __call__(self, t: int) -> float:
        return 1.0 / (2.0 * (self.L + self.eta * math.sqrt(t)))

    def alphas(self, t_max: int) -> np.ndarray:
        return 1.0 / (2.0 * (self.L + self.eta * np.sqrt(np.arange(t_max + 1))))


def step_size(policy: StepSizePolicy, t: int) -> float:
    return policy(t)


def project_box(v, R: float) -> np.ndarray:
    """Entrywise clamp onto ``[-R, R]`` (the projection onto the box, node by node)."""
    if R <= 0:
        raise ValueError("box radius must be positive")
    return np.clip(np.asarray(v, dtype=float), -R, R)


def consensus_average(y) -> np.ndarray:
    """``z = (1/m) sum_i y_i``."""
    return np.asarray(y, dtype=float).mean(axis=0)


@dataclass
class SolverState:
    t: int
    x: np.ndarray
    y: np.ndarray
    R: float
    stale: StaleBuffer


def init_state(problem: Problem, delay: DelayModel, R: Optional[float] = None, x0=None) -> SolverState:
    m, n = problem.m, problem.n
    R = problem.R if R is None else float(R)
    if x0 is None:
        x = np.zeros((m, n))
    else:
        x = np.array(np.broadcast_to(np.asarray(x0, dtype=float), (m, n)))
    return SolverState(0, x, np.zeros((m, n)), R, StaleBuffer.for_model(m, n, delay))


class GradientOracle:
    """Eager per-iteration stochastic gradients ``g_i(t)`` for all nodes.

    Noise for node ``i`` comes from the substream ``(seed, "noise", i)``.  With
    ``workers > 1`` node blocks are evaluated on a thread pool and merged in
    node order; the result is bitwise identical to the sequential path.
    """

    def __init__(self, problem: Problem, seed: int, workers: int = 1):
        self.problem = problem
        self.sigma = problem.sigma
        self.noise = NodeStreams(seed, "noise", problem.m, problem.n) if self.sigma > 0 else None
        self.workers = max(1, int(workers))
        self._pool = None
        if self.workers > 1:
            bounds = np.linspace(0, problem.m, min(self.workers, problem.m) + 1).astype(int)
            self._blocks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
            self._pool = ThreadPoolExecutor(max_workers=self.workers)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self._pool is None:
            g = self.problem.gradients(x)
        else:
            parts = self._pool.map(lambda b: self.problem.gradients(x, b[0], b[1]), self._blocks)
            g = np.concatenate(list(parts), axis=0)
        if self.noise is not None:
            g += self.sigma * self.noise.next()
        return g

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()
            self._pool = None


def step(state: SolverState, W, oracle: GradientOracle, delays: DelaySampler, policy: StepSizePolicy) -> np.ndarray:
    """Advance ``state`` by one iteration in place; returns the delays used.

    Order: evaluate and buffer ``g(t)`` at ``x(t)``; draw ``tau(t)``; mix, step
    with ``g(t - tau(t))`` and project; fold ``x(t+1)`` into the running average
    (for ``t >= 1``); increment ``t``.
    """
    W = W.W if isinstance(W, MixingMatrix) else W
    t = state.t
    g = oracle(state.x)
    state.stale.push(t, g, state.x)
    tau = delays.next(t)
    stale = state.stale.lookup(t, tau)
    v = W @ state.x - policy(t) * stale
    kernels.project_average(v, state.R, state.y, t)
    if not np.isfinite(v).all():
        raise DivergenceError(t)
    state.x = v
    state.t = t + 1
    return tau


def disagreement(v) -> float:
    """``||(I - J) v||_F``."""
    v = np.asarray(v, dtype=float)
    d = v - v.mean(axis=0)
    return float(np.sqrt(np.sum(d * d)))


@dataclass
class RunTrace:
    """Per-iteration record of one run.

    Row ``k`` (``T = k + 1``) holds ``alpha(T)``, ``f(z(T)) - f*``,
    ``sum_i ||y_i(T) - z(T)||^2``, ``||(I-J) x(T)||`` and ``max_i tau_i(T)``.
    ``x_disagreement[t]`` is ``||(I-J) x(t)||`` for ``t = 0..T+1`` and
    ``step_norm[t]`` is ``||x(t+1) - x(t)||`` for ``t = 0..T``.
    """

    T: np.ndarray
    alpha: np.ndarray
    obj_gap: np.ndarray
    disagreement_y: np.ndarray
    disagreement_x: np.ndarray
    max_delay: np.ndarray
    x_disagreement: np.ndarray
    step_norm: np.ndarray
    f_star: float
    x_final: np.ndarray
    y_final: np.ndarray
    delays: Optional[np.ndarray] = None
    wall_clock: Optional[np.ndarray] = None
    extra: dict = field(default_factory=dict)

    @property
    def z_final(self) -> np.ndarray:
        return consensus_average(self.y_final)

    def columns(self) -> dict:
        cols = {
            "t": self.T,
            "alpha": self.alpha,
            "obj_gap": self.obj_gap,
            "disagreement_y": self.disagreement_y,
            "disagreement_x": self.disagreement_x,
            "max_delay": self.max_delay,
        }
        if self.wall_clock is not None:
            cols["wall_clock"] = self.wall_clock
        cols.update(self.extra)
        return cols


def write_csv(columns: dict, path) -> None:
    """Write equal-length columns with a header row; floats use ``repr`` (exact round-trip)."""
    names = list(columns)
    data = [np.asarray(columns[k]) for k in names]
    lengths = {len(c) for c in data}
    if len(lengths) > 1:
        raise ValueError(f"columns have unequal lengths {sorted(lengths)}")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*[c.tolist() for c in data]):
            w.writerow([repr(v) if isinstance(v, float) else v for v in row])


def read_csv(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {h: np.array([float(r[k]) for r in body]) for k, h in enumerate(header)}


def run(problem: Problem, W, delay: DelayModel, policy: StepSizePolicy, T: int, seed: int,
        f_star: Optional[float] = None, x0=None, workers: int = 1, keep_delays: bool = True) -> RunTrace:
    """Run ``T + 1`` iterations (``t = 0..T``) and record ``T`` rows.

    Deterministic given ``seed``.  ``f_star`` defaults to the centralized
    reference value.  Raises :class:`DivergenceError` on non-finite iterates.
    """
    if T < 1:
        raise ValueError("T must be at least 1")
    W = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    if W.shape != (problem.m, problem.m):
        raise ValueError(f"W has shape {W.shape} for a problem with m={problem.m}")
    if f_star is None:
        f_star = centralized_reference(problem).f_star
    state = init_state(problem, delay, x0=x0)
    oracle = GradientOracle(problem, seed, workers)
    sampler = DelaySampler(delay, seed, problem.m)
    alpha = policy.alphas(T)[1:]
    gap = np.empty(T)
    dis_y = np.empty(T)
    max_delay = np.empty(T, dtype=np.int64)
    xdis = np.empty(T + 2)
    steps = np.empty(T + 1)
    delays = np.empty((T + 1, problem.m), dtype=np.int32) if keep_delays else None
    xdis[0] = disagreement(state.x)
    try:
        for t in range(T + 1):
            prev = state.x
            tau = step(state, W, oracle, sampler, policy)
            if delays is not None:
                delays[t] = tau
            d = state.x - prev
            steps[t] = math.sqrt(float(np.sum(d * d)))
            xdis[t + 1] = disagreement(state.x)
            if t >= 1:
                z = state.y.mean(axis=0)
                dy = state.y - z
                gap[t - 1] = problem.value(z) - f_star
                dis_y[t - 1] = float(np.sum(dy * dy))
                max_delay[t - 1] = int(tau.max())
                if not math.isfinite(gap[t - 1]):
                    raise DivergenceError(t, "objective")
    finally:
        oracle.close()
    return RunTrace(
        T=np.arange(1, T + 1), alpha=alpha, obj_gap=gap, disagreement_y=dis_y,
        disagreement_x=xdis[1:T + 1], max_delay=max_delay, x_disagreement=xdis,
        step_norm=steps, f_star=float(f_star), x_final=state.x, y_final=state.y, delays=delays,
    )


@dataclass
class ReferenceSolution:
    x_star: np.ndarray
    f_star: float
    iterations: int
    grad_map_norm: float
    converged: bool


def gradient_map_norm(problem: Problem, x, L: float, R: float) -> float:
    g = problem.full_gradient(x)
    return float(np.linalg.norm((x - np.clip(x - g / L, -R, R)) * L))


def centralized_reference(problem: Problem, R: Optional[float] = None, tol: float = 1e-10,
                          max_iter: int = 200000, x0=None) -> ReferenceSolution:
    """Minimize ``sum_i f_i`` over the box with accelerated projected gradient.

    Constant step ``1/sum_i L_i``, momentum restart when the step opposes the
    momentum; stops once the gradient-map norm is at most ``tol``.
    """
    R = problem.R if R is None else float(R)
    L = problem.L_total
    if not np.isfinite(L) or L <= 0:
        raise ValueError("reference solver needs a positive finite total Lipschitz constant")
    x = np.clip(np.zeros(problem.n) if x0 is None else np.asarray(x0, dtype=float), -R, R)
    yv = x.copy()
    tk = 1.0
    best_x, best_f = x.copy(), problem.value(x)
    gm = gradient_map_norm(problem, x, L, R)
    k = 0
    while k < max_iter and gm > tol:
        k += 1
        x_new = np.clip(yv - problem.full_gradient(yv) / L, -R, R)
        if np.dot(yv - x_new, x_new - x) > 0:
            tk = 1.0
        t_next = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * tk * tk))
        yv = x_new + ((tk - 1.0) / t_next) * (x_new - x)
        x, tk = x_new, t_next
        f = problem.value(x)
        if f <= best_f:
            best_x, best_f = x.copy(), f
        gm = gradient_map_norm(problem, x, L, R)
    if gm <= tol:
        # the stationarity certificate belongs to the last iterate, so return it
        best_x, best_f = x, problem.value(x)
    final_gm = gradient_map_norm(problem, best_x, L, R)
    return ReferenceSolution(best_x, float(best_f), k, final_gm, bool(final_gm <= tol))


@dataclass(frozen=True)
class ComputeTimes:
    """Per-evaluation compute time ``U[lo, hi]``, scaled by ``straggler_factor`` on straggler nodes."""

    lo: float = 0.001
    hi: float = 0.5
    stragglers: tuple = ()
    straggler_factor: float = 10.0

    def __post_init__(self):
        if not 0 < self.lo <= self.hi:
            raise ValueError("compute times need 0 < lo <= hi")

    def draw(self, node: int, rng: np.random.Generator) -> float:
        c = self.lo + (self.hi - self.lo) * rng.random()
        return c * self.straggler_factor if node in self.stragglers else c


@dataclass
class TimingResult:
    sync_time: np.ndarray
    sync_gap: np.ndarray
    sync_disagreement: np.ndarray
    sync_draws: np.ndarray
    async_time: np.ndarray
    async_gap: np.ndarray
    async_disagreement: np.ndarray
    async_delays: np.ndarray
    initial_gap: float

    def on_grid(self) -> dict:
        """Both gaps on the asynchronous tick grid (sync value = last finished iteration)."""
        k = np.searchsorted(self.sync_time, self.async_time, side="right")
        sync = np.concatenate([[self.initial_gap], self.sync_gap])[k]
        return {"wall_clock": self.async_time, "sync_gap": sync, "async_gap": self.async_gap}

    def time_to_gap(self, threshold: float) -> tuple:
        def first(times, gaps):
            hit = np.nonzero(gaps <= threshold)[0]
            return float(times[hit[0]]) if hit.size else math.inf
        return first(self.sync_time, self.sync_gap), first(self.async_time, self.async_gap)


def async_timing_run(problem: Problem, W, policy: StepSizePolicy, compute: ComputeTimes,
                     comm_interval: float, budget: float, seed: int,
                     f_star: Optional[float] = None) -> TimingResult:
    """Virtual-clock comparison of barrier-synchronous and asynchronous runs.

    Synchronous: every iteration waits for the slowest node, so iteration ``j``
    ends at ``sum_{k<=j} max_i c_ik``; gradients are fresh and noise-free.

    Asynchronous: nodes communicate every ``comm_interval``.  Tick ``k`` (time
    ``k * comm_interval``) performs iteration ``t = k - 1`` with each node's
    newest finished gradient, computed at ``x_i(s)``, so ``tau_i(t) = t - s``.
    A node whose gradient finishes starts the next one on the newest iterate,
    waiting for the next tick if it already used that iterate.  A node with no
    finished gradient yet takes a pure mixing step (delay recorded as -1).
    """
    W = W.W if isinstance(W, MixingMatrix) else np.asarray(W, dtype=float)
    m, n, R = problem.m, problem.n, problem.R
    if comm_interval <= 0 or budget <= 0:
        raise ValueError("comm_interval and budget must be positive")
    if f_star is None:
        f_star = centralized_reference(problem).f_star
    x0 = np.zeros((m, n))
    initial_gap = problem.value(x0.mean(axis=0)) - f_star

    # synchronous barrier run
    exact = problem.with_sigma(0.0)
    rngs = [stream(seed, "compute", "sync", i) for i in range(m)]
    x, y = x0.copy(), np.zeros((m, n))
    times, gaps, dis, draws = [], [], [], []
    clock, t = 0.0, 0
    while True:
        c = np.array([compute.draw(i, rngs[i]) for i in range(m)])
        if clock + c.max() > budget:
            break
        clock += c.max()
        draws.append(c)
        v = W @ x - policy(t) * exact.gradients(x)
        kernels.project_average(v, R, y, t)
        x = v
        if t >= 1:
            z = y.mean(axis=0)
            times.append(clock)
            gaps.append(exact.value(z) - f_star)
            dis.append(float(np.sum((y - z) ** 2)))
        t += 1

    # asynchronous ticks
    ticks = int(round(budget / comm_interval))
    arng = [stream(seed, "compute", "async", i) for i in range(m)]
    noise = [stream(seed, "noise", "async", i) for i in range(m)]
    sigma = problem.sigma

    def evaluate(i, xi):
        g = problem.objectives[i].gradient(xi)
        if sigma > 0:
            g = g + sigma * noise[i].standard_normal(n)
        return g

    x, y = x0.copy(), np.zeros((m, n))
    pend_g = [evaluate(i, x[i]) for i in range(m)]
    pend_s = [0] * m
    pend_f = [compute.draw(i, arng[i]) for i in range(m)]
    have_g = [None] * m
    have_s = [-1] * m
    waiting = [False] * m
    a_time = np.empty(ticks)
    a_gap = np.empty(ticks)
    a_dis = np.empty(ticks)
    a_tau = np.empty((ticks, m), dtype=np.int64)
    G = np.zeros((m, n))
    for k in range(1, ticks + 1):
        t = k - 1
        now = k * comm_interval
        for i in range(m):
            while not waiting[i] and pend_f[i] <= now:
                have_g[i], have_s[i] = pend_g[i], pend_s[i]
                start = max(pend_f[i], (pend_s[i] + 1) * comm_interval)
                if start < now:
                    pend_g[i], pend_s[i] = evaluate(i, x[i]), t
                    pend_f[i] = start + compute.draw(i, arng[i])
                else:
                    waiting[i] = True
        for i in range(m):
            if have_g[i] is None:
                G[i] = 0.0
                a_tau[t, i] = -1
            else:
                G[i] = have_g[i]
                a_tau[t, i] = t - have_s[i]
        v = W @ x - policy(t) * G
        kernels.project_average(v, R, y, t)
        if not np.isfinite(v).all():
            raise DivergenceError(t)
        x = v
        for i in range(m):
            if waiting[i]:
                waiting[i] = False
                pend_g[i], pend_s[i] = evaluate(i, x[i]), k
                pend_f[i] = now + compute.draw(i, arng[i])
        a_time[t] = now
        if t >= 1:
            z = y.mean(axis=0)
            a_gap[t] = exact.value(z) - f_star
            a_dis[t] = float(np.sum((y - z) ** 2))
        else:
            a_gap[t] = initial_gap
            a_dis[t] = 0.0
    return TimingResult(
        np.array(times), np.array(gaps), np.array(dis),
        np.array(draws).T if draws else np.zeros((m, 0)),
        a_time, a_gap, a_dis, a_tau, float(initial_gap),
    )
