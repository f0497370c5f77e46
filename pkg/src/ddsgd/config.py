"""Experiment configuration: an INI file with one section per component.

Every key is optional and falls back to the defaults below (the synthetic
least-squares setting on a 5x5 lattice).  Example::

    [problem]
    kind = synthetic-ls      ; synthetic-ls | huber | logistic | tomo
    n = 10
    p = 5

    [topology]
    kind = lattice2d         ; lattice2d | ring | kregular | complete
    rows = 5
    cols = 5

    [mixing]
    kind = metropolis        ; metropolis | uniform-complete
    lazy = true

    [delay]
    kind = uniform           ; none | fixed | uniform | truncated-geometric
    B = 5

    [solver]
    sigma = 0.01
    eta = 0.01               ; or "auto"
    T = 10000
    seed = 0
    seed_count = 1

    [sweep]
    B = 0, 5
    sigma = 0, 0.01
    m = 25, 100
"""
from __future__ import annotations

import configparser
import dataclasses
import io
import math
from dataclasses import dataclass, field, fields

import numpy as np

from .delay import DelayModel
from .network import MixingMatrix, NetworkTopology, build_topology, make_mixing
from .objectives import Problem, synthetic_problem
from .tomo import generate_tomo_problem


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending ``section.key``."""

    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass
class ProblemSpec:
    kind: str = "synthetic-ls"
    n: int = 10
    p: int = 5
    data_seed: int = 0
    data_noise: float = 0.001
    delta: float = 0.05
    R: float = 1.0
    dims: str = "8x8"
    phantom: str = "blobs"
    objective: str = "least-squares"
    mu: float = 0.0
    tomo_noise: float = 0.0


@dataclass
class TopologySpec:
    kind: str = "lattice2d"
    rows: int = 5
    cols: int = 5
    m: int = 25
    k: int = 3
    seed: int = 0


@dataclass
class MixingSpec:
    kind: str = "metropolis"
    lazy: bool = True


@dataclass
class DelaySpec:
    kind: str = "uniform"
    B: int = 5
    p: float = 0.5


@dataclass
class SolverSpec:
    sigma: float = 0.01
    eta: str = "0.01"
    T: int = 10000
    seed: int = 0
    seed_count: int = 1
    workers: int = 1


@dataclass
class OutputSpec:
    dir: str = "out"
    prefix: str = "run"
    delays: bool = False
    gnuplot: bool = False


@dataclass
class TimingSpec:
    compute_lo: float = 0.001
    compute_hi: float = 0.5
    stragglers: str = ""
    straggler_factor: float = 10.0
    comm_interval: float = 0.01
    budget: float = 10.0
    threshold: float = 1e-2


@dataclass
class SweepSpec:
    B: str = ""
    sigma: str = ""
    m: str = ""
    workers: int = 1


SECTIONS = {
    "problem": ProblemSpec,
    "topology": TopologySpec,
    "mixing": MixingSpec,
    "delay": DelaySpec,
    "solver": SolverSpec,
    "output": OutputSpec,
    "timing": TimingSpec,
    "sweep": SweepSpec,
}


@dataclass
class ExperimentConfig:
    problem: ProblemSpec = field(default_factory=ProblemSpec)
    topology: TopologySpec = field(default_factory=TopologySpec)
    mixing: MixingSpec = field(default_factory=MixingSpec)
    delay: DelaySpec = field(default_factory=DelaySpec)
    solver: SolverSpec = field(default_factory=SolverSpec)
    output: OutputSpec = field(default_factory=OutputSpec)
    timing: TimingSpec = field(default_factory=TimingSpec)
    sweep: SweepSpec = field(default_factory=SweepSpec)

    def replace(self, **sections) -> "ExperimentConfig":
        """Copy with some fields changed: ``replace(delay={"B": 0})``."""
        parts = {}
        for name in SECTIONS:
            spec = getattr(self, name)
            parts[name] = dataclasses.replace(spec, **sections.get(name, {}))
        cfg = ExperimentConfig(**parts)
        cfg.validate()
        return cfg

    # parsing -----------------------------------------------------------
    @classmethod
    def from_string(cls, text: str) -> "ExperimentConfig":
        cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
        cp.optionxform = str
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError("file", str(exc).splitlines()[0]) from None
        parts = {}
        for section in cp.sections():
            if section not in SECTIONS:
                raise ConfigError(section, "unknown section")
        for name, spec_cls in SECTIONS.items():
            values = {}
            known = {f.name: f for f in fields(spec_cls)}
            if cp.has_section(name):
                for key, raw in cp.items(name):
                    if key not in known:
                        raise ConfigError(f"{name}.{key}", "unknown key")
                    values[key] = _convert(f"{name}.{key}", raw, known[key])
            parts[name] = spec_cls(**values)
        cfg = cls(**parts)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            with open(path) as fh:
                return cls.from_string(fh.read())
        except OSError as exc:
            raise ConfigError("file", f"cannot read {path}: {exc.strerror}") from None

    def to_string(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        for name in SECTIONS:
            spec = getattr(self, name)
            cp[name] = {f.name: _format(getattr(spec, f.name)) for f in fields(spec)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def save(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_string())

    # validation --------------------------------------------------------
    def validate(self) -> None:
        p, tp, s, d = self.problem, self.topology, self.solver, self.delay
        if p.kind not in ("synthetic-ls", "huber", "logistic", "tomo"):
            raise ConfigError("problem.kind", f"unknown problem kind '{p.kind}'")
        if p.n < 1 or p.p < 1:
            raise ConfigError("problem.n" if p.n < 1 else "problem.p", "must be positive")
        if p.R <= 0:
            raise ConfigError("problem.R", "must be positive")
        if p.delta <= 0:
            raise ConfigError("problem.delta", "must be positive")
        if p.mu < 0:
            raise ConfigError("problem.mu", "must be nonnegative")
        if p.kind == "tomo":
            self.dims()
            if p.objective not in ("least-squares", "tikhonov-identity", "tikhonov-gradient"):
                raise ConfigError("problem.objective", f"unknown tomography objective '{p.objective}'")
        if tp.kind not in ("lattice2d", "ring", "kregular", "complete"):
            raise ConfigError("topology.kind", f"unknown topology kind '{tp.kind}'")
        if self.mixing.kind not in ("metropolis", "uniform-complete"):
            raise ConfigError("mixing.kind", f"unknown mixing kind '{self.mixing.kind}'")
        if d.kind not in ("none", "fixed", "uniform", "truncated-geometric"):
            raise ConfigError("delay.kind", f"unknown delay kind '{d.kind}'")
        if d.B < 0 or (d.kind == "uniform" and d.B < 1):
            raise ConfigError("delay.B", "must be >= 1 for uniform delays and >= 0 otherwise")
        if s.sigma < 0:
            raise ConfigError("solver.sigma", "must be nonnegative")
        if s.eta != "auto":
            try:
                eta = float(s.eta)
            except ValueError:
                raise ConfigError("solver.eta", f"expected a number or 'auto', got '{s.eta}'") from None
            if not eta > 0:
                raise ConfigError("solver.eta", "must be positive")
        if s.T < 1:
            raise ConfigError("solver.T", "must be at least 1")
        if s.seed_count < 1:
            raise ConfigError("solver.seed_count", "must be at least 1")
        if s.seed < 0:
            raise ConfigError("solver.seed", "must be nonnegative")
        for key in ("B", "sigma", "m"):
            try:
                self.sweep_values(key)
            except ValueError:
                raise ConfigError(f"sweep.{key}", f"expected a comma-separated list, got '{getattr(self.sweep, key)}'") from None
        if self.timing.comm_interval <= 0 or self.timing.budget <= 0:
            raise ConfigError("timing.comm_interval", "interval and budget must be positive")
        try:
            self.stragglers()
        except ValueError:
            raise ConfigError("timing.stragglers", "expected a comma-separated list of node indices") from None

    # derived values ----------------------------------------------------
    def dims(self) -> tuple:
        try:
            dims = tuple(int(v) for v in self.problem.dims.lower().split("x"))
        except ValueError:
            raise ConfigError("problem.dims", f"expected e.g. 8x8, got '{self.problem.dims}'") from None
        if len(dims) not in (2, 3) or min(dims) < 1:
            raise ConfigError("problem.dims", "need 2 or 3 positive sizes")
        return dims

    def stragglers(self) -> tuple:
        txt = self.timing.stragglers.strip()
        return tuple(int(v) for v in txt.split(",")) if txt else ()

    def sweep_values(self, key: str) -> list:
        txt = getattr(self.sweep, key).strip()
        if not txt:
            return []
        conv = float if key == "sigma" else int
        return [conv(v) for v in txt.split(",")]

    def build_topology(self) -> NetworkTopology:
        t = self.topology
        try:
            return build_topology(t.kind, seed=t.seed, rows=t.rows, cols=t.cols, m=t.m, k=t.k)
        except ValueError as exc:
            raise ConfigError(f"topology.{t.kind}", str(exc)) from None

    def build_mixing(self, topology: NetworkTopology) -> MixingMatrix:
        try:
            return make_mixing(topology, self.mixing.kind, self.mixing.lazy)
        except ValueError as exc:
            raise ConfigError("mixing", str(exc)) from None

    def build_delay(self) -> DelayModel:
        d = self.delay
        return DelayModel(d.kind, d.B if d.kind != "none" else 0, d.p)

    def build_problem(self, m: int) -> Problem:
        p = self.problem
        sigma = self.solver.sigma
        if p.kind == "tomo":
            tp = self.build_tomo(m)
            return tp.to_problem(p.objective, mu=p.mu, sigma=sigma)
        return synthetic_problem(p.kind, m, n=p.n, p=p.p, seed=p.data_seed, R=p.R, sigma=sigma,
                                 delta=p.delta, data_noise=p.data_noise)

    def build_tomo(self, m: int):
        p = self.problem
        return generate_tomo_problem(self.dims(), m, p.p, noise_std=p.tomo_noise, seed=p.data_seed, R=p.R,
                                     phantom=p.phantom)

    def node_count(self) -> int:
        t = self.topology
        return t.rows * t.cols if t.kind == "lattice2d" else t.m

    def with_nodes(self, m: int) -> "ExperimentConfig":
        """Same experiment on ``m`` nodes (a square lattice for ``lattice2d``)."""
        if self.topology.kind == "lattice2d":
            side = math.isqrt(m)
            if side * side != m:
                raise ConfigError("sweep.m", f"lattice sizes must be perfect squares, got {m}")
            return self.replace(topology={"rows": side, "cols": side, "m": m})
        return self.replace(topology={"m": m})


def _convert(name: str, raw: str, f):
    typ = f.type if isinstance(f.type, type) else {"int": int, "float": float, "bool": bool, "str": str}[f.type]
    raw = raw.strip()
    try:
        if typ is bool:
            low = raw.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if typ is int:
            return int(raw)
        if typ is float:
            v = float(raw)
            if not np.isfinite(v):
                raise ValueError
            return v
    except ValueError:
        raise ConfigError(name, f"expected {typ.__name__}, got '{raw}'") from None
    return raw


def _format(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)
