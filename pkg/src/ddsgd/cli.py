"""Command-line experiment runner.

Subcommands::

    ddsgd run CONFIG          trace CSV + summary JSON for one configuration
    ddsgd sweep CONFIG        one run per cell of the [sweep] grid + comparison CSV
    ddsgd timing CONFIG       wall-clock comparison of synchronous and asynchronous updates
    ddsgd validate CONFIG     mixing-matrix report
    ddsgd reference CONFIG    centralized optimum only

The output directory is ``--out``, else ``$DDSGD_OUTPUT_DIR``, else
``[output] dir``.  Exit codes are listed in :data:`EXIT_CODES`.
"""
from __future__ import annotations

import argparse
import concurrent.futures
import itertools
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis import BoundConstants, BoundError, bound_constants, disagreement_bound, fit_loglog_rate, optimal_eta
from .config import SECTIONS, ConfigError, ExperimentConfig, _convert
from .delay import DelayModel, write_delays_csv
from .network import (GenerationError, MixingError, MixingMatrix, NetworkTopology, TopologyError, read_edge_list,
                      validate_mixing)
from .objectives import Problem
from .solver import (ComputeTimes, DivergenceError, StepSizePolicy, async_timing_run, centralized_reference, read_csv,
                     run, write_csv)

ENV_OUTPUT = "DDSGD_OUTPUT_DIR"

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_CONFIG = 2
EXIT_DIVERGED = 3
EXIT_PARTIAL = 4
EXIT_CODES = {
    EXIT_OK: "success",
    EXIT_CHECK_FAILED: "a validation check failed",
    EXIT_CONFIG: "invalid configuration",
    EXIT_DIVERGED: "iterates diverged",
    EXIT_PARTIAL: "some sweep cells failed",
}

GAP_SIGN_TOL = 1e-8


# helpers --------------------------------------------------------------------

def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    d = override or os.environ.get(ENV_OUTPUT) or cfg.output.dir
    path = Path(d)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _atomic(path: Path, write) -> None:
    """Call ``write(tmp_path)`` and move the result onto ``path``."""
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    os.close(fd)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_csv_atomic(columns: dict, path) -> None:
    _atomic(Path(path), lambda p: write_csv(columns, p))


def write_json_atomic(obj, path) -> None:
    def dump(p):
        with open(p, "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True, allow_nan=False)
            fh.write("\n")
    _atomic(Path(path), dump)


def replicate_seed(seed: int, k: int) -> int:
    """Seed of replicate ``k``; replicate 0 uses ``seed`` itself."""
    if k == 0:
        return int(seed)
    return int(np.random.SeedSequence(int(seed), spawn_key=(int(k),)).generate_state(1, np.uint32)[0])


def apply_overrides(cfg: ExperimentConfig, items) -> ExperimentConfig:
    """Apply ``section.key=value`` strings."""
    changes: dict = {}
    for item in items or ():
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(item, "override must look like section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        if section not in SECTIONS:
            raise ConfigError(section, "unknown section")
        known = {f.name: f for f in fields(SECTIONS[section])}
        if key not in known:
            raise ConfigError(f"{section}.{key}", "unknown key")
        changes.setdefault(section, {})[key] = _convert(lhs.strip(), value, known[key])
    return cfg.replace(**changes) if changes else cfg


def _finite(v):
    if v is None:
        return None
    v = float(v)
    return v if math.isfinite(v) else None


# experiment setup -----------------------------------------------------------

@dataclass
class Setup:
    topology: NetworkTopology
    mixing: MixingMatrix
    problem: Problem
    delay: DelayModel
    policy: StepSizePolicy
    eta: float
    eta_auto: bool
    f_star: float
    reference_converged: bool
    constants: Optional[BoundConstants]


def prepare(cfg: ExperimentConfig) -> Setup:
    topology = cfg.build_topology()
    mixing = cfg.build_mixing(topology)
    problem = cfg.build_problem(topology.m)
    delay = cfg.build_delay()
    ref = centralized_reference(problem)
    G = problem.G(stochastic=problem.sigma > 0)
    B = math.sqrt(delay.second_moment())
    bound_ok = 0.0 < mixing.lam < 1.0
    args = dict(lam=mixing.lam, G=G, L=problem.L, m=problem.m, n=problem.n, R=problem.R, B=B, sigma=problem.sigma)
    eta_auto = cfg.solver.eta == "auto"
    if eta_auto:
        if not bound_ok:
            raise ConfigError("solver.eta", f"'auto' needs a spectral gap in (0, 1), got {mixing.lam:.3g}")
        eta = optimal_eta(**args)
    else:
        eta = float(cfg.solver.eta)
    constants = bound_constants(eta=eta, **args) if bound_ok else None
    return Setup(topology, mixing, problem, delay, StepSizePolicy(problem.L, eta), eta, eta_auto,
                 ref.f_star, ref.converged, constants)


def _slope(t, v, T):
    try:
        return fit_loglog_rate(t, v, (T / 10.0, T)).slope
    except BoundError:
        return None


def run_experiment(cfg: ExperimentConfig, out: Path, log=print) -> dict:
    """Run ``seed_count`` replicates, write the trace CSVs and return the summary."""
    s = prepare(cfg)
    T, prefix = cfg.solver.T, cfg.output.prefix
    if s.eta_auto:
        log(f"eta (bound minimizer): {s.eta!r}")
    seeds = [replicate_seed(cfg.solver.seed, k) for k in range(cfg.solver.seed_count)]
    sums = None
    envelope_sure = True
    first = None
    t_all = np.arange(1, T + 2)
    xbound = disagreement_bound(t_all, s.constants.G, s.problem.m, s.constants.lam, s.eta, s.problem.L).exact_form \
        if s.constants is not None else None
    for k, seed in enumerate(seeds):
        tr = run(s.problem, s.mixing, s.delay, s.policy, T, seed, f_star=s.f_star,
                 workers=cfg.solver.workers, keep_delays=cfg.output.delays and k == 0)
        series = np.vstack([tr.obj_gap, tr.disagreement_y, tr.disagreement_x])
        xd = tr.x_disagreement[1:]
        if sums is None:
            sums, xsum, first = series.copy(), xd.copy(), tr
        else:
            sums += series
            xsum += xd
        if xbound is not None and np.any(xd > xbound):
            envelope_sure = False
    mean = sums / len(seeds)
    xmean = xsum / len(seeds)

    cols = first.columns()
    if s.constants is not None:
        cols["bound_disagreement"] = xbound[:T]
        cols["bound_gap"] = s.constants.consensus_gap(first.T)
    write_csv_atomic(cols, out / f"{prefix}_trace.csv")
    if len(seeds) > 1:
        mcols = {"t": first.T, "obj_gap": mean[0], "disagreement_y": mean[1], "disagreement_x": mean[2]}
        if s.constants is not None:
            mcols["bound_disagreement"] = cols["bound_disagreement"]
            mcols["bound_gap"] = cols["bound_gap"]
        write_csv_atomic(mcols, out / f"{prefix}_mean.csv")
    if first.delays is not None:
        _atomic(out / f"{prefix}_delays.csv", lambda p: write_delays_csv(first.delays, p))
    if cfg.output.gnuplot:
        trace_name = f"{prefix}_mean.csv" if len(seeds) > 1 else f"{prefix}_trace.csv"
        _atomic(out / f"{prefix}_plot.gp", lambda p: write_gnuplot(trace_name, f"{prefix}.png", p))

    verdicts = {}
    if s.constants is not None:
        sigma0 = s.problem.sigma == 0
        verdicts["disagreement_envelope"] = {
            "passed": bool(envelope_sure) if sigma0 else bool(np.all(xmean <= xbound)),
            "mode": "every run" if sigma0 else "seed mean",
        }
        verdicts["gap_bound"] = {"passed": bool(np.all(mean[0] <= s.constants.consensus_gap(first.T))),
                                 "mode": "seed mean"}
        verdicts["stale_regime_start"] = s.constants.stale_regime()
    verdicts["gap_sign"] = {"passed": bool(np.all(mean[0] >= -GAP_SIGN_TOL)), "mode": "seed mean"}

    summary = {
        "T": T,
        "m": s.problem.m,
        "n": s.problem.n,
        "seeds": seeds,
        "eta": s.eta,
        "eta_auto": s.eta_auto,
        "lambda": s.mixing.lam,
        "L": s.problem.L,
        "G": s.problem.G(stochastic=s.problem.sigma > 0),
        "f_star": s.f_star,
        "reference_converged": s.reference_converged,
        "initial_gap": _finite(s.problem.value(np.zeros(s.problem.n)) - s.f_star),
        "final_gap": _finite(mean[0, -1]),
        "final_disagreement_y": _finite(mean[1, -1]),
        "final_disagreement_x": _finite(mean[2, -1]),
        "slopes": {
            "obj_gap": _slope(first.T, mean[0], T),
            "disagreement": _slope(first.T, mean[2], T),
            "disagreement_y": _slope(first.T, mean[1], T),
        },
        "verdicts": verdicts,
    }
    if s.constants is not None:
        summary["constants"] = {"C": s.constants.C, "K": s.constants.K, "D_X": s.constants.D_X, "B": s.constants.B}
    write_json_atomic(summary, out / f"{prefix}_summary.json")
    return summary


def write_gnuplot(csv_name: str, png_name: str, path) -> None:
    script = f"""set datafile separator ','
set key autotitle columnhead
set logscale xy
set xlabel 't'
set terminal pngcairo size 900,600
set output '{png_name}'
plot '{csv_name}' using 't':'obj_gap' with lines, \\
     '' using 't':'disagreement_y' with lines, \\
     '' using 't':'disagreement_x' with lines
"""
    with open(path, "w") as fh:
        fh.write(script)


# sweep ----------------------------------------------------------------------

def sweep_cells(cfg: ExperimentConfig) -> list:
    """``(label, config)`` per grid cell; cell ``k`` uses seed ``base + k``.

    A cell whose configuration is invalid carries the :class:`ConfigError`
    in place of the config so the remaining cells still run.
    """
    Bs = cfg.sweep_values("B") or [cfg.delay.B if cfg.delay.kind != "none" else 0]
    sigmas = cfg.sweep_values("sigma") or [cfg.solver.sigma]
    ms = cfg.sweep_values("m") or [None]
    cells = []
    for k, (B, sigma, m) in enumerate(itertools.product(Bs, sigmas, ms)):
        label = f"B{B}_sigma{sigma!r}_m{cfg.node_count() if m is None else m}"
        try:
            c = cfg.with_nodes(m) if m is not None else cfg
            kind = c.delay.kind
            if B == 0:
                kind = "none"
            elif kind == "none":
                kind = "uniform"
            c = c.replace(delay={"kind": kind, "B": B}, solver={"sigma": sigma, "seed": cfg.solver.seed + k})
        except ConfigError as exc:
            c = exc
        cells.append((label, c))
    return cells


def _run_cell(label: str, cfg, out: str) -> dict:
    if isinstance(cfg, ConfigError):
        return {"label": label, "status": "failed", "error": f"config error: {cfg}"}
    path = Path(out) / label
    path.mkdir(parents=True, exist_ok=True)
    try:
        summary = run_experiment(cfg, path, log=lambda msg: None)
    except DivergenceError as exc:
        return {"label": label, "status": "diverged", "error": str(exc), "iteration": exc.t}
    except Exception as exc:  # noqa: BLE001 - isolate cell failures
        return {"label": label, "status": "failed", "error": f"{type(exc).__name__}: {exc}"}
    return {"label": label, "status": "ok", "final_gap": summary["final_gap"],
            "final_disagreement_y": summary["final_disagreement_y"], "seed": cfg.solver.seed}


def sweep(cfg: ExperimentConfig, out: Path, workers: Optional[int] = None, log=print) -> dict:
    cells = sweep_cells(cfg)
    workers = workers or cfg.sweep.workers
    if workers > 1 and len(cells) > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as ex:
            results = list(ex.map(_run_cell, *zip(*[(lb, c, str(out)) for lb, c in cells])))
    else:
        results = [_run_cell(lb, c, str(out)) for lb, c in cells]
    prefix = cfg.output.prefix
    comparison = {"t": np.arange(1, cfg.solver.T + 1)}
    for (label, c), res in zip(cells, results):
        log(f"{label}: {res['status']}" + (f" ({res['error']})" if res["status"] != "ok" else ""))
        if res["status"] != "ok":
            continue
        name = f"{c.output.prefix}_mean.csv" if c.solver.seed_count > 1 else f"{c.output.prefix}_trace.csv"
        data = read_csv(out / label / name)
        for key in ("obj_gap", "disagreement_y", "disagreement_x"):
            comparison[f"{label}_{key}"] = data[key]
    write_csv_atomic(comparison, out / f"{prefix}_comparison.csv")
    summary = {"cells": results}
    write_json_atomic(summary, out / f"{prefix}_sweep.json")
    return summary


# timing ---------------------------------------------------------------------

def timing_compare(cfg: ExperimentConfig, out: Path) -> dict:
    s = prepare(cfg)
    tm = cfg.timing
    compute = ComputeTimes(tm.compute_lo, tm.compute_hi, cfg.stragglers(), tm.straggler_factor)
    res = async_timing_run(s.problem, s.mixing, s.policy, compute, tm.comm_interval, tm.budget,
                           cfg.solver.seed, f_star=s.f_star)
    prefix = cfg.output.prefix
    write_csv_atomic(res.on_grid(), out / f"{prefix}_timing.csv")
    t_sync, t_async = res.time_to_gap(tm.threshold)
    summary = {
        "sync_iterations": int(res.sync_draws.shape[1]),
        "async_iterations": int(res.async_gap.size),
        "sync_time_to_threshold": _finite(t_sync),
        "async_time_to_threshold": _finite(t_async),
        "threshold": tm.threshold,
        "final_sync_gap": _finite(res.sync_gap[-1]) if res.sync_gap.size else None,
        "final_async_gap": _finite(res.async_gap[-1]) if res.async_gap.size else None,
    }
    write_json_atomic(summary, out / f"{prefix}_timing.json")
    return summary


# entry point ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ddsgd", description="Decentralized delayed-gradient optimization experiments.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config", nargs="?", help="INI configuration file (defaults used when omitted)")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override one configuration value (repeatable)")
        p.add_argument("--out", help=f"output directory (overrides ${ENV_OUTPUT} and [output] dir)")

    common(sub.add_parser("run", help="run one experiment"))
    p = sub.add_parser("sweep", help="run the [sweep] grid")
    common(p)
    p.add_argument("--workers", type=int, help="parallel cells")
    common(sub.add_parser("timing", help="synchronous vs asynchronous wall-clock comparison"))
    p = sub.add_parser("validate", help="check the mixing matrix")
    common(p)
    p.add_argument("--edges", help="edge-list file replacing the configured topology")
    common(sub.add_parser("reference", help="compute the centralized optimum"))
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
        cfg = apply_overrides(cfg, args.set)
        if args.command == "validate":
            return _validate(cfg, args.edges)
        if args.command == "reference":
            problem = cfg.build_problem(cfg.build_topology().m)
            ref = centralized_reference(problem)
            print(json.dumps({"f_star": ref.f_star, "iterations": ref.iterations,
                              "grad_map_norm": ref.grad_map_norm, "converged": ref.converged}))
            return EXIT_OK
        out = output_dir(cfg, args.out)
        if args.command == "run":
            summary = run_experiment(cfg, out)
            print(f"final gap {summary['final_gap']!r}, final disagreement {summary['final_disagreement_x']!r}")
            checks = {k: v for k, v in summary["verdicts"].items() if isinstance(v, dict)}
            for name, v in checks.items():
                print(f"{name}: {'pass' if v['passed'] else 'FAIL'} ({v['mode']})")
            return EXIT_OK if all(v["passed"] for v in checks.values()) else EXIT_CHECK_FAILED
        if args.command == "sweep":
            summary = sweep(cfg, out, args.workers)
            return EXIT_OK if all(c["status"] == "ok" for c in summary["cells"]) else EXIT_PARTIAL
        if args.command == "timing":
            summary = timing_compare(cfg, out)
            print(json.dumps(summary))
            return EXIT_OK
    except (ConfigError, TopologyError, MixingError, GenerationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    return EXIT_CHECK_FAILED


def _validate(cfg: ExperimentConfig, edges) -> int:
    topology = read_edge_list(edges) if edges else cfg.build_topology()
    mixing = cfg.build_mixing(topology)
    report = validate_mixing(mixing.W, topology)
    for name, (passed, detail) in report.items():
        print(f"{name}: {'pass' if passed else 'FAIL'} ({detail})")
    print(f"lambda: {mixing.lam!r}")
    return EXIT_OK if all(p for p, _ in report.values()) else EXIT_CHECK_FAILED


if __name__ == "__main__":
    sys.exit(main())
