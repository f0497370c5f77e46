"""Time the compiled kernels against the pure-Python fallback.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--rays 20000]

Prints the best-of-``repeat`` wall time of each kernel for both backends and
the speedup.  Outputs are compared so a backend mismatch is reported.
"""
import argparse
import timeit

import numpy as np

from ddsgd.kernels import _fallback

try:
    from ddsgd.kernels import _core
except ImportError:
    _core = None


def cases(n_rays, t_max, m, n):
    rng = np.random.default_rng(0)
    starts = rng.uniform(-1, 33, (n_rays, 2))
    ends = rng.uniform(-1, 33, (n_rays, 2))
    v = rng.uniform(-2, 2, (m, n))
    y = np.zeros((m, n))
    return {
        "trace_rays": lambda mod: mod.trace_rays(starts, ends, (32, 32)),
        "geometric_sums": lambda mod: mod.geometric_sums(1.0, 0.01, 0.95, t_max),
        "project_average": lambda mod: mod.project_average(v.copy(), 1.0, y.copy(), 10),
    }


def same(a, b):
    if isinstance(a, tuple):
        return all(same(x, z) for x, z in zip(a, b))
    if a is None or b is None:
        return a is b
    return np.allclose(a, b, rtol=1e-12, atol=1e-14)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--rays", type=int, default=20_000)
    ap.add_argument("--t-max", type=int, default=100_000)
    ap.add_argument("--nodes", type=int, default=100)
    ap.add_argument("--dim", type=int, default=64)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; only the fallback is timed")
    print(f"{'kernel':<16} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8}  match")
    for name, call in cases(args.rays, args.t_max, args.nodes, args.dim).items():
        t_py = min(timeit.repeat(lambda: call(_fallback), number=1, repeat=args.repeat))
        if _core is None:
            print(f"{name:<16} {t_py:>11.4f} {'-':>13} {'-':>8}  -")
            continue
        t_c = min(timeit.repeat(lambda: call(_core), number=1, repeat=args.repeat))
        ok = same(call(_fallback), call(_core))
        print(f"{name:<16} {t_py:>11.4f} {t_c:>13.4f} {t_py / t_c:>7.1f}x  {'yes' if ok else 'NO'}")


if __name__ == "__main__":
    main()
