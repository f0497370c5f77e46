"""Plain-text matrix container used for objective and tomography fixtures.

Layout::

    ddsgd-container 1
    meta <key> <value>              # any number of header entries
    dense <name> <rows> <cols>      # followed by <rows> lines of <cols> numbers
    sparse <name> <rows> <cols> <nnz>   # followed by <nnz> lines "i j value"
    end

Numbers are written with ``repr`` so a round trip is exact.  Vectors are
stored as a single row, ``dense <name> 1 <len>``.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .objectives import LocalObjective, Problem, make_objective
from .tomo import TomoProblem

MAGIC = "ddsgd-container 1"


class ContainerError(ValueError):
    pass


def _fmt(v) -> str:
    return repr(float(v))


def write_container(path, meta: dict, arrays: dict) -> None:
    lines = [MAGIC]
    for k, v in meta.items():
        if any(c.isspace() for c in str(k)):
            raise ContainerError(f"meta key '{k}' contains whitespace")
        lines.append(f"meta {k} {v}")
    for name, arr in arrays.items():
        if sp.issparse(arr):
            coo = arr.tocoo()
            lines.append(f"sparse {name} {coo.shape[0]} {coo.shape[1]} {coo.nnz}")
            lines.extend(f"{i} {j} {_fmt(v)}" for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()))
        else:
            a = np.asarray(arr, dtype=float)
            a2 = a.reshape(1, -1) if a.ndim == 1 else a
            lines.append(f"dense {name} {a2.shape[0]} {a2.shape[1]}")
            lines.extend(" ".join(_fmt(v) for v in row) for row in a2.tolist())
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def read_container(path):
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != MAGIC:
        raise ContainerError("not a ddsgd container")
    meta, arrays = {}, {}
    k = 1
    while k < len(lines):
        parts = lines[k].split()
        k += 1
        if not parts:
            continue
        tag = parts[0]
        if tag == "end":
            return meta, arrays
        if tag == "meta":
            meta[parts[1]] = " ".join(parts[2:])
        elif tag == "dense":
            name, r, c = parts[1], int(parts[2]), int(parts[3])
            rows = [list(map(float, lines[k + q].split())) for q in range(r)]
            k += r
            a = np.array(rows, dtype=float).reshape(r, c)
            arrays[name] = a
        elif tag == "sparse":
            name, r, c, nnz = parts[1], int(parts[2]), int(parts[3]), int(parts[4])
            trip = [lines[k + q].split() for q in range(nnz)]
            k += nnz
            i = np.array([int(t[0]) for t in trip], dtype=np.int64)
            j = np.array([int(t[1]) for t in trip], dtype=np.int64)
            v = np.array([float(t[2]) for t in trip])
            arrays[name] = sp.csr_matrix((v, (i, j)), shape=(r, c))
        else:
            raise ContainerError(f"unknown record '{tag}' on line {k}")
    raise ContainerError("missing 'end' record")


def _vec(a) -> np.ndarray:
    return np.asarray(a).ravel()


def save_objective(obj: LocalObjective, path) -> None:
    b = 2.0 * obj.b - 1.0 if obj.variant == "logistic" else obj.b
    meta = {"kind": "objective", "variant": obj.variant, "rows": obj.p, "cols": obj.n,
            "delta": repr(obj.delta), "mu": repr(obj.mu), "sigma": repr(obj.sigma)}
    arrays = {"A": obj.A, "b": b}
    if obj.D is not None:
        arrays["D"] = obj.D
    write_container(path, meta, arrays)


def load_objective(path) -> LocalObjective:
    meta, arrays = read_container(path)
    return make_objective(meta["variant"], arrays["A"], _vec(arrays["b"]), delta=float(meta["delta"]),
                          mu=float(meta["mu"]), D=arrays.get("D"), sigma=float(meta["sigma"]))


def save_problem(problem: Problem, path) -> None:
    o0 = problem.objectives[0]
    meta = {"kind": "problem", "variant": problem.variant, "m": problem.m, "n": problem.n,
            "R": repr(problem.R), "delta": repr(o0.delta), "mu": repr(o0.mu), "sigma": repr(problem.sigma)}
    arrays = {}
    for i, o in enumerate(problem.objectives):
        arrays[f"A_{i}"] = o.A
        arrays[f"b_{i}"] = 2.0 * o.b - 1.0 if o.variant == "logistic" else o.b
    if o0.D is not None:
        arrays["D"] = o0.D
    if problem.x_hat is not None:
        arrays["x_hat"] = problem.x_hat
    write_container(path, meta, arrays)


def load_problem(path) -> Problem:
    meta, arrays = read_container(path)
    if meta.get("kind") != "problem":
        raise ContainerError("container does not hold a problem")
    D = arrays.get("D")
    objs = [make_objective(meta["variant"], arrays[f"A_{i}"], _vec(arrays[f"b_{i}"]), delta=float(meta["delta"]),
                           mu=float(meta["mu"]), D=D, sigma=float(meta["sigma"]))
            for i in range(int(meta["m"]))]
    x_hat = _vec(arrays["x_hat"]) if "x_hat" in arrays else None
    return Problem(objs, R=float(meta["R"]), x_hat=x_hat)


def save_tomo(tp: TomoProblem, path) -> None:
    meta = {"kind": "tomo", "dims": "x".join(map(str, tp.dims)), "m": tp.m, "n": tp.n,
            "noise_std": repr(tp.noise_std), "R": repr(tp.R)}
    arrays = {"x_true": tp.x_true, "sensors": tp.sensors}
    for i in range(tp.m):
        arrays[f"A_{i}"] = tp.A[i]
        arrays[f"b_{i}"] = tp.b[i]
        arrays[f"sources_{i}"] = tp.sources[i]
    write_container(path, meta, arrays)


def load_tomo(path) -> TomoProblem:
    meta, arrays = read_container(path)
    if meta.get("kind") != "tomo":
        raise ContainerError("container does not hold a tomography problem")
    dims = tuple(int(d) for d in meta["dims"].split("x"))
    m = int(meta["m"])
    return TomoProblem(dims, _vec(arrays["x_true"]), [arrays[f"A_{i}"].tocsr() for i in range(m)],
                       [_vec(arrays[f"b_{i}"]) for i in range(m)], float(meta["noise_std"]), float(meta["R"]),
                       arrays["sensors"], [arrays[f"sources_{i}"] for i in range(m)])


def write_image_csv(x, dims, path) -> None:
    """Flat image, one value per line, after a ``# dims`` header."""
    x = np.asarray(x, dtype=float).ravel()
    if x.size != int(np.prod(dims)):
        raise ContainerError("image size does not match dims")
    with open(path, "w") as fh:
        fh.write("# dims " + " ".join(str(int(d)) for d in dims) + "\n")
        fh.write("index,value\n")
        for k, v in enumerate(x.tolist()):
            fh.write(f"{k},{v!r}\n")


def read_image_csv(path):
    with open(path) as fh:
        head = fh.readline().split()
        if head[:2] != ["#", "dims"]:
            raise ContainerError("missing dims header")
        dims = tuple(int(d) for d in head[2:])
        fh.readline()
        vals = [float(line.split(",")[1]) for line in fh if line.strip()]
    return np.array(vals).reshape(dims), dims


__all__ = ["write_container", "read_container", "save_objective", "load_objective", "save_problem",
           "load_problem", "save_tomo", "load_tomo", "write_image_csv", "read_image_csv"]
