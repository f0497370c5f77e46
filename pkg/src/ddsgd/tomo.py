"""Synthetic straight-ray travel-time tomography.

The image lives on a unit-cell grid of shape ``dims``; axis 0 is depth with
the ground surface at depth 0, the remaining axes are horizontal.  Node ``i``
is a sensor on the surface and records the travel times of ``p`` rays from
random interior sources.  Row ``k`` of ``A_i`` holds the length of ray ``k``
inside every cell, so ``A_i x`` is the travel time through slowness ``x``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from ._rng import stream
from .kernels import trace_rays
from .objectives import Problem, make_objective

#: regularization weights used for the three seismic test cases
DEFAULT_MU = (0.1, 0.01, 0.1)


def make_phantom(dims, kind: str = "blobs", count: int = 3, seed: int = 0, R: float = 1.0) -> np.ndarray:
    """Slowness image in ``[0, R]`` flattened row-major.

    ``blobs`` adds ``count`` Gaussian bumps of either sign to a background of
    ``R/2``; ``layered`` stacks horizontal layers, constant along every
    horizontal axis.
    """
    dims = tuple(int(d) for d in dims)
    if not dims or min(dims) < 1:
        raise ValueError("dims must be positive")
    rng = stream(seed, "phantom", kind)
    if kind == "blobs":
        img = np.full(dims, 0.5 * R)
        grids = np.meshgrid(*[np.arange(d) + 0.5 for d in dims], indexing="ij")
        for _ in range(count):
            centre = [rng.uniform(0, d) for d in dims]
            width = rng.uniform(0.1, 0.3) * min(dims) + 0.5
            amp = rng.uniform(-0.45, 0.45) * R
            r2 = sum((g - c) ** 2 for g, c in zip(grids, centre))
            img += amp * np.exp(-r2 / (2.0 * width ** 2))
    elif kind == "layered":
        nl = min(dims[0], 4)
        cuts = np.sort(rng.choice(np.arange(1, dims[0]), size=nl - 1, replace=False)) if nl > 1 else []
        values = rng.uniform(0.2 * R, 0.9 * R, size=nl)
        layer = np.searchsorted(cuts, np.arange(dims[0]), side="right")
        img = np.broadcast_to(values[layer].reshape((dims[0],) + (1,) * (len(dims) - 1)), dims).copy()
    else:
        raise ValueError(f"unknown phantom kind '{kind}'")
    return np.clip(img, 0.0, R).ravel()


def ray_matrix(starts, ends, dims) -> sp.csr_matrix:
    """Sparse matrix of exact segment/cell intersection lengths, one row per ray."""
    indptr, idx, lens = trace_rays(np.atleast_2d(starts), np.atleast_2d(ends), dims)
    n = int(np.prod(dims))
    A = sp.csr_matrix((lens, idx, indptr), shape=(len(indptr) - 1, n))
    A.sum_duplicates()
    return A


def sensor_positions(dims, m: int) -> np.ndarray:
    """``m`` points spread evenly over the surface (depth 0)."""
    dims = tuple(dims)
    if len(dims) == 2:
        return np.column_stack([np.zeros(m), (np.arange(m) + 0.5) * dims[1] / m])
    cols = math.ceil(math.sqrt(m))
    rows = math.ceil(m / cols)
    k = np.arange(m)
    return np.column_stack([np.zeros(m), (k // cols + 0.5) * dims[1] / rows, (k % cols + 0.5) * dims[2] / cols])


def discrete_gradient_operator(dims) -> sp.csr_matrix:
    """Forward differences along each axis, stacked; boundary rows are omitted."""
    dims = tuple(int(d) for d in dims)
    blocks = []
    for ax, d in enumerate(dims):
        diff = sp.diags([-np.ones(d - 1), np.ones(d - 1)], [0, 1], shape=(d - 1, d))
        op = sp.identity(1, format="csr")
        for k, dk in enumerate(dims):
            op = sp.kron(op, diff if k == ax else sp.identity(dk), format="csr")
        blocks.append(op)
    return sp.vstack(blocks, format="csr")


@dataclass
class TomoProblem:
    dims: tuple
    x_true: np.ndarray
    A: list
    b: list
    noise_std: float
    R: float
    sensors: np.ndarray
    sources: list

    @property
    def n(self) -> int:
        return int(np.prod(self.dims))

    @property
    def m(self) -> int:
        return len(self.A)

    def to_problem(self, variant: str = "tikhonov-identity", mu: float = 0.1, sigma: float = 0.0) -> Problem:
        D = discrete_gradient_operator(self.dims) if variant == "tikhonov-gradient" else None
        objs = [make_objective(variant, A, b, mu=mu, D=D, sigma=sigma) for A, b in zip(self.A, self.b)]
        return Problem(objs, R=self.R, x_hat=self.x_true, name="tomo")


def generate_tomo_problem(dims, m: int, p: int, noise_std: float = 0.0, seed: int = 0, R: float = 1.0,
                          phantom: str = "blobs") -> TomoProblem:
    """Rays from uniform interior sources to each node's surface sensor."""
    dims = tuple(int(d) for d in dims)
    if m < 1 or p < 1:
        raise ValueError("need m >= 1 and p >= 1")
    x_true = make_phantom(dims, phantom, seed=seed, R=R)
    sensors = sensor_positions(dims, m)
    upper = np.asarray(dims, dtype=float)
    A_list, b_list, src_list = [], [], []
    for i in range(m):
        rng = stream(seed, "tomo", "rays", i)
        src = rng.uniform(0.0, 1.0, size=(p, len(dims))) * upper
        for k in range(p):
            while np.linalg.norm(src[k] - sensors[i]) == 0.0:
                src[k] = rng.uniform(0.0, 1.0, size=len(dims)) * upper
        A = ray_matrix(src, np.broadcast_to(sensors[i], src.shape), dims)
        b = A @ x_true
        if noise_std > 0:
            b = b + noise_std * stream(seed, "tomo", "noise", i).standard_normal(p)
        A_list.append(A)
        b_list.append(b)
        src_list.append(src)
    return TomoProblem(dims, x_true, A_list, b_list, float(noise_std), float(R), sensors, src_list)
