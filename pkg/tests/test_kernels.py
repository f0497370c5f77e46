import os
import subprocess
import sys

import numpy as np
import pytest

from ddsgd import kernels
from ddsgd.kernels import _fallback

core = pytest.importorskip("ddsgd.kernels._core", reason="compiled extension not built")


def random_rays(rng, dims, count):
    lo = -0.5 * np.ones(len(dims))
    hi = np.asarray(dims, float) + 0.5
    s = rng.uniform(lo, hi, (count, len(dims)))
    e = rng.uniform(lo, hi, (count, len(dims)))
    # a few axis-aligned and grid-aligned rays
    e[:10, 0] = s[:10, 0]
    s[10:20] = np.round(s[10:20])
    e[10:20] = np.round(e[10:20])
    return s, e


@pytest.mark.parametrize("dims", [(7,), (6, 9), (4, 5, 3)])
def test_trace_rays_backends_identical(dims):
    s, e = random_rays(np.random.default_rng(len(dims)), dims, 2000)
    a = core.trace_rays(s, e, dims)
    b = _fallback.trace_rays(s, e, dims)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x, y)


@pytest.mark.parametrize("c1,c2,lam", [(1.0, 1.0, 0.5), (0.0, 0.02, 0.95), (10.0, 0.01, 0.1)])
def test_geometric_sums_backends_identical(c1, c2, lam):
    np.testing.assert_array_equal(core.geometric_sums(c1, c2, lam, 5000), _fallback.geometric_sums(c1, c2, lam, 5000))


@pytest.mark.parametrize("t", [0, 1, 17])
def test_project_average_backends_identical(t):
    rng = np.random.default_rng(t)
    v = rng.normal(scale=2, size=(6, 4))
    y = rng.normal(size=(6, 4))
    v1, y1, v2, y2 = v.copy(), y.copy(), v.copy(), y.copy()
    core.project_average(v1, 1.0, y1, t)
    _fallback.project_average(v2, 1.0, y2, t)
    np.testing.assert_array_equal(v1, v2)
    np.testing.assert_array_equal(y1, y2)
    np.testing.assert_array_equal(v1, np.clip(v, -1, 1))
    if t == 0:
        np.testing.assert_array_equal(y1, y)


def test_backend_selected_by_environment():
    code = "from ddsgd import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, DDSGD_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env["DDSGD_PURE_PYTHON"] = "0"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "compiled"


def test_default_backend_is_compiled():
    if os.environ.get("DDSGD_PURE_PYTHON", "") in ("", "0"):
        assert kernels.BACKEND == "compiled"
