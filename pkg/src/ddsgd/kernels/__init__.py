"""Hot numerical kernels with a compiled core and a pure-Python fallback.

The compiled extension ``_core`` is used when it imports; otherwise, or when
the environment variable ``DDSGD_PURE_PYTHON`` is set to a non-empty value
other than ``0``, the numpy implementation in ``_fallback`` is used.  Both
expose the same functions:

trace_rays(starts, ends, dims)
    Exact per-cell intersection lengths of straight segments with a unit grid,
    returned as a CSR triplet ``(indptr, indices, lengths)``.
geometric_sums(c1, c2, lam, t_max)
    ``S[t] = sum_{s<t} alpha(s) lam^(t-s-1)`` with ``alpha(s) = 1/(c1 + c2 sqrt s)``.
project_average(v, R, y, t)
    In-place box clamp of ``v`` fused with the running-average update of ``y``.
"""
from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("DDSGD_PURE_PYTHON", "") in ("", "0"):
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _fallback
else:
    _impl = _fallback

trace_rays = _impl.trace_rays
geometric_sums = _impl.geometric_sums
project_average = _impl.project_average

__all__ = ["BACKEND", "trace_rays", "geometric_sums", "project_average"]
