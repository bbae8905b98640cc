"""Backend switch for the numeric hot loops.

``CDC_INCENT_BACKEND=numpy`` forces the pure-numpy kernels; the default is
numba when it imports, numpy otherwise. Both modules expose the same
functions and are importable side by side for cross-checks and benchmarks.
"""
from __future__ import annotations

import os

import numpy as np

from . import _kernels_numpy

try:
    from . import _kernels_numba
except ImportError:  # numba not installed
    _kernels_numba = None

FAIL_DEPTH = _kernels_numpy.FAIL_DEPTH


def _select():
    want = os.environ.get("CDC_INCENT_BACKEND", "numba").strip().lower()
    if want not in ("numba", "numpy"):
        raise ValueError(f"CDC_INCENT_BACKEND must be 'numba' or 'numpy', not {want!r}")
    if want == "numba" and _kernels_numba is not None:
        return "numba", _kernels_numba
    return "numpy", _kernels_numpy


BACKEND, _impl = _select()


def backends() -> dict:
    """Available kernel modules by name."""
    out = {"numpy": _kernels_numpy}
    if _kernels_numba is not None:
        out["numba"] = _kernels_numba
    return out


def score_density(t, x, d, c, coef):
    return _impl.score_density(np.ascontiguousarray(t, dtype=np.float64), x, d, c, coef)


def score_increments(grid, x, d, c, coef, tol, max_depth):
    return _impl.score_increments(np.ascontiguousarray(grid, dtype=np.float64), x, d, c, coef, float(tol), int(max_depth))


def modmatmul(A, B, p):
    return _impl.modmatmul(np.ascontiguousarray(A, dtype=np.int64), np.ascontiguousarray(B, dtype=np.int64), int(p))
