"""Optional numba acceleration.

Kernels in :mod:`foodchain.kernels` are written in the numba-compatible
subset of Python.  When numba is importable and ``FOODCHAIN_DISABLE_JIT`` is
unset (or ``0``), they are compiled with ``@njit``; otherwise the same
functions run as plain Python on numpy arrays.
"""

from __future__ import annotations

import os
from warnings import warn

_FLAG = os.environ.get("FOODCHAIN_DISABLE_JIT", "").strip().lower()
JIT_DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    _numba = None
    if not JIT_DISABLED:
        warn("numba not found; falling back to pure-numpy kernels (slow).")

USE_NUMBA = _numba is not None and not JIT_DISABLED


def njit(func):
    """Compile ``func`` with numba when enabled, else return it unchanged."""
    if USE_NUMBA:
        return _numba.njit(cache=True, nogil=True)(func)
    return func


def backend() -> str:
    return "numba" if USE_NUMBA else "python"
