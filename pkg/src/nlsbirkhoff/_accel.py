"""Optional numba acceleration.

Hot kernels are written once in a numba-compatible subset of Python and
compiled with ``njit`` when numba is importable.  Setting the environment
variable ``NLSBIRKHOFF_NO_NUMBA=1`` before import selects the pure numpy
fallbacks instead, which is also what happens when numba is missing.
"""

from __future__ import annotations

import os

ENV_FLAG = "NLSBIRKHOFF_NO_NUMBA"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None

NUMBA_OPTS = {"cache": True, "nogil": True}


def numba_requested() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


USE_NUMBA = _numba is not None and numba_requested()


def njit(func):
    """Compile ``func`` with numba when acceleration is enabled."""
    if _numba is None:
        return func
    return _numba.njit(func, **NUMBA_OPTS)


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
