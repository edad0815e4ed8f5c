"""Numba switch.

Set ``TSCONSENSUS_DISABLE_NUMBA=1`` to force the pure-numpy kernels. The flag
is read once at import time.
"""

import os

_FLAG = os.environ.get("TSCONSENSUS_DISABLE_NUMBA", "").strip().lower()

try:  # pragma: no cover - depends on environment
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover
    numba = None
    NUMBA_AVAILABLE = False

USE_NUMBA = NUMBA_AVAILABLE and _FLAG not in ("1", "true", "yes", "on")


def njit(fn):
    """Compile ``fn`` with numba when it is available, else return it as is."""
    if NUMBA_AVAILABLE:
        return numba.njit(cache=True)(fn)
    return fn
