"""Numba toggle.

Set ``SELFPLAY_DISABLE_NUMBA=1`` to run every kernel through its pure-numpy
implementation. The flag is read once at import time.
"""

import os

try:
    import numba as nb
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None

DISABLED = os.environ.get("SELFPLAY_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}
HAS_NUMBA = nb is not None
USE_NUMBA = HAS_NUMBA and not DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with cache=True, or an identity decorator without numba."""
    kwargs.setdefault("cache", True)
    if nb is None:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda fn: fn
    return nb.njit(*args, **kwargs)
