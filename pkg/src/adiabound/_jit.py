"""Optional numba acceleration.

Set ``ADIABOUND_DISABLE_NUMBA=1`` to run every kernel as plain numpy code.
The decorated functions are written so that both paths execute the same source.
"""

import os

_FLAG = os.environ.get("ADIABOUND_DISABLE_NUMBA", "").strip().lower()
_DISABLED = _FLAG in {"1", "true", "yes", "on"}

try:
    if _DISABLED:
        raise ImportError("numba disabled by ADIABOUND_DISABLE_NUMBA")
    import numba as _numba
except ImportError:
    _numba = None

NUMBA_ENABLED = _numba is not None


def njit(*args, **kwargs):
    """``numba.njit`` with on-disk caching, or a no-op decorator."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", True)
        return _numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda func: func
