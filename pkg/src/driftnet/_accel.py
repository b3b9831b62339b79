"""Optional numba acceleration.

Set ``DRIFTNET_NUMBA=0`` before import to run every kernel as plain
Python/numpy. The kernels are written in the subset of Python that numba
compiles, so both paths execute the same arithmetic.
"""

import os
from functools import wraps

_flag = os.environ.get("DRIFTNET_NUMBA", "1").strip().lower()
_requested = _flag not in ("0", "false", "no", "off")

try:
    if not _requested:
        raise ImportError
    import numba as _numba

    NUMBA_ENABLED = True
except ImportError:
    _numba = None
    NUMBA_ENABLED = False


def njit(*args, **kwargs):
    """``numba.njit`` when enabled, otherwise an identity decorator."""
    if NUMBA_ENABLED:
        kwargs.setdefault("cache", False)
        return _numba.njit(*args, **kwargs)

    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]

    def decorator(func):
        @wraps(func)
        def wrapper(*a, **kw):
            return func(*a, **kw)

        return wrapper

    return decorator


def is_jitted(func) -> bool:
    """True if ``func`` is a numba dispatcher that can be called from njit code."""
    if not NUMBA_ENABLED or func is None:
        return False
    from numba.core.registry import CPUDispatcher

    return isinstance(func, CPUDispatcher)


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "numpy"
