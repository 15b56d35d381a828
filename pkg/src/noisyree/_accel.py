"""Optional numba compilation of the hot kernels.

Set ``NOISYREE_DISABLE_NUMBA=1`` to run every kernel as plain numpy. The
compiled and interpreted paths execute the same source.
"""

from __future__ import annotations

import os

_FLAG = "NOISYREE_DISABLE_NUMBA"

try:
    import numba as _numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    _numba = None


def numba_enabled() -> bool:
    if _numba is None:
        return False
    return os.environ.get(_FLAG, "").strip().lower() not in ("1", "true", "yes", "on")


USE_NUMBA = numba_enabled()


def jit(fn):
    """``numba.njit(cache=True)`` when enabled, identity otherwise.

    The undecorated function stays reachable as ``.py_func`` either way.
    """
    if USE_NUMBA:
        return _numba.njit(cache=True)(fn)
    fn.py_func = fn
    return fn


def jit_inline(fn):
    """:func:`jit` for small helpers that numba should inline into callers."""
    if USE_NUMBA:
        return _numba.njit(cache=True, inline="always")(fn)
    fn.py_func = fn
    return fn
