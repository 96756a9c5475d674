"""Numba switch.

Set ``CPGEDF_DISABLE_NUMBA=1`` to run every kernel as plain Python over
numpy arrays. The flag is read once, at import time.
"""

import os

_FLAG = os.environ.get("CPGEDF_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    from numba import njit as _numba_njit

    NUMBA_ENABLED = True
except ImportError:
    _numba_njit = None
    NUMBA_ENABLED = False


def njit(func=None, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise.

    The returned object always exposes ``py_func`` so callers can reach the
    uncompiled version regardless of the backend.
    """

    def wrap(f):
        if NUMBA_ENABLED:
            return _numba_njit(**kwargs)(f)
        f.py_func = f
        return f

    if func is not None:
        return wrap(func)
    return wrap
