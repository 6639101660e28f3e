"""Numba detection.

Setting ``BAYAL_DISABLE_NUMBA=1`` (or numba's own ``NUMBA_DISABLE_JIT``) forces
the pure-numpy kernels. When numba is not importable the numpy path is used
silently.
"""
from __future__ import annotations

import os
from typing import Any, Callable

_FLAG_TRUE = {"1", "true", "yes", "on"}


def _disabled_by_env() -> bool:
    for name in ("BAYAL_DISABLE_NUMBA", "NUMBA_DISABLE_JIT"):
        if os.environ.get(name, "").strip().lower() in _FLAG_TRUE:
            return True
    return False


try:
    if _disabled_by_env():
        raise ImportError
    from numba import njit as _numba_njit

    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False
    _numba_njit = None


def njit(*args: Any, **kwargs: Any) -> Callable:
    """``numba.njit`` when available, otherwise an identity decorator."""
    if _numba_njit is not None:
        kwargs.setdefault("cache", True)
        return _numba_njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
