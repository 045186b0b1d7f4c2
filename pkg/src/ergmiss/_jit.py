"""Optional numba acceleration.

Set ``ERGMISS_NUMBA=0`` before import to run every kernel as plain Python.
Both paths consume the same pre-drawn random streams, so a chain produces
the same draws either way.
"""
import os

_flag = os.environ.get("ERGMISS_NUMBA", "1").strip().lower()
USE_NUMBA = _flag not in ("0", "false", "no", "off")

if USE_NUMBA:
    try:
        import numba
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

JIT_OPTIONS = {"nogil": True, "cache": True}


def jit(func):
    if USE_NUMBA:
        return numba.njit(**JIT_OPTIONS)(func)
    return func
