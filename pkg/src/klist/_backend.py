"""Kernel backend selection.

Hot loops are compiled with numba when it is importable. Setting
``KLIST_DISABLE_NUMBA=1`` forces the pure-numpy fallback, which is what the
benchmark compares against.
"""
import os

_disabled = os.environ.get("KLIST_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _disabled:
        raise ImportError
    from numba import njit, prange

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False
    prange = range

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(fn):
            return fn

        return wrap


BACKEND = "numba" if HAVE_NUMBA else "numpy"
