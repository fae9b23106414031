"""Optional numba acceleration.

Set MCH_ISTX_NO_NUMBA=1 to force the pure numpy code paths.
"""
import os

USE_NUMBA = os.environ.get("MCH_ISTX_NO_NUMBA", "").strip().lower() not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit as _njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

if USE_NUMBA:
    def njit(*args, **kw):
        kw.setdefault("cache", True)
        return _njit(*args, **kw)
else:
    def njit(*args, **kw):
        if len(args) == 1 and callable(args[0]) and not kw:
            return args[0]
        return lambda f: f


def backend():
    return "numba" if USE_NUMBA else "numpy"
