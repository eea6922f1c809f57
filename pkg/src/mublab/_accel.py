"""Optional numba acceleration.

Set ``MUBLAB_DISABLE_NUMBA=1`` to force the pure-numpy code paths.  The flag
is read once at import time.
"""
import os

_FALSY = ("", "0", "false", "no", "off")

DISABLED_BY_ENV = os.environ.get("MUBLAB_DISABLE_NUMBA", "0").strip().lower() not in _FALSY

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` with caching, or the identity decorator without numba."""
    if not HAVE_NUMBA:
        if args and callable(args[0]):
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
