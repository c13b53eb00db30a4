"""Backend switch for the compiled kernels.

Set ``SHIFTMIX_NO_NUMBA=1`` to force the pure-numpy code paths (useful for
debugging, or on platforms without a working numba).
"""
import os

_DISABLED = os.environ.get("SHIFTMIX_NO_NUMBA", "").strip().lower() in {"1", "true", "yes"}

try:
    if _DISABLED:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
