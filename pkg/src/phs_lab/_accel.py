"""Select numba or the pure-Python fallback for the kernels in ``kernels``.

Set ``PHS_LAB_DISABLE_NUMBA=1`` before import to run every kernel as plain
Python/numpy.  Results agree with the compiled path to rounding.
"""

import logging
import os

_FLAG = os.environ.get("PHS_LAB_DISABLE_NUMBA", "").strip().lower()
DISABLED = _FLAG not in ("", "0", "false", "no")

try:
    if DISABLED:
        raise ImportError
    import numba

    logging.getLogger("numba").setLevel(logging.WARNING)
    HAVE_NUMBA = True
except ImportError:
    numba = None
    HAVE_NUMBA = False


def njit(*args, **kwargs):
    """``numba.njit`` when available and enabled, identity otherwise."""
    if args and callable(args[0]) and len(args) == 1 and not kwargs:
        func = args[0]
        return numba.njit(cache=True)(func) if HAVE_NUMBA else func

    def wrap(func):
        return numba.njit(**{"cache": True, **kwargs})(func) if HAVE_NUMBA else func

    return wrap


def backend_name():
    return "numba" if HAVE_NUMBA else "python"
