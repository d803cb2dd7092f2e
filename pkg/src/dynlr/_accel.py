"""Numba acceleration switch.

Hot per-pixel / per-ray kernels in this package exist in two variants: a
numba ``@njit`` build and a vectorized pure-numpy build.  The active variant
is chosen once at import time:

* ``DYNLR_NO_NUMBA=1`` in the environment forces the numpy path,
* otherwise numba is used whenever it is importable.

Both variants are always importable individually (``*_np`` / ``*_nb`` names
in :mod:`dynlr.kernels`), which is what the kernel benchmark and the
equivalence tests rely on.
"""

import os

_FALSY = ("", "0", "false", "no")


def _env_disabled() -> bool:
    return os.environ.get("DYNLR_NO_NUMBA", "").strip().lower() not in _FALSY


try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised only on stripped installs
    numba = None
    NUMBA_AVAILABLE = False

NUMBA_ENABLED = NUMBA_AVAILABLE and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise."""
    if NUMBA_AVAILABLE:
        return numba.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]

    def wrap(func):
        return func

    return wrap


def set_threads(n: int) -> None:
    """Limit numba's thread pool; silently ignored on the numpy path."""
    if NUMBA_AVAILABLE and n > 0:
        numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
