"""Numba acceleration switch.

Hot kernels in :mod:`cadkit.kernels` exist in two flavours: an ``@njit``
loop version and a vectorized pure-numpy version. The numba flavour is
used when numba imports cleanly and the environment variable
``CADKIT_NO_NUMBA`` is unset/empty/"0"; otherwise the numpy fallback is
selected. The choice is made once at import time.
"""

import os

_FLAG = os.environ.get("CADKIT_NO_NUMBA", "").strip()
_DISABLED_BY_ENV = _FLAG not in ("", "0")

try:
    from numba import njit  # noqa: F401

    _NUMBA_IMPORTABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _NUMBA_IMPORTABLE = False

    def njit(*args, **kwargs):
        # Pass-through decorator so one-source kernels still run interpreted.
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def wrap(func):
            return func

        return wrap


NUMBA_ENABLED = _NUMBA_IMPORTABLE and not _DISABLED_BY_ENV


def accel_mode() -> str:
    """Return "numba" or "numpy" depending on the active kernel path."""
    return "numba" if NUMBA_ENABLED else "numpy"


def maybe_njit(func=None, **kwargs):
    """JIT-compile ``func`` when the numba path is active, else return it as-is.

    Used for one-source kernels whose body is valid both compiled and
    interpreted (plain loops plus elementwise array ops).
    """
    if func is None:
        def wrap(f):
            return maybe_njit(f, **kwargs)

        return wrap
    if NUMBA_ENABLED:
        return njit(cache=True, **kwargs)(func)
    return func
