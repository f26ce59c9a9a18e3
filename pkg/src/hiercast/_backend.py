"""Kernel backend selection: numba-jitted hot paths with a pure-Python fallback.

Set ``HIERCAST_DISABLE_NUMBA=1`` to force the fallback (same code objects,
not compiled).  The fallback is numerically identical but much slower; it
exists for environments without a working numba and for benchmarking.
"""

import os

_DISABLE_ENV = "HIERCAST_DISABLE_NUMBA"


def numba_requested() -> bool:
    return os.environ.get(_DISABLE_ENV, "").strip() not in ("1", "true", "yes")


try:
    import numba

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    _HAVE_NUMBA = False

NUMBA_ENABLED = _HAVE_NUMBA and numba_requested()


def jit_kernel(func):
    """Wrap a scalar kernel with ``numba.njit`` when the backend is enabled.

    The undecorated function stays importable as ``func.py_func`` either way,
    so benchmarks can time both paths in one process.
    """
    if NUMBA_ENABLED:
        wrapped = numba.njit(cache=True)(func)
        return wrapped

    func.py_func = func
    return func


def backend_name() -> str:
    return "numba" if NUMBA_ENABLED else "python"
