"""Runtime selection between numba-compiled kernels and the numpy fallback.

The hot inner loops in :mod:`hetsolve.kernels` exist twice: once as plain
vectorized numpy/scipy code and once as ``@njit`` loops.  Which one runs is
decided per call from a module-level flag, initialised from the environment:

    HETSOLVE_NUMBA=0   force the numpy fallback (also: "false", "off", "no")

If numba is not importable the fallback is used silently.
"""

from __future__ import annotations

import os


def _env_wants_numba() -> bool:
    val = os.environ.get("HETSOLVE_NUMBA", "").strip().lower()
    return val not in ("0", "false", "off", "no")


try:
    from numba import njit  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        """No-op stand-in so kernel definitions import cleanly."""
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


_use_numba = HAVE_NUMBA and _env_wants_numba()


def numba_enabled() -> bool:
    """True when dispatchers currently route to the compiled kernels."""
    return _use_numba


def use_numba(flag: bool) -> None:
    """Switch the kernel backend at runtime (used by tests and benchmarks)."""
    global _use_numba
    if flag and not HAVE_NUMBA:
        raise RuntimeError("numba is not available in this environment")
    _use_numba = bool(flag)
