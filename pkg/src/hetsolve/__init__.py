"""Iterative solver and experiment suite for divergence-form elliptic
equations with random stationary coefficients."""

from ._backend import HAVE_NUMBA, numba_enabled, use_numba

__version__ = "0.1.0"

__all__ = ["HAVE_NUMBA", "numba_enabled", "use_numba", "__version__"]
