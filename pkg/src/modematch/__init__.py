"""Mode-mismatch analysis for photonic linear-optics circuits.

Wave-packets sampled on grids, compiled linear networks with a displacement
matrix, a path-sum engine for fidelities and post-selected states, independent
oracles, and a numerical shape optimiser for the curvature functional.
"""

from .errors import (
    ConvergenceError,
    GridTooNarrowError,
    GuardError,
    NonSmoothError,
    NullEventError,
    NumericalError,
    OffGridShiftError,
)

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "GridTooNarrowError",
    "GuardError",
    "NonSmoothError",
    "NullEventError",
    "NumericalError",
    "OffGridShiftError",
]
