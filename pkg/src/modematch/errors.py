"""Exception hierarchy.

Configuration problems derive from ``ValueError``; numerical failures derive
from :class:`NumericalError`.  The CLI maps the former to exit code 1 and the
latter to exit code 2.
"""


class NumericalError(RuntimeError):
    """A computation could not produce a trustworthy number."""


class GridTooNarrowError(ValueError):
    """The sampling grid does not contain the wave-packet."""


class OffGridShiftError(NumericalError):
    """A displacement would push the packet's support off the grid."""


class ConvergenceError(NumericalError):
    pass


class GuardError(NumericalError):
    """A complexity guard (photon count, mode count, matrix size) was exceeded."""


class NonSmoothError(NumericalError):
    """Finite differences show a cusp or a non-stationary operating point."""


class NullEventError(NumericalError):
    """Conditioning on an outcome with (numerically) zero probability."""
