"""Exception hierarchy shared by every module of the package."""


class KpzTailError(Exception):
    """Base class for all numerical failures raised by kpztail."""


class SpectrumOutOfRange(KpzTailError):
    """An assembled operator has eigenvalues outside [0, 1) beyond the guard."""


class RangeExceeded(KpzTailError):
    """An Airy evaluation was requested outside the supported interval."""


class TruncationTooTight(KpzTailError):
    """A truncated integral cannot reach the requested tolerance."""


class NoConvergence(KpzTailError):
    """An iterative solver hit its iteration cap."""


class DomainError(KpzTailError, ValueError):
    """An argument lies outside the mathematical domain of the operation."""


class QuadratureFailure(KpzTailError):
    """Adaptive quadrature stalled before meeting its tolerance."""


class DominanceNotEstablished(KpzTailError):
    """The tail-bracket remainder is not dominated at this (s, T)."""
