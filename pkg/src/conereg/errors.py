"""Exception and warning types raised across the package."""


class ConeregError(Exception):
    """Base class for all package errors."""


class DisconnectedLinkError(ConeregError, ValueError):
    """The link spectrum has a repeated zero eigenvalue or none at all."""


class EigensolveError(ConeregError):
    """A discrete eigensolve did not converge or failed its residual check."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class SingularMassError(ConeregError):
    """The weighted mass matrix has a non-positive or non-finite diagonal."""


class BracketNotFoundError(ConeregError):
    """No sign change was found inside the search interval."""

    def __init__(self, message, interval):
        super().__init__(f"{message} (searched {interval[0]:g}..{interval[1]:g})")
        self.interval = interval


class CoercivityFailure(ConeregError):
    """The discrete Schrödinger quadratic form is not positive definite."""


class MorreyHypothesisError(ConeregError):
    """Ball energies exceed the Morrey bound at some scale."""

    def __init__(self, message, scale):
        super().__init__(f"{message} (first violation at r={scale:.4g})")
        self.scale = scale


class InsufficientRadiiError(ConeregError, ValueError):
    """Too few radii, or too narrow a span, for a log-log fit."""


class EmptyBallError(ConeregError, ValueError):
    """A metric ball contains no vertices."""


class ResolutionWarning(UserWarning):
    """The grid is too coarse to resolve a mode near a degenerate endpoint."""
