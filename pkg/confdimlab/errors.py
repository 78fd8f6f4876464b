"""Exceptions and warnings raised by confdimlab operations.

Every error derives from ``ConfdimlabError`` and from the builtin exception a caller
would naturally catch, so ``except ValueError`` keeps working.
"""
from typing import Any, Optional


class ConfdimlabError(Exception):
    """Base class of all confdimlab errors."""


## INPUT ERRORS
class UnknownSpec(ConfdimlabError, ValueError):
    """A spec name or product expression does not resolve in the registry."""


class InvalidSpec(ConfdimlabError, ValueError):
    """A fractal spec is malformed, e.g. two letters share a translation."""


class RatioMismatch(ConfdimlabError, ValueError):
    """Product of specs with different contraction ratios."""


class CapExceeded(ConfdimlabError, ValueError):
    """The requested graph has more cells than the configured cap."""


class ZeroMass(ConfdimlabError, ValueError):
    """A measure carries no mass where positive mass is required."""


class BadExponent(ConfdimlabError, ValueError):
    """The exponent p is not strictly larger than 1."""


class RadiusOutOfRange(ConfdimlabError, ValueError):
    """A radius is outside the range an operation accepts."""


class BallsOverlap(ConfdimlabError, ValueError):
    """The two balls of a ball-to-ball family intersect."""


class InsufficientLevels(ConfdimlabError, ValueError):
    """A scaling fit received fewer than three levels."""


class GraphMismatch(ConfdimlabError, ValueError):
    """A function or a form lives on a different graph than expected."""


class EmptyFamily(ConfdimlabError, ValueError):
    """A function family is empty."""


class EmptyBall(ConfdimlabError, ValueError):
    """A metric ball contains no cells."""


## SOLVER ERRORS
class NonConvergence(ConfdimlabError, RuntimeError):
    """An iterative solver hit its iteration limit.

    Parameters
    ----------
    message
        Human readable description.
    partial
        The best result available when the solver stopped.
    """

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class BracketFailure(ConfdimlabError, RuntimeError):
    """No sign change of the scaling slope could be found, even after widening."""


## WARNINGS
class NonMonotoneSlope(UserWarning):
    """The fitted scaling slope decreased between two exponents beyond fit noise."""
