"""
Exception hierarchy for the Stein operator toolkit.
"""
from typing import Optional


class SteinError(Exception):
    """Base class for every error raised by the toolkit."""


class OperatorError(SteinError, ValueError):
    """Invalid operator input (zero operator, zero scale factor, wrong shape)."""


class DistributionError(SteinError, ValueError):
    """Parameter-domain violation or unsupported distribution variant."""


class MomentError(SteinError):
    """Moment sequence could not be extended."""


class RecurrenceError(MomentError):
    """
    The moment recurrence cannot be solved at some step.

    Args:
        k (int): Index of the recurrence step that failed
        message (str): Description
    """

    def __init__(self, k: int, message: str):
        super().__init__(f"{message} (k={k})")
        self.k = k


class InsufficientMomentsError(MomentError):
    """Fewer initial moments were supplied than the recurrence needs."""

    def __init__(self, required: int, supplied: int):
        super().__init__(f"recurrence needs at least {required} initial moments, got {supplied}")
        self.required = required
        self.supplied = supplied


class InconsistentMomentsError(MomentError):
    """Surplus initial moments violate the recurrence."""

    def __init__(self, k: int, residual: Optional[object] = None):
        super().__init__(f"initial moments violate the recurrence at k={k} (residual {residual})")
        self.k = k
        self.residual = residual


class MatrixError(SteinError, ValueError):
    """Invalid matrix input for exact linear algebra."""


class AnalyticError(SteinError, ValueError):
    """Argument outside the domain of an analytic evaluation."""


class CommandError(SteinError, ValueError):
    """Invalid command-line input; the message names the offending flag."""

    def __init__(self, flag: str, message: str):
        super().__init__(f"{flag}: {message}")
        self.flag = flag
