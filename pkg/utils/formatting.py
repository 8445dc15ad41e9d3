"""
Helpers for reading and writing exact scalars and numeric grids.
"""
import math
from fractions import Fraction
from typing import List, Optional, Union

import numpy as np

from utils.errors import DistributionError

ExactLike = Union[Fraction, int, str]


def to_exact(value: Union[ExactLike, float]) -> Fraction:
    """
    Convert a value to an exact rational.

    Strings accept "p/q", integers and finite decimals ("1.5" is exactly 3/2).
    Floats are converted through their shortest repr so that 0.1 becomes 1/10.

    Args:
        value: Input value

    Returns:
        Fraction: Exact rational
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise DistributionError(f"Not a number: {value!r}")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise DistributionError(f"Not a finite number: {value!r}")
        return Fraction(repr(value))
    if isinstance(value, str):
        text = value.strip()
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            raise DistributionError(f"Cannot parse exact number from {value!r}")
    raise DistributionError(f"Unsupported number type: {type(value).__name__}")


def format_exact(value: Fraction) -> str:
    """Format a rational as "p/q", or "p" when the denominator is 1."""
    return str(value)


def latex_exact(value: Fraction) -> str:
    """Format a nonnegative rational for LaTeX."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"\\frac{{{value.numerator}}}{{{value.denominator}}}"


def exact_sqrt(value: Fraction) -> Optional[Fraction]:
    """
    Return the exact square root of a nonnegative rational, if it is rational.

    Args:
        value (Fraction): Nonnegative rational

    Returns:
        Optional[Fraction]: The root, or None when irrational
    """
    if value < 0:
        return None
    num = math.isqrt(value.numerator)
    den = math.isqrt(value.denominator)
    if num * num == value.numerator and den * den == value.denominator:
        return Fraction(num, den)
    return None


def parse_grid(text: str) -> np.ndarray:
    """
    Parse a grid specification "start:stop:count" into evenly spaced points.

    Args:
        text (str): Grid specification, e.g. "-5:5:101"

    Returns:
        np.ndarray: Grid points including both ends
    """
    parts = text.split(":")
    if len(parts) != 3:
        raise DistributionError(f"Grid must look like start:stop:count, got {text!r}")
    try:
        start, stop, count = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise DistributionError(f"Grid must look like start:stop:count, got {text!r}")
    if count < 1:
        raise DistributionError(f"Grid count must be positive, got {count}")
    return np.linspace(start, stop, count)


def parse_exact_list(text: str) -> List[Fraction]:
    """Parse a comma separated list of exact numbers, e.g. "1,0,-1/2"."""
    if not text.strip():
        return []
    return [to_exact(part) for part in text.split(",")]
