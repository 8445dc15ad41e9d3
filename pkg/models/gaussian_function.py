"""
Smooth test functions for Stein identity checks.
"""
import logging
from typing import List, Sequence, Tuple

import numpy as np
from numpy.polynomial import polynomial as P

from utils.errors import AnalyticError

logger = logging.getLogger(__name__)


class GaussianFunction:
    """
    f(x) = Re[p(x) exp(i omega x - x^2 / (2 width^2))] for a complex polynomial p.

    The family is closed under differentiation:
    (p e)' = (p' + p (i omega - x / width^2)) e.
    """

    def __init__(self, poly: Sequence[complex], omega: float = 0.0, width: float = 1.0, name: str = ""):
        """
        Args:
            poly (Sequence[complex]): Coefficients of p, lowest power first
            omega (float): Oscillation frequency
            width (float): Gaussian envelope width
            name (str): Label
        """
        if width <= 0:
            raise AnalyticError(f"Envelope width must be positive, got {width}")
        self.poly = np.trim_zeros(np.asarray(poly, dtype=np.complex128), "b")
        if self.poly.size == 0:
            self.poly = np.zeros(1, dtype=np.complex128)
        self.omega = float(omega)
        self.width = float(width)
        self.name = name or f"f(deg={self.poly.size - 1}, omega={self.omega})"

    def derivative(self) -> "GaussianFunction":
        chirp = np.array([1j * self.omega, -1.0 / self.width ** 2], dtype=np.complex128)
        poly = P.polyadd(P.polyder(self.poly), P.polymul(self.poly, chirp))
        return GaussianFunction(poly, self.omega, self.width, f"{self.name}'")

    def derivatives(self, order: int) -> List["GaussianFunction"]:
        """f, f', ..., f^(order)."""
        out = [self]
        for _ in range(order):
            out.append(out[-1].derivative())
        return out

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        envelope = np.exp(1j * self.omega * x - x * x / (2.0 * self.width ** 2))
        return np.real(P.polyval(x, self.poly) * envelope)

    def derivative_table(self, x: np.ndarray, order: int) -> np.ndarray:
        """Array of shape (order + 1, len(x)) holding f^(j)(x)."""
        x = np.asarray(x, dtype=np.float64)
        return np.vstack([fn(x) for fn in self.derivatives(order)])

    def __repr__(self) -> str:
        return f"GaussianFunction({self.name!r})"


def default_bank() -> List[GaussianFunction]:
    """
    x^k e^(-x^2/2) for k = 0..6, sin(x) e^(-x^2/2) and cos(x) e^(-x^2/2).
    """
    bank = [GaussianFunction([0] * k + [1], name=f"x^{k} exp(-x^2/2)") for k in range(7)]
    bank.append(GaussianFunction([-1j], omega=1.0, name="sin(x) exp(-x^2/2)"))
    bank.append(GaussianFunction([1], omega=1.0, name="cos(x) exp(-x^2/2)"))
    return bank


def bank_names(bank: Sequence[GaussianFunction]) -> Tuple[str, ...]:
    return tuple(fn.name for fn in bank)
