import logging
from typing import Any, Dict, Sequence

import numpy as np

import config
from models.gaussian_function import GaussianFunction
from models.opweyl import OperatorPoly

try:
    import numba
    from numba import njit
    NUMBA_AVAILABLE = True
except ImportError:
    NUMBA_AVAILABLE = False

logger = logging.getLogger(__name__)


def _apply_terms(x, derivs, powers, orders, coeffs):
    """sum_t coeffs[t] x^powers[t] derivs[orders[t]] evaluated pointwise."""
    n = x.shape[0]
    out = np.zeros(n)
    for t in range(powers.shape[0]):
        p = powers[t]
        j = orders[t]
        c = coeffs[t]
        for s in range(n):
            out[s] += c * x[s] ** p * derivs[j, s]
    return out


if NUMBA_AVAILABLE:
    _apply_terms_jit = njit(cache=False)(_apply_terms)
else:
    _apply_terms_jit = None


class OperatorEvaluator:
    """
    Evaluates (A f)(x) = sum a_ij x^i f^(j)(x) on float samples.

    Uses a numba kernel when numba is installed and config.USE_NUMBA is set,
    otherwise vectorized numpy.
    """

    def __init__(self, op: OperatorPoly, use_numba: bool = None):
        """
        Args:
            op (OperatorPoly): Operator to evaluate
            use_numba (bool): Override config.USE_NUMBA
        """
        self.op = op
        terms = op.float_terms()
        self.powers = np.array([i for i, _, _ in terms], dtype=np.int64)
        self.orders = np.array([j for _, j, _ in terms], dtype=np.int64)
        self.coeffs = np.array([a for _, _, a in terms], dtype=np.float64)
        self.max_order = int(self.orders.max()) if terms else 0

        wanted = config.USE_NUMBA if use_numba is None else use_numba
        self.enabled = bool(wanted and NUMBA_AVAILABLE)
        if wanted and not NUMBA_AVAILABLE:
            logger.info("numba not installed, operator evaluation uses numpy")
        self.device_info = f"numba {numba.__version__} (cpu jit)" if self.enabled else "numpy"

    def is_available(self) -> bool:
        return self.enabled

    def get_device_info(self) -> str:
        return self.device_info

    def evaluate_table(self, x: np.ndarray, derivs: np.ndarray) -> np.ndarray:
        """
        Args:
            x (np.ndarray): Sample points, shape (n,)
            derivs (np.ndarray): f^(j)(x) for j = 0..max_order, shape (max_order + 1, n)

        Returns:
            np.ndarray: (A f)(x), shape (n,)
        """
        x = np.ascontiguousarray(x, dtype=np.float64)
        derivs = np.ascontiguousarray(derivs, dtype=np.float64)
        if self.coeffs.size == 0:
            return np.zeros_like(x)
        if self.enabled:
            try:
                return _apply_terms_jit(x, derivs, self.powers, self.orders, self.coeffs)
            except Exception as e:
                logger.error(f"numba evaluation failed, falling back to numpy: {e}")
                self.enabled = False
        out = np.zeros_like(x)
        for p, j, c in zip(self.powers, self.orders, self.coeffs):
            out += c * x ** p * derivs[j]
        return out

    def evaluate(self, fn: GaussianFunction, x: np.ndarray) -> np.ndarray:
        """(A f)(x)."""
        return self.evaluate_table(x, fn.derivative_table(x, self.max_order))

    def get_info(self) -> Dict[str, Any]:
        return {"terms": int(self.coeffs.size), "max_order": self.max_order, "device": self.device_info}


def evaluate_operator(op: OperatorPoly, fn: GaussianFunction, x: Sequence[float]) -> np.ndarray:
    return OperatorEvaluator(op).evaluate(fn, np.asarray(x, dtype=np.float64))
