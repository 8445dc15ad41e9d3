"""
Numerical density of the product of two independent unit-variance normals.

bessel_k integrates K_nu(x) = int_0^inf exp(-x cosh t) cosh(nu t) dt directly,
pdf_series sums the double Bessel series and pdf_conv integrates the
product-density convolution with derivatives taken under the integral.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from numpy.polynomial import hermite_e
from scipy.integrate import quad

import config
from optimization.batching import BatchProcessor
from services.analytic import DensityODE
from utils.errors import AnalyticError

logger = logging.getLogger(__name__)

_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
# Gaussian factors are negligible beyond this many standard deviations.
_GAUSS_CUT = 12.0


def bessel_k(nu: float, x: float) -> float:
    """
    Modified Bessel function of the second kind by adaptive quadrature.

    The integrand is rescaled by its maximum exp(nu t* - x cosh t*),
    t* = asinh(nu / x), and truncated where it has dropped by exp(-BESSEL_TAIL).

    Args:
        nu (float): Order; K_(-nu) = K_nu
        x (float): Argument, x > 0

    Returns:
        float: K_nu(x)
    """
    if not x > 0:
        raise AnalyticError(f"bessel_k needs x > 0, got {x}")
    nu = abs(float(nu))
    x = float(x)
    t_star = math.asinh(nu / x)
    e_star = nu * t_star - x * math.cosh(t_star)

    def integrand(t: float) -> float:
        return math.exp(nu * t - x * math.cosh(t) - e_star) * 0.5 * (1.0 + math.exp(-2.0 * nu * t))

    upper = t_star + 1.0
    while nu * upper - x * math.cosh(upper) - e_star > -config.BESSEL_TAIL:
        upper += 1.0
    points = [t_star] if 0.0 < t_star < upper else None
    value, error = quad(integrand, 0.0, upper, points=points, epsabs=0.0,
                        epsrel=config.QUAD_EPSREL, limit=config.QUAD_LIMIT)
    logger.debug(f"K_{nu}({x}): truncated at t={upper:.2f}, quad error {error:.1e}")
    return math.exp(e_star) * value


def bessel_k_table(max_order: int, x: float) -> List[float]:
    """K_0(x), ..., K_max_order(x) by upward recurrence from two quadratures."""
    values = [bessel_k(0, x)]
    if max_order >= 1:
        values.append(bessel_k(1, x))
    for v in range(1, max_order):
        values.append(values[v - 1] + 2.0 * v / x * values[v])
    return values


def pdf_series(x: float, mu_x: float, mu_y: float, n_terms: Optional[int] = None) -> float:
    """
    Double Bessel series for the density of XY, X ~ N(mu_x, 1), Y ~ N(mu_y, 1):

    e^(-(mu_x^2 + mu_y^2)/2) / pi * sum_n sum_(m<=2n)
        x^(2n-m) |x|^(m-n) / (2n)! C(2n, m) mu_x^m mu_y^(2n-m) K_(m-n)(|x|)

    Args:
        x (float): Point, x != 0
        mu_x (float): Mean of X
        mu_y (float): Mean of Y
        n_terms (int): Number of n-blocks (default config.SERIES_TERMS)

    Returns:
        float: Partial sum
    """
    if x == 0:
        raise AnalyticError("pdf_series is singular at x = 0")
    n_terms = n_terms or config.SERIES_TERMS
    if n_terms < 1:
        raise AnalyticError(f"n_terms must be positive, got {n_terms}")
    x, mu_x, mu_y = float(x), float(mu_x), float(mu_y)
    ax = abs(x)
    k_values = bessel_k_table(n_terms, ax)

    total = 0.0
    block = 0.0
    for n in range(n_terms):
        block = 0.0
        scale = ax ** n / math.factorial(2 * n)
        for m in range(2 * n + 1):
            sign = -1.0 if x < 0 and m % 2 else 1.0
            block += sign * math.comb(2 * n, m) * mu_x ** m * mu_y ** (2 * n - m) * k_values[abs(m - n)]
        total += scale * block
    logger.debug(f"pdf_series({x}): last block {abs(block) * ax ** (n_terms - 1):.1e}")
    return math.exp(-(mu_x ** 2 + mu_y ** 2) / 2.0) / math.pi * total


def _normal_pdf(z: float) -> float:
    return _INV_SQRT_2PI * math.exp(-0.5 * z * z)


def pdf_conv(x: float, mu_x: float, mu_y: float, k: int = 0) -> float:
    """
    k-th derivative of the density of XY from
    p(x) = int p_X(u) p_Y(x / u) / |u| du, with u = +-e^v on each half line.

    Args:
        x (float): Point, x != 0
        mu_x (float): Mean of X
        mu_y (float): Mean of Y
        k (int): Derivative order, 0..4

    Returns:
        float: p^(k)(x)
    """
    if not 0 <= k <= 4:
        raise AnalyticError(f"pdf_conv supports derivative orders 0..4, got {k}")
    if x == 0:
        raise AnalyticError("The product density is unbounded at x = 0")
    x, mu_x, mu_y = float(x), float(mu_x), float(mu_y)
    he = [0.0] * k + [1.0]
    parity = -1.0 if k % 2 else 1.0

    total = 0.0
    for side in (1.0, -1.0):
        def integrand(v: float) -> float:
            u = side * math.exp(v)
            w = x / u - mu_y
            return _normal_pdf(u - mu_x) * u ** -k * parity * float(hermite_e.hermeval(w, he)) * _normal_pdf(w)

        lower = math.log(abs(x) / (abs(mu_y) + _GAUSS_CUT))
        upper = math.log(abs(mu_x) + _GAUSS_CUT)
        if lower >= upper:
            continue
        balance = 0.5 * math.log(abs(x))
        points = [balance] if lower < balance < upper else None
        value, error = quad(integrand, lower, upper, points=points, epsabs=config.QUAD_EPSABS,
                            epsrel=config.QUAD_EPSREL, limit=config.QUAD_LIMIT)
        total += value
        logger.debug(f"pdf_conv({x}, k={k}) side {side:+.0f}: {value:.6e} (error {error:.1e})")
    return total


def pdf_conv_derivatives(x: float, mu_x: float, mu_y: float, order: int) -> List[float]:
    return [pdf_conv(x, mu_x, mu_y, k) for k in range(order + 1)]


def density_ode_residual(ode: DensityODE, x: float, mu_x: float, mu_y: float) -> float:
    """Residual of a density ODE for the product density, derivatives from pdf_conv."""
    return ode.residual(x, pdf_conv_derivatives(x, mu_x, mu_y, ode.order))


def bessel_ode_residual(x: float) -> float:
    """x p'' + p' - x p for the centered product density (1/pi) K_0(|x|)."""
    p, dp, d2p = pdf_conv_derivatives(x, 0.0, 0.0, 2)
    return x * d2p + dp - x * p


def density_table(xs: Sequence[float], mu_x: float, mu_y: float, n_terms: Optional[int] = None,
                  max_workers: Optional[int] = None) -> List[Tuple[float, float, float, float]]:
    """
    (x, series, convolution, |difference|) for every x, evaluated in parallel.
    """
    def row(x: float) -> Tuple[float, float, float, float]:
        series = pdf_series(x, mu_x, mu_y, n_terms)
        conv = pdf_conv(x, mu_x, mu_y)
        return float(x), series, conv, abs(series - conv)

    points = [float(x) for x in np.asarray(xs, dtype=np.float64) if x != 0]
    skipped = len(xs) - len(points)
    if skipped:
        logger.warning(f"Skipping {skipped} grid point(s) at x = 0 where the density is unbounded")
    return BatchProcessor(max_workers=max_workers).run(row, points)
