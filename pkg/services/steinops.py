"""
Stein operator constructions.

Base operators for the normal, shifted gamma and variance-gamma families,
the generic construction for products of iid variables whose common
operator is M - Q(MD) - P(MD) D, its linear-coefficient special case with
infinite shift parameters, products of normals with unequal means and
variances, the sum transform, and the reductions between them.
"""
import logging
from fractions import Fraction
from typing import Any, Dict, List, NamedTuple, Optional, Sequence, Tuple

from models.distribution_spec import (DistributionSpec, Normal, ProductIndep, Scaled,
                                      ShiftedGamma, SumIID, VarianceGamma)
from models.opweyl import (INF, D, I, M, OperatorPoly, Param, UPoly, from_upoly,
                           shift_param, t_operator)
from utils.errors import DistributionError, OperatorError
from utils.formatting import exact_sqrt, to_exact

logger = logging.getLogger(__name__)


class LinearSteinForm:
    """
    Operator sum_k (a_k x + b_k) f^(k)(x) with constant a_k, b_k.
    """

    def __init__(self, coeffs: Sequence[Tuple[Any, Any]]):
        """
        Args:
            coeffs (Sequence[Tuple]): (a_k, b_k) for k = 0..m
        """
        pairs = [(to_exact(a), to_exact(b)) for a, b in coeffs]
        while pairs and pairs[-1] == (0, 0):
            pairs.pop()
        if len(pairs) < 2:
            raise OperatorError("A linear Stein form needs order m >= 1")
        self.coeffs: Tuple[Tuple[Fraction, Fraction], ...] = tuple(pairs)

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    def to_operator(self) -> OperatorPoly:
        terms: Dict[Tuple[int, int], Fraction] = {}
        for k, (a, b) in enumerate(self.coeffs):
            terms[(1, k)] = a
            terms[(0, k)] = b
        return OperatorPoly(terms)

    @classmethod
    def from_operator(cls, op: OperatorPoly) -> "LinearSteinForm":
        if op.is_zero():
            raise OperatorError("The zero operator has no linear Stein form")
        if op.degree > 1:
            raise OperatorError(f"Linear Stein forms need degree <= 1, got degree {op.degree}")
        return cls([(op.coefficient(1, k), op.coefficient(0, k)) for k in range(op.order + 1)])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LinearSteinForm):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"LinearSteinForm({[(str(a), str(b)) for a, b in self.coeffs]})"


class Reduction(NamedTuple):
    """A named operator identity A = B L ("factor") or A L = B ("compose")."""

    name: str
    a: OperatorPoly
    l: OperatorPoly
    b: OperatorPoly
    orientation: str


def base_operator(spec: DistributionSpec) -> OperatorPoly:
    """
    Stein operator of a single-family law.

    Args:
        spec (DistributionSpec): Normal, ShiftedGamma, VarianceGamma, or Scaled of one

    Returns:
        OperatorPoly: The family's operator
    """
    if isinstance(spec, Normal):
        return D.scale(spec.variance) - M + spec.mean
    if isinstance(spec, ShiftedGamma):
        return t_operator(spec.shape + spec.shift) - D.scale(spec.shift) - M
    if isinstance(spec, VarianceGamma):
        centered = M - spec.mu
        sigma_sq = spec.sigma ** 2
        return (centered * D * D).scale(sigma_sq) \
            + (centered.scale(2 * spec.theta) + spec.r * sigma_sq) * D \
            + (spec.r * spec.theta - centered)
    if isinstance(spec, Scaled):
        return base_operator(spec.base).rescale(spec.c)
    raise DistributionError(f"{spec.describe()} is not a base family; use operator_for")


def product_iid(p: UPoly, q: UPoly) -> OperatorPoly:
    """
    Operator for Z = XY with X, Y iid sharing the operator M - Q(MD) - P(MD) D.

    Returns R1(MD) D^2 + R2(MD) D + R3(MD) + M R4(MD) with
    R1 = P(U)^2 P(U+1) (U+1) Q(U+2),
    R2 = -P(U)^2 Q(U) (U+1) - Q(U+1) P(U) Q(U)^2,
    R3 = -U Q(U) P(U-1) - Q(U-1) Q(U)^2,
    R4 = Q(U-1).
    """
    if p.is_zero() and q.is_zero():
        raise OperatorError("product_iid needs P or Q to be nonzero")
    u = UPoly.variable()
    r1 = p * p * p.shift(1) * (u + 1) * q.shift(2)
    r2 = -(p * p * q * (u + 1)) - q.shift(1) * p * q * q
    r3 = -(u * q * p.shift(-1)) - q.shift(-1) * q * q
    r4 = q.shift(-1)
    result = from_upoly(r1) * D * D + from_upoly(r2) * D + from_upoly(r3) + M * from_upoly(r4)
    logger.debug(f"product_iid: P={p}, Q={q} -> {len(result.terms)} terms")
    return result


def product_iid_linear(alpha: Any, beta: Any, a: Param, b: Param) -> OperatorPoly:
    """
    Operator for Z = XY, X, Y iid with operator M - alpha T_a - beta T_b D.

    Expands (M - alpha^2 T_a^2 - beta^2 T_b^2 T_1 D)(T_(a-1) - beta T_b T_(a+1) D)
    - 2 alpha^2 beta T_a^2 T_b T_(a+1) D. An infinite shift reads T_inf = I.

    Args:
        alpha: Exact scalar
        beta: Exact scalar
        a: Exact scalar or INF
        b: Exact scalar or INF

    Returns:
        OperatorPoly: Exact expansion
    """
    alpha, beta = to_exact(alpha), to_exact(beta)
    if alpha == 0 and beta == 0:
        raise OperatorError("product_iid_linear needs alpha or beta to be nonzero")
    t_a = t_operator(a)
    t_a_down = t_operator(shift_param(a, -1))
    t_a_up = t_operator(shift_param(a, 1))
    t_b = t_operator(b)
    t_1 = t_operator(Fraction(1))

    left = M - (t_a * t_a).scale(alpha ** 2) - (t_b * t_b * t_1 * D).scale(beta ** 2)
    right = t_a_down - (t_b * t_a_up * D).scale(beta)
    tail = (t_a * t_a * t_b * t_a_up * D).scale(2 * alpha ** 2 * beta)
    return left * right - tail


def equal_means_operator(mu_sq: Any) -> OperatorPoly:
    """
    Operator for a product of iid N(mu, 1) variables, written through mu^2:
    M D^3 + (I - M) D^2 - (M + (1 + mu^2) I) D + M - mu^2 I.
    """
    mu_sq = to_exact(mu_sq)
    return M * D ** 3 + (I - M) * D ** 2 - (M + (1 + mu_sq)) * D + M - mu_sq


def product_normals(mu_x: Any, mu_y: Any, var_x: Any, var_y: Any) -> OperatorPoly:
    """
    Operator for XY with X ~ N(mu_x, var_x), Y ~ N(mu_y, var_y) independent.

    With s = var_x var_y and m = mu_x mu_y:
    s^2 M D^4 + s^2 D^3 - s (2M + m) D^2 - (s + mu_x^2 var_y + mu_y^2 var_x) D + M - m.
    """
    mu_x, mu_y, var_x, var_y = (to_exact(v) for v in (mu_x, mu_y, var_x, var_y))
    if var_x <= 0 or var_y <= 0:
        raise DistributionError(f"Variances must be positive, got {var_x} and {var_y}")
    s = var_x * var_y
    m = mu_x * mu_y
    return (M * D ** 4 + D ** 3).scale(s * s) \
        - ((M.scale(2) + m) * D ** 2).scale(s) \
        - D.scale(s + mu_x ** 2 * var_y + mu_y ** 2 * var_x) \
        + M - m


def table_operator(row: int, mu_x: Any = 0, mu_y: Any = 0, var_x: Any = 1, var_y: Any = 1) -> OperatorPoly:
    """
    Operators for products of two normals, by case.

    Row 1: centered, sigma^2 (M D^2 + D) - M with sigma^2 = var_x var_y.
    Row 2: standardized means equal (mu_x / sigma_x = mu_y / sigma_y), built
        as sigma * rescale(equal-means operator at mu^2 = mu_x mu_y / sigma, sigma);
        needs sigma = sigma_x sigma_y rational.
    Row 3: general means and variances (product_normals).
    """
    mu_x, mu_y, var_x, var_y = (to_exact(v) for v in (mu_x, mu_y, var_x, var_y))
    if var_x <= 0 or var_y <= 0:
        raise DistributionError(f"Variances must be positive, got {var_x} and {var_y}")
    if row == 1:
        if mu_x != 0 or mu_y != 0:
            raise DistributionError("Row 1 is the centered case (both means zero)")
        sigma_sq = var_x * var_y
        return (M * D ** 2 + D).scale(sigma_sq) - M
    if row == 2:
        if mu_x ** 2 * var_y != mu_y ** 2 * var_x or mu_x * mu_y < 0:
            raise DistributionError("Row 2 needs mu_x / sigma_x = mu_y / sigma_y")
        sigma = exact_sqrt(var_x * var_y)
        if sigma is None:
            raise DistributionError(f"Row 2 needs sigma_x sigma_y rational, got sqrt({var_x * var_y})")
        return equal_means_operator(mu_x * mu_y / sigma).rescale(sigma).scale(sigma)
    if row == 3:
        return product_normals(mu_x, mu_y, var_x, var_y)
    raise DistributionError(f"Table rows are 1, 2 or 3, got {row}")


def to_linear_form(op: OperatorPoly) -> LinearSteinForm:
    return LinearSteinForm.from_operator(op)


def sum_transform(form: LinearSteinForm, n: int) -> OperatorPoly:
    """
    Operator for the sum of n iid copies: b_k -> n b_k, a_k unchanged.
    """
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise OperatorError(f"sum_transform needs a positive integer count, got {n!r}")
    return LinearSteinForm([(a, n * b) for a, b in form.coeffs]).to_operator()


def reduction_check(a: OperatorPoly, l: OperatorPoly, b: OperatorPoly, orientation: str = "factor") -> bool:
    """
    Check an operator identity.

    Args:
        a (OperatorPoly): Operator under test
        l (OperatorPoly): Substitution operator
        b (OperatorPoly): Reduced operator
        orientation (str): "factor" tests a == b l; "compose" tests a l == b

    Returns:
        bool: True if the identity holds in canonical form
    """
    if orientation == "factor":
        return a == b * l
    if orientation == "compose":
        return a * l == b
    raise OperatorError(f"Unknown orientation {orientation!r}; use 'factor' or 'compose'")


def standard_reductions(r: Any = 2, sigma: Any = 1, n: int = 3, mu: Any = 1) -> List[Reduction]:
    """
    Every reduction between the product constructions, at the given parameters.

    Args:
        r: Gamma shape and VG r
        sigma: VG sigma
        n: Sum count
        mu: Common normal mean

    Returns:
        List[Reduction]: Identities that reduction_check must accept
    """
    r, sigma, mu = to_exact(r), to_exact(sigma), to_exact(mu)
    bessel_form = M * D ** 2 + D - M
    sigma_sq = sigma ** 2
    vg_left = M - (t_operator(r) ** 2 * t_operator(1) * D).scale(sigma_sq ** 2)
    vg_right = t_operator(r / 2 - 1) - (t_operator(r) * t_operator(r / 2 + 1) * D).scale(sigma_sq)
    return [
        Reduction("normal-product-centered", equal_means_operator(0), D - I, bessel_form, "factor"),
        Reduction("gamma-product-centered", product_iid_linear(1, 0, r, INF),
                  t_operator(r - 1), M - t_operator(r) ** 2, "factor"),
        Reduction("vg-product-theta0", product_iid_linear(0, sigma_sq, r / 2, r), vg_right, vg_left, "factor"),
        Reduction("vg-product-theta0-second-step",
                  (t_operator(r) ** 2 * t_operator(1) ** 2).scale(sigma_sq ** 2) - M ** 2,
                  -M, vg_left, "factor"),
        Reduction("sum-centered", sum_transform(to_linear_form(equal_means_operator(0)), n),
                  D - I, M * D ** 2 + D.scale(n) - M, "factor"),
        Reduction("equal-to-unequal-means", equal_means_operator(mu ** 2), D + I,
                  product_normals(mu, mu, 1, 1), "compose"),
        Reduction("unequal-means-centered", product_normals(0, 0, 1, 1), D ** 2 - I, bessel_form, "factor"),
    ]


def _product_operator(left: DistributionSpec, right: DistributionSpec) -> OperatorPoly:
    if isinstance(left, Normal) and isinstance(right, Normal):
        if left.mean == 0 and right.mean == 0:
            return table_operator(1, 0, 0, left.variance, right.variance)
        try:
            return table_operator(2, left.mean, right.mean, left.variance, right.variance)
        except DistributionError:
            return product_normals(left.mean, right.mean, left.variance, right.variance)
    if left != right:
        raise DistributionError(
            f"No product operator for non-identical factors {left.describe()} and {right.describe()}")
    if isinstance(left, ShiftedGamma):
        return product_iid_linear(1, -left.shift, left.shape + left.shift, INF)
    if isinstance(left, VarianceGamma):
        if left.mu != 0:
            raise DistributionError("VG factors with mu != 0 have no product operator of this kind")
        return product_iid_linear(2 * left.theta, left.sigma ** 2, left.r / 2, left.r)
    raise DistributionError(f"No product operator for factors {left.describe()}")


def operator_for(spec: DistributionSpec) -> OperatorPoly:
    """
    Natural Stein operator for any supported distribution spec.

    Args:
        spec (DistributionSpec): Target law

    Returns:
        OperatorPoly: An operator A with E[A f(Z)] = 0
    """
    if isinstance(spec, (Normal, ShiftedGamma, VarianceGamma)):
        return base_operator(spec)
    if isinstance(spec, Scaled):
        return operator_for(spec.base).rescale(spec.c)
    if isinstance(spec, ProductIndep):
        return _product_operator(spec.left, spec.right)
    if isinstance(spec, SumIID):
        inner = operator_for(spec.base)
        try:
            form = to_linear_form(inner)
        except OperatorError as e:
            raise DistributionError(f"Sum of copies of {spec.base.describe()} is unsupported: {e}")
        return sum_transform(form, spec.n)
    raise DistributionError(f"Unsupported distribution spec {spec!r}")
