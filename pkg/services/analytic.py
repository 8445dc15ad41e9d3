"""
Characteristic-function ODEs, closed forms and operator/density duality.
"""
import logging
import math
from fractions import Fraction
from typing import Any, Dict, List, Sequence, Tuple, Union

import numpy as np

from models.opweyl import OperatorPoly
from services.steinops import LinearSteinForm, to_linear_form
from utils.errors import AnalyticError
from utils.formatting import format_exact, latex_exact, to_exact

logger = logging.getLogger(__name__)


class GaussianRational:
    """Exact complex number re + im i with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re: Any = 0, im: Any = 0):
        self.re = to_exact(re)
        self.im = to_exact(im)

    @classmethod
    def coerce(cls, value: Any) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            return cls(value.real, value.imag)
        return cls(value)

    def __add__(self, other: Any) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __neg__(self) -> "GaussianRational":
        return GaussianRational(-self.re, -self.im)

    def __sub__(self, other: Any) -> "GaussianRational":
        return self + (-GaussianRational.coerce(other))

    def __mul__(self, other: Any) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re * other.re - self.im * other.im,
                                self.re * other.im + self.im * other.re)

    __rmul__ = __mul__

    def conjugate(self) -> "GaussianRational":
        return GaussianRational(self.re, -self.im)

    def __truediv__(self, other: Any) -> "GaussianRational":
        other = GaussianRational.coerce(other)
        norm = other.re * other.re + other.im * other.im
        if norm == 0:
            raise ZeroDivisionError("division by the zero Gaussian rational")
        top = self * other.conjugate()
        return GaussianRational(top.re / norm, top.im / norm)

    def is_zero(self) -> bool:
        return self.re == 0 and self.im == 0

    def __complex__(self) -> complex:
        return complex(float(self.re), float(self.im))

    def __eq__(self, other: object) -> bool:
        if isinstance(other, (int, Fraction, complex, GaussianRational)):
            other = GaussianRational.coerce(other)
            return self.re == other.re and self.im == other.im
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.re, self.im))

    def format(self, latex: bool = False) -> str:
        real = _real_latex if latex else format_exact
        unit = "\\mathrm{i}" if latex else "i"
        if self.im == 0:
            return real(self.re)
        imag = unit if abs(self.im) == 1 else f"{real(abs(self.im))}{unit}"
        if self.re == 0:
            return f"-{imag}" if self.im < 0 else imag
        return f"({real(self.re)} {'-' if self.im < 0 else '+'} {imag})"

    def __str__(self) -> str:
        return self.format()

    def __repr__(self) -> str:
        return f"GaussianRational({self.re}, {self.im})"


I_UNIT = GaussianRational(0, 1)
GPoly = List[GaussianRational]


def _trim(poly: Sequence[GaussianRational]) -> GPoly:
    out = list(poly)
    while out and out[-1].is_zero():
        out.pop()
    return out


def _gpoly_eval(poly: Sequence[GaussianRational], t: Union[float, np.ndarray]) -> Union[complex, np.ndarray]:
    total = 0j * np.asarray(t, dtype=np.float64)
    for c in reversed(poly):
        total = total * t + complex(c)
    return total


def _real_latex(value: Fraction) -> str:
    return f"-{latex_exact(-value)}" if value < 0 else latex_exact(value)


def _poly_text(coeffs: Sequence[Any], var: str, fmt, latex: bool = False) -> str:
    """Highest power first; fmt formats one nonzero coefficient."""
    pieces = []
    for power in range(len(coeffs) - 1, -1, -1):
        c = coeffs[power]
        if c == 0:
            continue
        if power == 0:
            pieces.append(fmt(c))
            continue
        monomial = var if power == 1 else (f"{var}^{{{power}}}" if latex else f"{var}^{power}")
        text = fmt(c)
        if text == "1":
            pieces.append(monomial)
        elif text == "-1":
            pieces.append(f"-{monomial}")
        else:
            pieces.append(f"{text}{'' if latex else ' '}{monomial}")
    return " + ".join(pieces).replace("+ -", "- ") if pieces else "0"


class CharFnODE:
    """p(t) phi'(t) + q(t) phi(t) = 0 with exact Gaussian-rational coefficients."""

    def __init__(self, p: Sequence[Any], q: Sequence[Any]):
        self.p: GPoly = _trim(GaussianRational.coerce(c) for c in p)
        self.q: GPoly = _trim(GaussianRational.coerce(c) for c in q)
        if not self.p:
            raise AnalyticError("A characteristic-function ODE needs a nonzero phi' coefficient")

    def monic(self) -> "CharFnODE":
        lead = self.p[-1]
        return CharFnODE([c / lead for c in self.p], [c / lead for c in self.q])

    def residual(self, t: Union[float, np.ndarray], phi: Any, dphi: Any) -> Union[complex, np.ndarray]:
        return _gpoly_eval(self.p, t) * dphi + _gpoly_eval(self.q, t) * phi

    def to_text(self) -> str:
        p = _poly_text(self.p, "t", GaussianRational.format)
        q = _poly_text(self.q, "t", GaussianRational.format)
        return f"({p}) phi'(t) + ({q}) phi(t) = 0"

    def to_latex(self) -> str:
        p = _poly_text(self.p, "t", lambda c: c.format(latex=True), latex=True)
        q = _poly_text(self.q, "t", lambda c: c.format(latex=True), latex=True)
        return f"({p})\\phi'(t) + ({q})\\phi(t) = 0"

    def to_dict(self) -> Dict[str, Any]:
        return {
            "p": [[str(c.re), str(c.im)] for c in self.p],
            "q": [[str(c.re), str(c.im)] for c in self.q],
            "text": self.to_text(),
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, CharFnODE):
            return NotImplemented
        return self.p == other.p and self.q == other.q

    def __repr__(self) -> str:
        return f"CharFnODE({self.to_text()})"


def charfn_ode(form: Union[LinearSteinForm, OperatorPoly]) -> CharFnODE:
    """
    ODE for phi(t) = E e^(itZ) from a linear-coefficient operator.

    With f = e^(itx): f^(k) = (it)^k f and E[Z f^(k)(Z)] = (it)^k (-i) phi'(t), so
    p = -i sum a_k (it)^k and q = sum b_k (it)^k. The result is scaled to monic p.

    Args:
        form: LinearSteinForm, or an operator of degree <= 1

    Returns:
        CharFnODE: Monic ODE
    """
    if isinstance(form, OperatorPoly):
        form = to_linear_form(form)
    p: GPoly = []
    q: GPoly = []
    power = GaussianRational(1)
    for a, b in form.coeffs:
        p.append(-I_UNIT * power * a)
        q.append(power * b)
        power = power * I_UNIT
    if not _trim(p):
        raise AnalyticError("Operator has no x f^(k) term, so phi' does not appear")
    return CharFnODE(p, q).monic()


def charfn_closed(t: Union[float, np.ndarray], mu_x: float, mu_y: float) -> Union[complex, np.ndarray]:
    """
    phi(t) = (1 + t^2)^(-1/2) exp(-t (mu_x^2 t + mu_y^2 t - 2 i mu_x mu_y) / (2 (1 + t^2)))
    for the product of independent N(mu_x, 1) and N(mu_y, 1).
    """
    t = np.asarray(t, dtype=np.float64)
    mu_x, mu_y = float(mu_x), float(mu_y)
    one_t2 = 1.0 + t * t
    exponent = -t * ((mu_x ** 2 + mu_y ** 2) * t - 2j * mu_x * mu_y) / (2.0 * one_t2)
    value = np.exp(exponent) / np.sqrt(one_t2)
    return complex(value) if value.ndim == 0 else value


def charfn_modulus_sq(t: Union[float, np.ndarray], mu_x: float, mu_y: float) -> Union[float, np.ndarray]:
    """|phi(t)|^2 = exp(-t^2 (mu_x^2 + mu_y^2) / (1 + t^2)) / (1 + t^2)."""
    t = np.asarray(t, dtype=np.float64)
    one_t2 = 1.0 + t * t
    value = np.exp(-t * t * (float(mu_x) ** 2 + float(mu_y) ** 2) / one_t2) / one_t2
    return float(value) if value.ndim == 0 else value


def charfn_residuals(ode: CharFnODE, ts: Sequence[float], mu_x: float, mu_y: float,
                     h: float = 1e-3) -> List[Tuple[float, complex, float]]:
    """
    (t, phi(t), |residual|) of the closed form in an ODE, phi' by a five-point stencil.
    """
    rows = []
    for t in np.asarray(ts, dtype=np.float64):
        t = float(t)
        f = [charfn_closed(t + k * h, mu_x, mu_y) for k in (-2, -1, 1, 2)]
        dphi = (f[0] - 8.0 * f[1] + 8.0 * f[2] - f[3]) / (12.0 * h)
        phi = charfn_closed(t, mu_x, mu_y)
        rows.append((t, phi, abs(complex(ode.residual(t, phi, dphi)))))
    return rows


def mgf(s: float, mu_x: float, mu_y: float) -> float:
    """
    E e^(sZ) = (1 - s^2)^(-1/2) exp(s (c s + 2 m) / (2 (1 - s^2))),
    c = mu_x^2 + mu_y^2, m = mu_x mu_y; defined for |s| < 1.
    """
    s = float(s)
    if not abs(s) < 1:
        raise AnalyticError(f"The moment generating function needs |s| < 1, got {s}")
    mu_x, mu_y = float(mu_x), float(mu_y)
    one_s2 = 1.0 - s * s
    c = mu_x ** 2 + mu_y ** 2
    m = mu_x * mu_y
    if one_s2 < 1e-6:
        logger.warning(f"mgf evaluated near the boundary of its domain (s = {s})")
    return math.exp(s * (c * s + 2.0 * m) / (2.0 * one_s2)) / math.sqrt(one_s2)


def _prime(order: int, latex: bool) -> str:
    if order <= (2 if latex else 3):
        return "'" * order
    return f"^{{({order})}}" if latex else f"^({order})"


class DensityODE:
    """
    sum_a P_a(x) p^(a)(x) = 0; coeffs[a] is the dense coefficient list of P_a.
    """

    def __init__(self, coeffs: Sequence[Sequence[Any]]):
        rows = [[to_exact(c) for c in row] for row in coeffs]
        for row in rows:
            while row and row[-1] == 0:
                row.pop()
        while rows and not rows[-1]:
            rows.pop()
        if len(rows) < 2:
            raise AnalyticError("A density ODE needs order >= 1")
        self.coeffs: List[List[Fraction]] = rows

    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @classmethod
    def from_operator(cls, op: OperatorPoly) -> "DensityODE":
        """Read sum b_ij M^i D^j as coefficient polynomials of p^(j)."""
        if op.is_zero():
            raise AnalyticError("The zero operator defines no density ODE")
        rows = [[Fraction(0)] * (op.degree + 1) for _ in range(op.order + 1)]
        for (i, j), value in op.terms.items():
            rows[j][i] = value
        return cls(rows)

    def to_operator(self) -> OperatorPoly:
        return OperatorPoly({(i, j): c for j, row in enumerate(self.coeffs) for i, c in enumerate(row)})

    def normalized(self) -> "DensityODE":
        """Content removed, leading coefficient positive."""
        return DensityODE.from_operator(self.to_operator().primitive())

    def residual(self, x: float, derivatives: Sequence[float]) -> float:
        """sum_a P_a(x) p^(a)(x) given p^(a)(x) for a = 0..order."""
        if len(derivatives) <= self.order:
            raise AnalyticError(f"Need {self.order + 1} derivative values, got {len(derivatives)}")
        total = 0.0
        for row, value in zip(self.coeffs, derivatives):
            total += sum(float(c) * x ** i for i, c in enumerate(row)) * value
        return total

    def to_text(self, name: str = "p") -> str:
        pieces = []
        for a in range(self.order, -1, -1):
            if any(self.coeffs[a]):
                poly = _poly_text(self.coeffs[a], "x", format_exact)
                pieces.append(f"({poly}) {name}{_prime(a, latex=False)}(x)")
        return " + ".join(pieces) + " = 0"

    def to_latex(self, name: str = "p") -> str:
        pieces = []
        for a in range(self.order, -1, -1):
            if any(self.coeffs[a]):
                poly = _poly_text(self.coeffs[a], "x", _real_latex, latex=True)
                pieces.append(f"({poly}){name}{_prime(a, latex=True)}(x)")
        return " + ".join(pieces) + " = 0"

    def to_dict(self) -> Dict[str, Any]:
        return {"coeffs": [[str(c) for c in row] for row in self.coeffs], "text": self.to_text()}

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DensityODE):
            return NotImplemented
        return self.coeffs == other.coeffs

    def __repr__(self) -> str:
        return f"DensityODE({self.to_text()})"


def dual_density_ode(op: OperatorPoly) -> DensityODE:
    """
    Density ODE B p = 0 of a law with Stein operator A.

    A is rewritten as sum c_ab D^a M^b and B = sum (-1)^a c_ab M^b D^a.
    """
    dm = op.to_dm_form()
    terms: Dict[tuple, Fraction] = {}
    for (a, b), c in dm.items():
        terms[(b, a)] = terms.get((b, a), Fraction(0)) + (-1) ** a * c
    return DensityODE.from_operator(OperatorPoly(terms))


def dual_operator(ode: DensityODE) -> OperatorPoly:
    """
    Stein operator A = sum (-1)^a b_ab D^a M^b of a density solving
    sum b_ab M^b D^a p = 0.
    """
    dm = {(j, i): (-1) ** j * c for (i, j), c in ode.to_operator().terms.items()}
    return OperatorPoly.from_dm_form(dm)
