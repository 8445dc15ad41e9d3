"""
Exact polynomial differential operators.

Operators are elements of the algebra generated by M (multiplication by x)
and D (differentiation) subject to D M = M D + I. They are stored in the
canonical form sum a_ij M^i D^j with exact rational coefficients.
"""
import json
import logging
import math
from fractions import Fraction
from types import MappingProxyType
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Set, Tuple, Union

from utils.errors import OperatorError
from utils.formatting import latex_exact, to_exact

logger = logging.getLogger(__name__)

Scalar = Union[Fraction, int]
Monomial = Tuple[int, int]


class _Infinity:
    """Token for an infinite shift parameter (T_inf is read as I)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "INF"

    def __str__(self) -> str:
        return "inf"

    def __reduce__(self):
        return (_Infinity, ())


INF = _Infinity()
Param = Union[Fraction, _Infinity]


def parse_param(value: Any) -> Param:
    """Parse an exact parameter that may also be the token "inf"."""
    if value is INF:
        return INF
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity", "oo"):
        return INF
    return to_exact(value)


def shift_param(value: Param, k: int) -> Param:
    """Shift a parameter by an integer; infinity stays infinity."""
    if value is INF:
        return INF
    return value + k


def falling_factorial(k: int, j: int) -> int:
    """k (k-1) ... (k-j+1), zero when j > k."""
    if j > k:
        return 0
    return math.perm(k, j)


def _as_fraction(value: Scalar) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int) and not isinstance(value, bool):
        return Fraction(value)
    raise TypeError(f"Expected an exact scalar, got {type(value).__name__}")


class UPoly:
    """
    Univariate polynomial in U = MD with exact coefficients.

    coeffs[k] multiplies U^k; trailing zeros are trimmed.
    """

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Iterable[Scalar] = ()):
        values = [_as_fraction(c) for c in coeffs]
        while values and values[-1] == 0:
            values.pop()
        self._coeffs: Tuple[Fraction, ...] = tuple(values)

    @classmethod
    def constant(cls, c: Scalar) -> "UPoly":
        return cls([c])

    @classmethod
    def variable(cls) -> "UPoly":
        return cls([0, 1])

    @classmethod
    def t(cls, r: Param) -> "UPoly":
        """T_r = U + r; T_inf is the constant 1."""
        if r is INF:
            return cls([1])
        return cls([_as_fraction(r), 1])

    @property
    def coeffs(self) -> Tuple[Fraction, ...]:
        return self._coeffs

    @property
    def degree(self) -> int:
        """Degree; -1 for the zero polynomial."""
        return len(self._coeffs) - 1

    def is_zero(self) -> bool:
        return not self._coeffs

    def _coerce(self, other: Any) -> Optional["UPoly"]:
        """other as a UPoly, or None when it is neither a UPoly nor an exact scalar."""
        if isinstance(other, UPoly):
            return other
        if isinstance(other, Fraction) or (isinstance(other, int) and not isinstance(other, bool)):
            return UPoly.constant(other)
        return None

    def __add__(self, other: Any) -> "UPoly":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        size = max(len(self._coeffs), len(other._coeffs))
        a = list(self._coeffs) + [Fraction(0)] * (size - len(self._coeffs))
        b = list(other._coeffs) + [Fraction(0)] * (size - len(other._coeffs))
        return UPoly(x + y for x, y in zip(a, b))

    __radd__ = __add__

    def __neg__(self) -> "UPoly":
        return UPoly(-c for c in self._coeffs)

    def __sub__(self, other: Any) -> "UPoly":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other: Any) -> "UPoly":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return other - self

    def __mul__(self, other: Any) -> "UPoly":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        if self.is_zero() or other.is_zero():
            return UPoly()
        out = [Fraction(0)] * (len(self._coeffs) + len(other._coeffs) - 1)
        for i, a in enumerate(self._coeffs):
            if a == 0:
                continue
            for j, b in enumerate(other._coeffs):
                out[i + j] += a * b
        return UPoly(out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "UPoly":
        if n < 0:
            raise OperatorError("Negative powers of UPoly are not polynomials")
        result = UPoly.constant(1)
        for _ in range(n):
            result = result * self
        return result

    def shift(self, k: Scalar) -> "UPoly":
        """Return P(U + k) by Horner's scheme."""
        step = UPoly([_as_fraction(k), 1])
        result = UPoly()
        for c in reversed(self._coeffs):
            result = result * step + c
        return result

    def evaluate(self, u: Scalar) -> Fraction:
        total = Fraction(0)
        for c in reversed(self._coeffs):
            total = total * u + c
        return total

    def __eq__(self, other: object) -> bool:
        if isinstance(other, UPoly):
            return self._coeffs == other._coeffs
        if isinstance(other, (int, Fraction)):
            return self == UPoly.constant(other)
        return NotImplemented

    def __hash__(self) -> int:
        return hash(("UPoly", self._coeffs))

    def __repr__(self) -> str:
        return f"UPoly({[str(c) for c in self._coeffs]})"


def _mul_monomials(a: int, b: int, c: int, d: int) -> Iterable[Tuple[Monomial, int]]:
    """
    (M^a D^b)(M^c D^d) in canonical form.

    Leibniz: D^b M^c = sum_k C(b,k) c!/(c-k)! M^(c-k) D^(b-k).
    """
    for k in range(min(b, c) + 1):
        yield (a + c - k, b - k + d), math.comb(b, k) * math.perm(c, k)


class OperatorPoly:
    """
    Canonical-form operator sum a_ij M^i D^j.

    Instances are immutable; no zero coefficients are stored.
    """

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[Monomial, Scalar]] = None):
        clean: Dict[Monomial, Fraction] = {}
        for (i, j), coeff in (terms or {}).items():
            if i < 0 or j < 0:
                raise OperatorError(f"Negative exponent in monomial ({i}, {j})")
            value = _as_fraction(coeff)
            if value != 0:
                clean[(int(i), int(j))] = value
        self._terms = clean
        self._hash: Optional[int] = None

    # Constructors

    @classmethod
    def zero(cls) -> "OperatorPoly":
        return cls()

    @classmethod
    def constant(cls, c: Scalar) -> "OperatorPoly":
        return cls({(0, 0): c})

    @classmethod
    def monomial(cls, i: int, j: int, c: Scalar = 1) -> "OperatorPoly":
        return cls({(i, j): c})

    @classmethod
    def _from_clean(cls, terms: Dict[Monomial, Fraction]) -> "OperatorPoly":
        op = cls.__new__(cls)
        op._terms = {key: value for key, value in terms.items() if value != 0}
        op._hash = None
        return op

    # Properties

    @property
    def terms(self) -> Mapping[Monomial, Fraction]:
        return MappingProxyType(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coefficient(self, i: int, j: int) -> Fraction:
        return self._terms.get((i, j), Fraction(0))

    @property
    def order(self) -> int:
        """Highest power of D."""
        if self.is_zero():
            raise OperatorError("The zero operator has no order")
        return max(j for _, j in self._terms)

    @property
    def degree(self) -> int:
        """Highest power of M."""
        if self.is_zero():
            raise OperatorError("The zero operator has no degree")
        return max(i for i, _ in self._terms)

    # Ring operations

    def _coerce(self, other: Any) -> "OperatorPoly":
        if isinstance(other, OperatorPoly):
            return other
        if isinstance(other, UPoly):
            return from_upoly(other)
        return OperatorPoly.constant(_as_fraction(other))

    def __add__(self, other: Any) -> "OperatorPoly":
        other = self._coerce(other)
        out = dict(self._terms)
        for key, value in other._terms.items():
            out[key] = out.get(key, Fraction(0)) + value
        return OperatorPoly._from_clean(out)

    __radd__ = __add__

    def __neg__(self) -> "OperatorPoly":
        return OperatorPoly._from_clean({k: -v for k, v in self._terms.items()})

    def __sub__(self, other: Any) -> "OperatorPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "OperatorPoly":
        return self._coerce(other) - self

    def scale(self, c: Scalar) -> "OperatorPoly":
        c = _as_fraction(c)
        return OperatorPoly._from_clean({k: v * c for k, v in self._terms.items()})

    def __mul__(self, other: Any) -> "OperatorPoly":
        if not isinstance(other, (OperatorPoly, UPoly)):
            return self.scale(other)
        other = self._coerce(other)
        out: Dict[Monomial, Fraction] = {}
        for (a, b), x in self._terms.items():
            for (c, d), y in other._terms.items():
                xy = x * y
                for key, weight in _mul_monomials(a, b, c, d):
                    out[key] = out.get(key, Fraction(0)) + xy * weight
        return OperatorPoly._from_clean(out)

    def __rmul__(self, other: Any) -> "OperatorPoly":
        if isinstance(other, UPoly):
            return from_upoly(other) * self
        return self.scale(other)

    def __pow__(self, n: int) -> "OperatorPoly":
        if n < 0:
            raise OperatorError("Negative operator powers are undefined")
        result = OperatorPoly.constant(1)
        for _ in range(n):
            result = result * self
        return result

    # Structure

    def band_set(self) -> Set[int]:
        """{ j - i : a_ij != 0 }."""
        if self.is_zero():
            raise OperatorError("band_set is undefined for the zero operator")
        return {j - i for i, j in self._terms}

    def rescale(self, c: Scalar) -> "OperatorPoly":
        """
        Map a_ij to c^(j-i) a_ij.

        If A is a Stein operator for X, the result is one for cX.
        """
        c = _as_fraction(c)
        if c == 0:
            raise OperatorError("rescale requires a nonzero factor")
        return OperatorPoly._from_clean({(i, j): v * c ** (j - i) for (i, j), v in self._terms.items()})

    def to_dm_form(self) -> Dict[Monomial, Fraction]:
        """
        Coefficients c_ab of the same operator written as sum c_ab D^a M^b.

        Uses M^i D^j = sum_k (-1)^k k! C(i,k) C(j,k) D^(j-k) M^(i-k).
        """
        out: Dict[Monomial, Fraction] = {}
        for (i, j), value in self._terms.items():
            for k in range(min(i, j) + 1):
                weight = (-1) ** k * math.factorial(k) * math.comb(i, k) * math.comb(j, k)
                key = (j - k, i - k)
                out[key] = out.get(key, Fraction(0)) + value * weight
        return {key: value for key, value in out.items() if value != 0}

    @classmethod
    def from_dm_form(cls, terms: Mapping[Monomial, Scalar]) -> "OperatorPoly":
        """Canonicalize sum c_ab D^a M^b given as {(a, b): c_ab}."""
        out: Dict[Monomial, Fraction] = {}
        for (a, b), value in terms.items():
            value = _as_fraction(value)
            for key, weight in _mul_monomials(0, a, b, 0):
                out[key] = out.get(key, Fraction(0)) + value * weight
        return cls._from_clean(out)

    def adjoint(self) -> "OperatorPoly":
        """Formal adjoint: (M^i D^j)* = (-1)^j D^j M^i."""
        return OperatorPoly.from_dm_form({(j, i): (-1) ** j * v for (i, j), v in self._terms.items()})

    def primitive(self) -> "OperatorPoly":
        """Scalar multiple with coprime integer coefficients and positive leading term."""
        if self.is_zero():
            return self
        values = list(self._terms.values())
        num_gcd = 0
        den_lcm = 1
        for v in values:
            num_gcd = math.gcd(num_gcd, v.numerator)
            den_lcm = den_lcm * v.denominator // math.gcd(den_lcm, v.denominator)
        factor = Fraction(den_lcm, num_gcd)
        if self._terms[max(self._terms)] < 0:
            factor = -factor
        return self.scale(factor)

    # Action on polynomials

    def apply_to_monomial(self, k: int) -> List[Fraction]:
        """Dense coefficient list of the operator applied to x^k."""
        if k < 0:
            raise OperatorError("Monomial power must be nonnegative")
        out: Dict[int, Fraction] = {}
        for (i, j), value in self._terms.items():
            weight = falling_factorial(k, j)
            if weight:
                power = k - j + i
                out[power] = out.get(power, Fraction(0)) + value * weight
        return _dense(out)

    def apply(self, f: Sequence[Scalar]) -> List[Fraction]:
        """Apply the operator to a dense polynomial f (f[k] multiplies x^k)."""
        out: Dict[int, Fraction] = {}
        for k, fk in enumerate(f):
            fk = _as_fraction(fk)
            if fk == 0:
                continue
            for power, value in enumerate(self.apply_to_monomial(k)):
                if value:
                    out[power] = out.get(power, Fraction(0)) + fk * value
        return _dense(out)

    def float_terms(self) -> List[Tuple[int, int, float]]:
        """(i, j, a_ij) with float coefficients, sorted canonically."""
        return [(i, j, float(v)) for (i, j), v in sorted(self._terms.items())]

    # Output

    def _display_order(self) -> List[Tuple[Monomial, Fraction]]:
        return sorted(self._terms.items(), key=lambda item: (-item[0][1], -item[0][0]))

    def to_text(self) -> str:
        if self.is_zero():
            return "0"
        pieces: List[str] = []
        for n, ((i, j), value) in enumerate(self._display_order()):
            factors = []
            if i:
                factors.append("M" if i == 1 else f"M^{i}")
            if j:
                factors.append("D" if j == 1 else f"D^{j}")
            body = " ".join(factors)
            magnitude = abs(value)
            if not body:
                text = str(magnitude)
            elif magnitude == 1:
                text = body
            else:
                text = f"{magnitude} {body}"
            if n == 0:
                pieces.append(f"-{text}" if value < 0 else text)
            else:
                pieces.append(f" - {text}" if value < 0 else f" + {text}")
        return "".join(pieces)

    def to_latex(self) -> str:
        if self.is_zero():
            return "0"

        def power(symbol: str, n: int) -> str:
            if n == 1:
                return symbol
            return f"{symbol}^{n}" if n < 10 else f"{symbol}^{{{n}}}"

        pieces: List[str] = []
        for n, ((i, j), value) in enumerate(self._display_order()):
            body = (power("M", i) if i else "") + (power("D", j) if j else "")
            magnitude = abs(value)
            if not body:
                body = "I"
            text = body if magnitude == 1 else f"{latex_exact(magnitude)}{body}"
            if n == 0:
                pieces.append(f"-{text}" if value < 0 else text)
            else:
                pieces.append(f" - {text}" if value < 0 else f" + {text}")
        return "".join(pieces)

    def to_dict(self) -> Dict[str, Any]:
        return {"terms": [{"m": i, "d": j, "coeff": str(v)} for (i, j), v in sorted(self._terms.items())]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), separators=(",", ":"))

    @classmethod
    def from_json(cls, data: Union[str, Mapping[str, Any]]) -> "OperatorPoly":
        """Parse the {"terms":[{"m":..,"d":..,"coeff":"p/q"}]} schema."""
        if isinstance(data, str):
            try:
                data = json.loads(data)
            except json.JSONDecodeError as e:
                raise OperatorError(f"Invalid operator JSON: {e}")
        if not isinstance(data, Mapping) or not isinstance(data.get("terms"), list):
            raise OperatorError("Operator JSON needs a 'terms' list")
        out: Dict[Monomial, Fraction] = {}
        for term in data["terms"]:
            try:
                key = (int(term["m"]), int(term["d"]))
                value = to_exact(term["coeff"])
            except (KeyError, TypeError, ValueError) as e:
                raise OperatorError(f"Malformed operator term {term!r}: {e}")
            out[key] = out.get(key, Fraction(0)) + value
        return cls(out)

    # Comparison

    def __eq__(self, other: object) -> bool:
        if isinstance(other, OperatorPoly):
            return self._terms == other._terms
        if isinstance(other, (int, Fraction)):
            return self == OperatorPoly.constant(other)
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def __repr__(self) -> str:
        return f"OperatorPoly({self.to_text()})"


def _dense(sparse: Mapping[int, Fraction]) -> List[Fraction]:
    if not sparse:
        return []
    out = [Fraction(0)] * (max(sparse) + 1)
    for power, value in sparse.items():
        out[power] += value
    while out and out[-1] == 0:
        out.pop()
    return out


M = OperatorPoly.monomial(1, 0)
D = OperatorPoly.monomial(0, 1)
I = OperatorPoly.constant(1)
U = OperatorPoly.monomial(1, 1)


def normalize(raw: Sequence[Union[str, Scalar, OperatorPoly]]) -> OperatorPoly:
    """
    Canonical form of a product of symbolic factors.

    Args:
        raw: Factors applied left to right in composition order; each is
            "M", "D", "I", an exact scalar or an OperatorPoly

    Returns:
        OperatorPoly: The composition in M-left/D-right form
    """
    symbols = {"M": M, "D": D, "I": I}
    result = I
    for factor in raw:
        if isinstance(factor, str):
            if factor not in symbols:
                raise OperatorError(f"Unknown operator symbol {factor!r}")
            factor = symbols[factor]
        result = result * factor
    return result


def add(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    return a + b


def scale(a: OperatorPoly, c: Scalar) -> OperatorPoly:
    return a.scale(c)


def mul(a: OperatorPoly, b: OperatorPoly) -> OperatorPoly:
    """Composition a after b, in canonical form."""
    return a * b


def from_upoly(p: UPoly) -> OperatorPoly:
    """Substitute U = MD."""
    result = OperatorPoly.zero()
    power = I
    for c in p.coeffs:
        if c != 0:
            result = result + power.scale(c)
        power = power * U
    return result


def t_operator(r: Param) -> OperatorPoly:
    """T_r = MD + rI, with T_inf read as I."""
    return from_upoly(UPoly.t(r))


def shift(p: UPoly, k: Scalar) -> UPoly:
    return p.shift(k)


def apply_to_monomial(a: OperatorPoly, k: int) -> List[Fraction]:
    return a.apply_to_monomial(k)


def apply(a: OperatorPoly, f: Sequence[Scalar]) -> List[Fraction]:
    return a.apply(f)


def band_set(a: OperatorPoly) -> Set[int]:
    return a.band_set()


def rescale(a: OperatorPoly, c: Scalar) -> OperatorPoly:
    return a.rescale(c)


def proportional(a: OperatorPoly, b: OperatorPoly) -> Optional[Fraction]:
    """
    Return c with a = c * b, or None if no such scalar exists.

    Two zero operators are proportional with factor 1.
    """
    if b.is_zero():
        return Fraction(1) if a.is_zero() else None
    if a.is_zero():
        return Fraction(0)
    if set(a.terms) != set(b.terms):
        return None
    key = next(iter(b.terms))
    ratio = a.terms[key] / b.terms[key]
    for monomial, value in b.terms.items():
        if a.terms[monomial] != ratio * value:
            return None
    return ratio


def to_text(a: OperatorPoly) -> str:
    return a.to_text()


def to_latex(a: OperatorPoly) -> str:
    return a.to_latex()


def to_json(a: OperatorPoly) -> str:
    return a.to_json()


def from_json(data: Union[str, Mapping[str, Any]]) -> OperatorPoly:
    return OperatorPoly.from_json(data)
