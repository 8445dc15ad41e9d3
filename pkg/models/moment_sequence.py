"""
Lazily extended exact moment sequences.
"""
import logging
import math
import threading
from fractions import Fraction
from typing import Any, Callable, Dict, List, Sequence, Tuple

from utils.errors import MomentError

logger = logging.getLogger(__name__)


class MomentRule:
    """
    Generating rule of a moment sequence.

    Subclasses compute the next moment from the known prefix.
    """

    description = "moment rule"

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        """
        Compute known[len(known)].

        Args:
            known (Sequence[Fraction]): Moments 0..n-1

        Returns:
            Fraction: Moment n
        """
        raise NotImplementedError

    def describe(self) -> str:
        return self.description


class MomentSequence:
    """
    Exact moments mu_k = E Z^k, extended on demand through a rule.

    Extension mutates an internal cache guarded by a lock.
    """

    def __init__(self, rule: MomentRule, initial: Sequence[Any] = (1,), name: str = ""):
        """
        Initialize the sequence.

        Args:
            rule (MomentRule): Rule producing moment n from moments 0..n-1
            initial (Sequence): Known prefix; must start with 1
            name (str): Label used in logs and reports
        """
        known = [Fraction(v) for v in initial]
        if not known or known[0] != 1:
            raise MomentError("A moment sequence must start with mu_0 = 1")
        self._known: List[Fraction] = known
        self.rule = rule
        self.name = name or rule.describe()
        self.lock = threading.RLock()

    def extend_to(self, k: int):
        """Make sure moments 0..k are known."""
        with self.lock:
            while len(self._known) <= k:
                self._known.append(self.rule.next_moment(self._known))

    def get(self, k: int) -> Fraction:
        if k < 0:
            raise MomentError(f"Moment index must be nonnegative, got {k}")
        self.extend_to(k)
        return self._known[k]

    def __getitem__(self, k: int) -> Fraction:
        return self.get(k)

    def take(self, count: int) -> List[Fraction]:
        """Moments 0..count-1."""
        if count <= 0:
            return []
        self.extend_to(count - 1)
        with self.lock:
            return list(self._known[:count])

    @property
    def known(self) -> Tuple[Fraction, ...]:
        with self.lock:
            return tuple(self._known)

    def get_info(self) -> Dict[str, Any]:
        with self.lock:
            return {"name": self.name, "known": len(self._known), "rule": self.rule.describe()}

    def __repr__(self) -> str:
        return f"MomentSequence({self.name!r}, known={len(self._known)})"


class ClosedFormRule(MomentRule):
    """Moment n from a formula in n and the known prefix."""

    def __init__(self, formula: Callable[[int, Sequence[Fraction]], Fraction], description: str):
        self.formula = formula
        self.description = description

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        return Fraction(self.formula(len(known), known))


class ProductRule(MomentRule):
    """E (XY)^n = E X^n E Y^n for independent X, Y."""

    def __init__(self, left: MomentSequence, right: MomentSequence):
        self.left = left
        self.right = right
        self.description = f"product of [{left.name}] and [{right.name}]"

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        n = len(known)
        return self.left[n] * self.right[n]


class SumRule(MomentRule):
    """
    Moments of the sum of `count` iid copies.

    Partial sums S_t = S_(t-1) + Z_t are convolved level by level:
    E S_t^n = sum_j C(n, j) E S_(t-1)^j E Z^(n-j).
    """

    def __init__(self, base: MomentSequence, count: int):
        if count < 1:
            raise MomentError(f"Sum count must be positive, got {count}")
        self.base = base
        self.count = count
        self.levels: List[List[Fraction]] = [[Fraction(1)] for _ in range(count)]
        self.description = f"sum of {count} copies of [{base.name}]"

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        n = len(known)
        base = self.base.take(n + 1)
        self.levels[0] = base
        for t in range(1, self.count):
            level = self.levels[t]
            previous = self.levels[t - 1]
            while len(level) <= n:
                k = len(level)
                level.append(sum((math.comb(k, j) * previous[j] * base[k - j] for j in range(k + 1)),
                                 Fraction(0)))
        return self.levels[self.count - 1][n]


class ScaledRule(MomentRule):
    """E (cX)^n = c^n E X^n."""

    def __init__(self, base: MomentSequence, c: Fraction):
        self.base = base
        self.c = Fraction(c)
        self.description = f"{self.c} * [{base.name}]"

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        n = len(known)
        return self.c ** n * self.base[n]


class ShiftRule(MomentRule):
    """E (X + mu)^n by binomial expansion."""

    def __init__(self, base: MomentSequence, mu: Fraction):
        self.base = base
        self.mu = Fraction(mu)
        self.description = f"[{base.name}] + {self.mu}"

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        n = len(known)
        return sum((math.comb(n, j) * self.mu ** (n - j) * self.base[j] for j in range(n + 1)), Fraction(0))
