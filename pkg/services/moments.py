"""
Exact moment oracles, operator-driven moment recurrences and samplers.
"""
import logging
import math
from fractions import Fraction
from typing import Any, Iterator, List, Optional, Sequence, Tuple

import numpy as np

import config
from models.distribution_spec import (DistributionSpec, Normal, ProductIndep, Scaled,
                                      ShiftedGamma, SumIID, VarianceGamma)
from models.moment_sequence import (ClosedFormRule, MomentRule, MomentSequence, ProductRule,
                                    ScaledRule, ShiftRule, SumRule)
from models.opweyl import OperatorPoly, falling_factorial
from services.steinops import base_operator
from utils.errors import (DistributionError, InconsistentMomentsError, InsufficientMomentsError,
                          OperatorError, RecurrenceError)
from utils.formatting import to_exact

logger = logging.getLogger(__name__)


def normal_moments(mu: Any, sigma_sq: Any) -> MomentSequence:
    """
    Moments of N(mu, sigma_sq): m_k = mu m_(k-1) + (k-1) sigma_sq m_(k-2).
    """
    mu, sigma_sq = to_exact(mu), to_exact(sigma_sq)
    if sigma_sq <= 0:
        raise DistributionError(f"Normal variance must be positive, got {sigma_sq}")

    def formula(n: int, known: Sequence[Fraction]) -> Fraction:
        value = mu * known[n - 1]
        if n >= 2:
            value += (n - 1) * sigma_sq * known[n - 2]
        return value

    return MomentSequence(ClosedFormRule(formula, f"N({mu}, {sigma_sq})"))


def shifted_gamma_moments(r: Any, mu: Any = 0) -> MomentSequence:
    """
    Moments of G + mu, G ~ Gamma(r, 1): E G^j = r (r+1) ... (r+j-1).
    """
    r, mu = to_exact(r), to_exact(mu)
    if r <= 0:
        raise DistributionError(f"Gamma shape must be positive, got {r}")
    gamma = MomentSequence(ClosedFormRule(lambda n, known: known[n - 1] * (r + n - 1), f"Gamma({r})"))
    if mu == 0:
        return gamma
    return MomentSequence(ShiftRule(gamma, mu))


def vg_moments(r: Any, theta: Any, sigma: Any, mu: Any = 0) -> MomentSequence:
    """
    Moments of VG(r, theta, sigma, mu) from the recurrence of its own
    operator (centered law), shifted by mu when needed.
    """
    centered = VarianceGamma(r, theta, sigma, 0)
    seq = moment_recurrence_solve(base_operator(centered), [1])
    seq.name = centered.describe()
    mu = to_exact(mu)
    if mu == 0:
        return seq
    return MomentSequence(ShiftRule(seq, mu))


def product_moments(m_x: MomentSequence, m_y: MomentSequence) -> MomentSequence:
    return MomentSequence(ProductRule(m_x, m_y))


def sum_moments(m: MomentSequence, n: int) -> MomentSequence:
    return MomentSequence(SumRule(m, n))


def scaled_moments(m: MomentSequence, c: Any) -> MomentSequence:
    return MomentSequence(ScaledRule(m, to_exact(c)))


def moments_for(spec: DistributionSpec) -> MomentSequence:
    """
    Exact moment oracle for any distribution spec.

    Args:
        spec (DistributionSpec): Target law

    Returns:
        MomentSequence: Its moments
    """
    if isinstance(spec, Normal):
        return normal_moments(spec.mean, spec.variance)
    if isinstance(spec, ShiftedGamma):
        return shifted_gamma_moments(spec.shape, spec.shift)
    if isinstance(spec, VarianceGamma):
        return vg_moments(spec.r, spec.theta, spec.sigma, spec.mu)
    if isinstance(spec, ProductIndep):
        return product_moments(moments_for(spec.left), moments_for(spec.right))
    if isinstance(spec, SumIID):
        return sum_moments(moments_for(spec.base), spec.n)
    if isinstance(spec, Scaled):
        return scaled_moments(moments_for(spec.base), spec.c)
    raise DistributionError(f"Unsupported distribution spec {spec!r}")


def required_initial_count(op: OperatorPoly) -> int:
    """
    Number of initial moments the recurrence of op asks for:
    max(j - i) - min(j - i) - 1 over the band set, at least 1 (mu_0).
    """
    bands = op.band_set()
    return max(max(bands) - min(bands) - 1, 1)


class RecurrenceRule(MomentRule):
    """
    Forward substitution in sum_ij a_ij (k)_j mu_(k+i-j) = 0.

    The unknown at step k is mu_(k + dmax), dmax = max(i - j); its
    coefficient is the sum of a_ij (k)_j over the terms with i - j = dmax.
    """

    def __init__(self, op: OperatorPoly):
        if op.is_zero():
            raise OperatorError("The zero operator defines no moment recurrence")
        self.op = op
        self.terms: List[Tuple[int, int, Fraction]] = [(i, j, a) for (i, j), a in sorted(op.terms.items())]
        self.dmax = max(i - j for i, j, _ in self.terms)
        self.description = f"recurrence of {op.to_text()}"

    def residual(self, k: int, known: Sequence[Fraction]) -> Fraction:
        """sum_ij a_ij (k)_j mu_(k+i-j) over the known prefix."""
        total = Fraction(0)
        for i, j, a in self.terms:
            weight = falling_factorial(k, j)
            if weight:
                total += a * weight * known[k + i - j]
        return total

    def next_moment(self, known: Sequence[Fraction]) -> Fraction:
        t = len(known)
        k = t - self.dmax
        if k < 0:
            raise InsufficientMomentsError(t + 1, t)
        lead = Fraction(0)
        rest = Fraction(0)
        for i, j, a in self.terms:
            weight = falling_factorial(k, j)
            if not weight:
                continue
            if i - j == self.dmax:
                lead += a * weight
            else:
                rest += a * weight * known[k + i - j]
        if lead == 0:
            raise RecurrenceError(k, "leading coefficient of the moment recurrence vanishes")
        value = -rest / lead
        logger.debug(f"recurrence step k={k}: mu_{t} = {value}")
        return value


def moment_recurrence_solve(op: OperatorPoly, initial: Sequence[Any]) -> MomentSequence:
    """
    Moments determined by an operator and an initial segment.

    Args:
        op (OperatorPoly): Stein operator
        initial (Sequence): mu_0 = 1, mu_1, ...; surplus values are checked

    Returns:
        MomentSequence: Sequence extended by forward substitution
    """
    rule = RecurrenceRule(op)
    known = [to_exact(v) for v in initial]
    required = required_initial_count(op)
    if len(known) < required:
        raise InsufficientMomentsError(required, len(known))
    for k in range(0, len(known) - rule.dmax):
        residual = rule.residual(k, known)
        if residual != 0:
            raise InconsistentMomentsError(k, residual)
    return MomentSequence(rule, known)


class Sampler:
    """
    Seeded sampler for a distribution spec.

    Draws are produced in chunks of at most batch_size values; the stream is
    reproducible for a fixed (spec, seed, batch_size).
    """

    def __init__(self, spec: DistributionSpec, seed: Optional[int] = None, batch_size: Optional[int] = None):
        """
        Args:
            spec (DistributionSpec): Law to sample
            seed (int): 64-bit seed; defaults to config.STEIN_SEED
            batch_size (int): Chunk size; defaults to config.MC_BATCH_SIZE
        """
        self.spec = spec
        self.seed = config.STEIN_SEED if seed is None else int(seed)
        self.batch_size = max(1, batch_size or config.MC_BATCH_SIZE)

    def sample(self, n: int) -> Iterator[np.ndarray]:
        """
        Stream n iid draws.

        Args:
            n (int): Number of draws

        Yields:
            np.ndarray: Chunks of float64 draws
        """
        if n < 1:
            raise DistributionError(f"Sample size must be positive, got {n}")
        rng = np.random.default_rng(self.seed)
        remaining = n
        while remaining > 0:
            size = min(self.batch_size, remaining)
            yield _draw(self.spec, rng, size)
            remaining -= size

    def draw(self, n: int) -> np.ndarray:
        return np.concatenate(list(self.sample(n)))

    def get_info(self):
        return {"spec": self.spec.describe(), "seed": self.seed, "batch_size": self.batch_size}


def _draw(spec: DistributionSpec, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(spec, Normal):
        return rng.normal(float(spec.mean), math.sqrt(float(spec.variance)), size)
    if isinstance(spec, ShiftedGamma):
        return rng.gamma(float(spec.shape), 1.0, size) + float(spec.shift)
    if isinstance(spec, VarianceGamma):
        mixing = rng.gamma(float(spec.r) / 2.0, 2.0, size)
        noise = rng.standard_normal(size)
        return float(spec.mu) + float(spec.theta) * mixing + float(spec.sigma) * np.sqrt(mixing) * noise
    if isinstance(spec, ProductIndep):
        left = _draw(spec.left, rng, size)
        return left * _draw(spec.right, rng, size)
    if isinstance(spec, SumIID):
        total = np.zeros(size)
        for _ in range(spec.n):
            total += _draw(spec.base, rng, size)
        return total
    if isinstance(spec, Scaled):
        return float(spec.c) * _draw(spec.base, rng, size)
    raise DistributionError(f"Unsupported distribution spec {spec!r}")
