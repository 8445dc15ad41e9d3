"""
Checks that an operator annihilates a target law.

exact_check pairs A x^k with exact moments; mc_check estimates E[(A f)(Z)]
over a bank of decaying test functions from a seeded sample stream.
"""
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

import config
from models.gaussian_function import GaussianFunction, default_bank
from models.moment_sequence import ClosedFormRule, MomentSequence
from models.opweyl import OperatorPoly
from optimization.acceleration import OperatorEvaluator
from optimization.batching import BatchProcessor
from services.moments import Sampler, normal_moments, product_moments
from services.steinops import product_normals
from utils.formatting import to_exact

logger = logging.getLogger(__name__)


@dataclass
class ExactReport:
    """Residuals E[A x^k] for k = 0..max_k."""

    max_k: int
    residuals: List[Fraction]
    target: str = ""

    @property
    def passed(self) -> bool:
        return all(r == 0 for r in self.residuals)

    @property
    def first_failure(self) -> Optional[int]:
        return next((k for k, r in enumerate(self.residuals) if r != 0), None)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "exact",
            "target": self.target,
            "max_k": self.max_k,
            "pass": self.passed,
            "first_failure": self.first_failure,
            "residuals": [str(r) for r in self.residuals],
        }


def exact_check(op: OperatorPoly, m: MomentSequence, max_k: Optional[int] = None) -> ExactReport:
    """
    Exact residuals of op against a moment oracle.

    Args:
        op (OperatorPoly): Candidate operator
        m (MomentSequence): Target moments
        max_k (int): Highest monomial power (default config.EXACT_MAX_K)

    Returns:
        ExactReport: residual_k = sum_p [A x^k]_p mu_p
    """
    if max_k is None:
        max_k = config.EXACT_MAX_K
    residuals = []
    for k in range(max_k + 1):
        image = op.apply_to_monomial(k)
        residuals.append(sum((c * m[p] for p, c in enumerate(image) if c), Fraction(0)))
    report = ExactReport(max_k, residuals, m.name)
    logger.info(f"exact check against {m.name} up to k={max_k}: {'pass' if report.passed else 'fail'}")
    return report


class RunningMoments:
    """Streaming mean and variance, merged chunk by chunk (Chan et al.)."""

    def __init__(self):
        self.count = 0
        self.mean = 0.0
        self.m2 = 0.0

    def update(self, values: np.ndarray):
        n_b = values.size
        if n_b == 0:
            return
        mean_b = float(np.mean(values))
        m2_b = float(np.sum((values - mean_b) ** 2))
        n_a = self.count
        total = n_a + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / total
        self.m2 += m2_b + delta * delta * n_a * n_b / total
        self.count = total

    @property
    def variance(self) -> float:
        return self.m2 / (self.count - 1) if self.count > 1 else 0.0

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.count) if self.count else 0.0


@dataclass
class MCResult:
    name: str
    estimate: float
    std_error: float
    z: float

    def to_dict(self) -> Dict[str, Any]:
        return {"function": self.name, "estimate": self.estimate, "std_error": self.std_error, "z": self.z}


@dataclass
class MCReport:
    """Per-function estimates of E[(A f)(Z)]."""

    n: int
    seed: int
    z_threshold: float
    results: List[MCResult] = field(default_factory=list)
    target: str = ""

    def flagged(self) -> List[MCResult]:
        return [r for r in self.results if abs(r.z) > self.z_threshold]

    @property
    def passed(self) -> bool:
        return not self.flagged()

    @property
    def max_abs_z(self) -> float:
        return max((abs(r.z) for r in self.results), default=0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": "monte_carlo",
            "target": self.target,
            "n": self.n,
            "seed": self.seed,
            "z_threshold": self.z_threshold,
            "pass": self.passed,
            "results": [r.to_dict() for r in self.results],
        }


def mc_check(op: OperatorPoly, sampler: Sampler, bank: Optional[Sequence[GaussianFunction]] = None,
             n: Optional[int] = None, z_threshold: Optional[float] = None,
             max_workers: Optional[int] = None) -> MCReport:
    """
    Monte Carlo estimate of E[(A f)(Z)] for every f in the bank.

    Args:
        op (OperatorPoly): Candidate operator
        sampler (Sampler): Seeded sampler of Z
        bank (Sequence[GaussianFunction]): Test functions (default_bank() if None)
        n (int): Sample count (default config.MC_SAMPLES)
        z_threshold (float): |z| above which a function is flagged (default config.MC_Z_THRESHOLD)
        max_workers (int): Threads across bank functions

    Returns:
        MCReport: Estimates, standard errors and z-scores
    """
    bank = list(bank) if bank is not None else default_bank()
    n = n or config.MC_SAMPLES
    z_threshold = config.MC_Z_THRESHOLD if z_threshold is None else z_threshold
    evaluator = OperatorEvaluator(op)
    accumulators = [RunningMoments() for _ in bank]
    with BatchProcessor(max_workers=max_workers, batch_size=1) as processor:
        for chunk in sampler.sample(n):
            def job(index: int, chunk=chunk):
                accumulators[index].update(evaluator.evaluate(bank[index], chunk))
            processor.run(job, range(len(bank)))

    results = []
    for fn, acc in zip(bank, accumulators):
        se = acc.std_error
        if se > 0:
            z = acc.mean / se
        else:
            z = 0.0 if acc.mean == 0 else math.copysign(math.inf, acc.mean)
        results.append(MCResult(fn.name, acc.mean, se, z))
        if abs(z) > z_threshold:
            logger.warning(f"{fn.name}: E[(A f)(Z)] = {acc.mean:.3e} +- {se:.1e} (z = {z:.2f})")
        else:
            logger.debug(f"{fn.name}: z = {z:.2f}")

    report = MCReport(n, sampler.seed, z_threshold, results, sampler.spec.describe())
    logger.info(f"mc check on {report.target} with n={n} ({evaluator.get_device_info()}): "
                f"max |z| = {report.max_abs_z:.2f}")
    return report


def characterization_demo(mu_x: Any, mu_y: Any, max_k: Optional[int] = None) -> Tuple[ExactReport, ExactReport]:
    """
    Run the unequal-means product operator against the true moments of
    N(mu_x, 1) x N(mu_y, 1) and against a sequence that agrees on mu_0..mu_3
    but has mu_4 raised by one.

    Returns:
        Tuple[ExactReport, ExactReport]: (true moments, perturbed moments)
    """
    mu_x, mu_y = to_exact(mu_x), to_exact(mu_y)
    op = product_normals(mu_x, mu_y, 1, 1)
    true_moments = product_moments(normal_moments(mu_x, 1), normal_moments(mu_y, 1))
    true_moments.name = f"N({mu_x}, 1) x N({mu_y}, 1)"
    perturbed = MomentSequence(ClosedFormRule(lambda n, known: true_moments[n] + (1 if n == 4 else 0),
                                              f"{true_moments.name} with mu_4 + 1"))
    return exact_check(op, true_moments, max_k), exact_check(op, perturbed, max_k)


def report_to_json(report: Any) -> str:
    return json.dumps(report.to_dict(), indent=2)
