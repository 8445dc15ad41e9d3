import math
from fractions import Fraction

import numpy as np
import pytest

from models.distribution_spec import Normal, ProductIndep, Scaled, ShiftedGamma, SumIID, VarianceGamma
from models.moment_sequence import ClosedFormRule, MomentSequence
from models.opweyl import D, I, M
from services import moments
from services.steinops import base_operator, equal_means_operator, product_normals
from utils.errors import (DistributionError, InconsistentMomentsError, InsufficientMomentsError, MomentError,
                          OperatorError, RecurrenceError)


class TestOracles:
    def test_standard_normal(self):
        assert moments.normal_moments(0, 1).take(7) == [1, 0, 1, 0, 3, 0, 15]

    def test_shifted_normals(self):
        assert moments.normal_moments(1, 1).take(9) == [1, 1, 2, 4, 10, 26, 76, 232, 764]
        assert moments.normal_moments(2, 1).take(9) == [1, 2, 5, 14, 43, 142, 499, 1850, 7193]

    def test_gamma(self):
        r = Fraction(5, 2)
        m = moments.shifted_gamma_moments(r)
        assert m.take(3) == [1, r, r * (r + 1)]
        shifted = moments.shifted_gamma_moments(r, 1)
        assert shifted[1] == r + 1
        assert shifted[2] == r * (r + 1) + 2 * r + 1

    def test_variance_gamma(self):
        assert moments.vg_moments(3, 0, 1)[2] == 3
        assert moments.vg_moments(2, 0, 1)[4] == 24
        assert moments.vg_moments(3, Fraction(1, 2), 1)[1] == Fraction(3, 2)
        assert moments.vg_moments(3, Fraction(1, 2), 1, 2)[1] == Fraction(7, 2)

    def test_variance_gamma_is_sum_of_normal_products(self):
        # VG(r, 0, 1, 0) is the law of a sum of r products of independent standard normals
        base = moments.product_moments(moments.normal_moments(0, 1), moments.normal_moments(0, 1))
        for r in (1, 2, 3):
            assert moments.vg_moments(r, 0, 1).take(12) == moments.sum_moments(base, r).take(12)

    def test_products(self, product_moments_n11_sq, product_moments_n11_n21):
        assert product_moments_n11_sq.take(7) == [1, 1, 4, 16, 100, 676, 5776]
        assert product_moments_n11_n21.take(9) == [1, 2, 10, 56, 430, 3692, 37924, 429200, 5495452]

    def test_product_with_point_mass(self):
        one = MomentSequence(ClosedFormRule(lambda n, known: Fraction(1), "point mass at 1"))
        m = moments.product_moments(moments.normal_moments(1, 1), one)
        assert m.take(6) == moments.normal_moments(1, 1).take(6)

    def test_sums(self, product_moments_n11_sq):
        base = moments.normal_moments(0, 1)
        assert moments.sum_moments(base, 1).take(8) == base.take(8)
        doubled = moments.sum_moments(base, 2)
        assert doubled[2] == 2
        assert doubled[4] == 12
        tripled = moments.sum_moments(product_moments_n11_sq, 3)
        assert tripled.take(3) == [1, 3, 18]

    def test_scaled(self):
        m = moments.scaled_moments(moments.normal_moments(1, 1), Fraction(1, 2))
        assert m.take(4) == [1, Fraction(1, 2), Fraction(1, 2), Fraction(1, 2)]

    def test_moments_for(self):
        spec = Scaled(2, SumIID(2, ProductIndep(Normal(1, 1), Normal(1, 1))))
        m = moments.moments_for(spec)
        assert m[1] == 4
        assert m[2] == 4 * (2 * 4 + 2 * 1)

    def test_invalid_parameters(self):
        with pytest.raises(DistributionError):
            moments.normal_moments(0, 0)
        with pytest.raises(DistributionError):
            moments.shifted_gamma_moments(0)

    def test_sequence_must_start_with_one(self):
        with pytest.raises(MomentError):
            MomentSequence(ClosedFormRule(lambda n, known: Fraction(0), "zero"), [2])

    def test_negative_index(self):
        with pytest.raises(MomentError):
            moments.normal_moments(0, 1).get(-1)


class TestRecurrence:
    def test_required_counts(self):
        assert moments.required_initial_count(D - M) == 1
        assert moments.required_initial_count(equal_means_operator(1)) == 2
        assert moments.required_initial_count(product_normals(1, 2, 1, 1)) == 3
        assert moments.required_initial_count(base_operator(VarianceGamma(2, 1, 1, 1))) == 2

    def test_standard_normal(self):
        m = moments.moment_recurrence_solve(D - M, [1])
        assert m.take(7) == [1, 0, 1, 0, 3, 0, 15]

    def test_equal_means_product(self):
        m = moments.moment_recurrence_solve(equal_means_operator(1), [1, 1, 4])
        assert m.take(7) == [1, 1, 4, 16, 100, 676, 5776]

    @pytest.mark.parametrize("mu", [0, 1, 2, Fraction(3, 2)])
    def test_equal_means_product_to_forty(self, mu):
        oracle = moments.product_moments(moments.normal_moments(mu, 1), moments.normal_moments(mu, 1))
        m = moments.moment_recurrence_solve(equal_means_operator(Fraction(mu) ** 2), oracle.take(3))
        assert m.take(41) == oracle.take(41)

    def test_unequal_means_product(self, product_moments_n11_n21):
        m = moments.moment_recurrence_solve(product_normals(1, 2, 1, 1), [1, 2, 10, 56])
        assert m.take(15) == product_moments_n11_n21.take(15)

    @pytest.mark.parametrize("spec", [
        Normal(1, 2),
        ShiftedGamma(Fraction(5, 2), 1),
        VarianceGamma(3, Fraction(1, 2), 1),
        VarianceGamma(2, 1, 2, 1),
    ])
    def test_reproduces_oracles(self, spec):
        oracle = moments.moments_for(spec)
        op = base_operator(spec)
        prefix = oracle.take(moments.required_initial_count(op))
        assert moments.moment_recurrence_solve(op, prefix).take(41) == oracle.take(41)

    def test_insufficient_initial_moments(self):
        with pytest.raises(InsufficientMomentsError) as info:
            moments.moment_recurrence_solve(product_normals(1, 2, 1, 1), [1, 2])
        assert info.value.required == 3

    def test_inconsistent_surplus(self):
        with pytest.raises(InconsistentMomentsError):
            moments.moment_recurrence_solve(D - M, [1, 0, 2])

    def test_vanishing_leading_coefficient(self):
        op = (M - (M * D + 1) ** 2) * (M * D)
        m = moments.moment_recurrence_solve(op, [1])
        with pytest.raises(RecurrenceError) as info:
            m.take(2)
        assert info.value.k == 0
        assert moments.moment_recurrence_solve(op, [1, 1]).take(4) == [1, 1, 4, 36]

    def test_zero_operator(self):
        with pytest.raises(OperatorError):
            moments.RecurrenceRule(I - I)


class TestSampler:
    def test_reproducible(self):
        spec = ProductIndep(VarianceGamma(3, Fraction(1, 2), 1), Normal(0, 1))
        a = moments.Sampler(spec, seed=7, batch_size=1000).draw(2500)
        b = moments.Sampler(spec, seed=7, batch_size=1000).draw(2500)
        assert a.shape == (2500,)
        np.testing.assert_array_equal(a, b)

    def test_chunking(self):
        chunks = list(moments.Sampler(Normal(0, 1), seed=1, batch_size=400).sample(1000))
        assert [c.size for c in chunks] == [400, 400, 200]

    def test_bad_size(self):
        with pytest.raises(DistributionError):
            list(moments.Sampler(Normal(0, 1)).sample(0))

    def test_default_seed(self):
        assert moments.Sampler(Normal(0, 1)).seed == 20190614

    @pytest.mark.slow
    @pytest.mark.parametrize("spec", [
        Normal(0, 1),
        ProductIndep(Normal(1, 1), Normal(1, 1)),
        SumIID(3, ProductIndep(Normal(0, 1), Normal(0, 1))),
        VarianceGamma(3, Fraction(1, 2), 1),
        VarianceGamma(2, -1, 2, 1),
        ShiftedGamma(Fraction(5, 2), 1),
    ])
    def test_sample_moments_match_oracle(self, spec):
        n = 1_000_000
        x = moments.Sampler(spec, seed=11).draw(n)
        oracle = moments.moments_for(spec)
        for k in (1, 2):
            sample = x ** k
            se = sample.std() / math.sqrt(n)
            assert abs(sample.mean() - float(oracle[k])) < 5 * se
