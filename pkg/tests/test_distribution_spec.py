from fractions import Fraction

import pytest

from models.distribution_spec import (Normal, ProductIndep, Scaled, ShiftedGamma, SumIID, VarianceGamma,
                                      from_dict, parse_distribution, parse_shorthand, to_json)
from utils.errors import DistributionError


class TestVariants:
    def test_parameters_become_exact(self):
        spec = Normal("1/2", 0.25)
        assert spec.mean == Fraction(1, 2)
        assert spec.variance == Fraction(1, 4)

    @pytest.mark.parametrize("build", [
        lambda: Normal(0, 0),
        lambda: ShiftedGamma(-1),
        lambda: VarianceGamma(2, 0, 0),
        lambda: VarianceGamma(0, 0, 1),
        lambda: SumIID(0, Normal(0, 1)),
        lambda: SumIID(True, Normal(0, 1)),
        lambda: Scaled(0, Normal(0, 1)),
    ])
    def test_domain_violations(self, build):
        with pytest.raises(DistributionError):
            build()

    def test_specs_are_hashable_values(self):
        assert Normal(1, 1) == Normal(Fraction(1), 1)
        assert len({ShiftedGamma(2), ShiftedGamma("2")}) == 1

    def test_describe(self):
        spec = ProductIndep(Normal(1, 1), Normal(2, 1))
        assert spec.describe() == "(N(1, 1)) x (N(2, 1))"


class TestShorthand:
    def test_product_of_normals(self):
        assert parse_shorthand("prodnormal:1,2") == ProductIndep(Normal(1, 1), Normal(2, 1))
        assert parse_shorthand("prodnormal:1,2,4,9") == ProductIndep(Normal(1, 4), Normal(2, 9))

    def test_combinators(self):
        assert parse_shorthand("sum3:prodnormal:0,0") == SumIID(3, ProductIndep(Normal(0, 1), Normal(0, 1)))
        assert parse_shorthand("scale1/2:normal:0,1") == Scaled(Fraction(1, 2), Normal(0, 1))

    def test_families(self):
        assert parse_shorthand("gamma:5/2,1") == ShiftedGamma(Fraction(5, 2), 1)
        assert parse_shorthand("vg:3,1/2,1") == VarianceGamma(3, Fraction(1, 2), 1)
        assert parse_shorthand("prodvg:2,0,1") == ProductIndep(VarianceGamma(2, 0, 1), VarianceGamma(2, 0, 1))

    @pytest.mark.parametrize("text", ["beta:1,2", "normal:1", "prodnormal:1,2,3", "sumx:normal:0,1", "normal:a,1"])
    def test_rejects(self, text):
        with pytest.raises(DistributionError):
            parse_shorthand(text)


class TestJson:
    def test_round_trip(self):
        spec = SumIID(2, ProductIndep(VarianceGamma(3, Fraction(1, 2), 1), VarianceGamma(3, Fraction(1, 2), 1)))
        assert parse_distribution(to_json(spec)) == spec

    def test_defaults(self):
        assert from_dict({"type": "gamma", "shape": "2"}) == ShiftedGamma(2, 0)

    @pytest.mark.parametrize("text", ['{"type": "normal", "mean": 0}', '{"mean": 0}', '{"type": "cauchy"}', "{bad"])
    def test_rejects(self, text):
        with pytest.raises(DistributionError):
            parse_distribution(text)
