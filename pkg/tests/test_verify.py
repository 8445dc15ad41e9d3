import json
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction

import numpy as np
import pytest

from models.distribution_spec import Normal, ProductIndep, SumIID, VarianceGamma
from models.gaussian_function import GaussianFunction
from models.opweyl import D, M
from services import verify
from services.moments import Sampler, normal_moments
from services.steinops import equal_means_operator, operator_for, product_normals


class TestExactCheck:
    def test_normal(self):
        report = verify.exact_check(D - M, normal_moments(0, 1), 20)
        assert report.passed
        assert len(report.residuals) == 21
        assert report.first_failure is None

    def test_equal_means_product(self, product_moments_n11_sq):
        assert verify.exact_check(equal_means_operator(1), product_moments_n11_sq, 30).passed

    def test_unequal_means_product(self, product_moments_n11_n21):
        assert verify.exact_check(product_normals(1, 2, 1, 1), product_moments_n11_n21, 30).passed

    def test_wrong_target(self):
        report = verify.exact_check(D - M, normal_moments(1, 1), 5)
        assert not report.passed
        assert report.first_failure == 0
        assert report.residuals[0] == -1

    def test_linear_in_the_operator(self):
        m = normal_moments(1, 1)
        a, b = D - M, M * D ** 2 + D.scale(3)
        combined = verify.exact_check(a + b, m, 10).residuals
        separate = [x + y for x, y in zip(verify.exact_check(a, m, 10).residuals,
                                          verify.exact_check(b, m, 10).residuals)]
        assert combined == separate

    def test_default_bound(self, monkeypatch):
        monkeypatch.setattr("config.EXACT_MAX_K", 7)
        assert verify.exact_check(D - M, normal_moments(0, 1)).max_k == 7

    def test_report_json(self):
        report = verify.exact_check(D - M, normal_moments(1, 1), 2)
        payload = json.loads(verify.report_to_json(report))
        assert payload["pass"] is False
        assert payload["residuals"][0] == "-1"
        assert payload["kind"] == "exact"


class TestCharacterizationDemo:
    @pytest.mark.parametrize("mu_x,mu_y", [(1, 2), (0, 0), (Fraction(1, 2), -1)])
    def test_true_moments_pass_and_perturbed_fail(self, mu_x, mu_y):
        true_report, perturbed = verify.characterization_demo(mu_x, mu_y, 12)
        assert true_report.passed
        assert not perturbed.passed
        assert perturbed.first_failure <= 4

    def test_perturbation_residual(self):
        _, perturbed = verify.characterization_demo(1, 2, 8)
        assert perturbed.first_failure == 3
        assert perturbed.residuals[3] == 1


class TestRunningMoments:
    def test_matches_numpy(self):
        rng = np.random.default_rng(3)
        values = rng.normal(2.0, 3.0, 10_000)
        acc = verify.RunningMoments()
        for chunk in np.array_split(values, 7):
            acc.update(chunk)
        assert acc.count == values.size
        assert acc.mean == pytest.approx(values.mean(), rel=1e-12)
        assert acc.variance == pytest.approx(values.var(ddof=1), rel=1e-10)
        assert acc.std_error == pytest.approx(values.std(ddof=1) / np.sqrt(values.size), rel=1e-10)

    def test_empty(self):
        acc = verify.RunningMoments()
        acc.update(np.array([]))
        assert acc.count == 0
        assert acc.std_error == 0.0


class TestMonteCarlo:
    def test_small_run_structure(self):
        sampler = Sampler(Normal(0, 1), seed=5, batch_size=3000)
        report = verify.mc_check(D - M, sampler, n=10_000)
        assert report.n == 10_000
        assert report.seed == 5
        assert len(report.results) == 9
        assert report.results[0].name == "x^0 exp(-x^2/2)"
        assert all(r.std_error > 0 for r in report.results)
        assert json.loads(verify.report_to_json(report))["kind"] == "monte_carlo"

    def test_custom_bank_and_threads(self):
        bank = [GaussianFunction([1], name="gauss"), GaussianFunction([0, 1], name="x gauss")]
        sampler = Sampler(Normal(0, 1), seed=5, batch_size=2500)
        serial = verify.mc_check(D - M, sampler, bank=bank, n=10_000, max_workers=1)
        threaded = verify.mc_check(D - M, sampler, bank=bank, n=10_000, max_workers=2)
        assert [r.estimate for r in serial.results] == [r.estimate for r in threaded.results]

    def test_one_pool_per_run(self, monkeypatch):
        created = []

        class CountingExecutor(ThreadPoolExecutor):
            def __init__(self, *args, **kwargs):
                created.append(self)
                super().__init__(*args, **kwargs)

        monkeypatch.setattr("optimization.batching.ThreadPoolExecutor", CountingExecutor)
        sampler = Sampler(Normal(0, 1), seed=5, batch_size=1000)
        report = verify.mc_check(D - M, sampler, n=5000, max_workers=3)
        assert len(report.results) == 9
        assert len(created) == 1
        assert created[0]._shutdown

    @pytest.mark.slow
    def test_standard_normal_passes(self):
        report = verify.mc_check(D - M, Sampler(Normal(0, 1), seed=2019), n=1_000_000)
        assert report.passed
        assert report.max_abs_z <= 4.0

    @pytest.mark.slow
    def test_shifted_normal_is_flagged(self):
        report = verify.mc_check(D - M, Sampler(Normal(1, 1), seed=2019), n=1_000_000)
        assert not report.passed
        assert "x^0 exp(-x^2/2)" in {r.name for r in report.flagged()}

    @pytest.mark.slow
    @pytest.mark.parametrize("spec", [
        ProductIndep(VarianceGamma(3, Fraction(1, 2), 1), VarianceGamma(3, Fraction(1, 2), 1)),
        ProductIndep(VarianceGamma(2, 0, 1), VarianceGamma(2, 0, 1)),
        SumIID(2, ProductIndep(Normal(1, 1), Normal(2, 1))),
    ])
    def test_product_operators_pass(self, spec):
        report = verify.mc_check(operator_for(spec), Sampler(spec, seed=2019), n=1_000_000, z_threshold=4.0)
        assert report.passed, [r.to_dict() for r in report.flagged()]
