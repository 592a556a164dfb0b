"""Monte Carlo harness: reproducibility, aggregation, and design wiring."""

import json
import math

import numpy as np
import pytest

from ineqtest import (
    FullVectorDesign,
    IntervalRegressionDesign,
    compute_metrics,
    correlation_preset,
    simulate_fullvector,
    simulate_interval_regression,
)
from ineqtest.montecarlo import PointResult, _rate_and_se


class TestCorrelationPresets:
    def test_identity(self):
        np.testing.assert_array_equal(correlation_preset("identity", 3), np.eye(3))

    def test_equicorrelated(self):
        omega = correlation_preset("equicorrelated", 4, rho=0.5)
        assert omega[0, 1] == 0.5 and omega[2, 2] == 1.0
        with pytest.raises(ValueError):
            correlation_preset("equicorrelated", 4, rho=-0.5)

    def test_toeplitz(self):
        omega = correlation_preset("toeplitz", 3, rho=0.4)
        assert omega[0, 2] == pytest.approx(0.16)

    def test_unknown_name(self):
        with pytest.raises(ValueError):
            correlation_preset("negpos", 3)


class TestDesignValidation:
    def test_null_points_must_be_nonnegative(self):
        with pytest.raises(ValueError, match="mu >= 0"):
            FullVectorDesign(p=2, omega=np.eye(2), mu_null=((-0.1, 0.0),))

    def test_unit_diagonal_required(self):
        with pytest.raises(ValueError):
            FullVectorDesign(p=2, omega=2 * np.eye(2), mu_null=((0.0, 0.0),))


class TestSimulateFullVector:
    def test_bit_reproducible(self):
        design = FullVectorDesign(p=3, omega=np.eye(3),
                                  mu_null=((0.0, 0.0, 0.0),),
                                  mu_alt=((-0.4, 0.1, 0.1),),
                                  n=50, replications=300, seed=7)
        a = simulate_fullvector(design, "rcc")
        b = simulate_fullvector(design, "rcc")
        assert json.dumps(a.summary(), default=float) == json.dumps(b.summary(), default=float)
        for pa, pb in zip(a.points, b.points):
            np.testing.assert_array_equal(pa.statistics, pb.statistics)
            np.testing.assert_array_equal(pa.rejects, pb.rejects)

    def test_estimated_variance_path(self):
        design = FullVectorDesign(p=2, omega=np.eye(2), mu_null=((0.0, 0.0),),
                                  n=40, replications=200, seed=4)
        report = simulate_fullvector(design, "rcc", known_variance=False)
        assert 0.0 <= report.points[0].rejection_rate <= 0.2

    def test_per_replication_sandwich(self):
        design = FullVectorDesign(p=2, omega=np.eye(2), mu_null=((0.0, 0.0),),
                                  mu_alt=((-0.3, 0.0),), n=80,
                                  replications=2000, seed=13)
        rcc = simulate_fullvector(design, "rcc", alpha=0.05)
        cc = simulate_fullvector(design, "cc", alpha=0.05)
        rcc_half = simulate_fullvector(design, "rcc", alpha=0.025)
        for i in range(len(rcc.points)):
            tight = rcc_half.points[i].rejects
            mid = cc.points[i].rejects
            loose = rcc.points[i].rejects
            assert np.all(~tight | mid), "RCC(a/2) must imply CC(a)"
            assert np.all(~mid | loose), "CC(a) must imply RCC(a)"

    def test_power_against_closed_form_z_test(self):
        # one violated mean, the other inequality 10 sd slack: the refined
        # test behaves like the one-sided z test on the first coordinate
        n, mu1 = 100, 0.25
        design = FullVectorDesign(p=2, omega=np.eye(2), mu_null=((0.0, 10.0 / math.sqrt(n)),),
                                  mu_alt=((-mu1, 10.0 / math.sqrt(n)),),
                                  n=n, replications=30_000, seed=21)
        report = simulate_fullvector(design, "rcc")
        from ineqtest import normal_cdf, normal_quantile
        power = report.points[1].rejection_rate
        # m1 has mean -mu1 < 0, so -m1 violates E[m] >= 0... the z test
        # rejects when sqrt(n) * (-m_bar_1) / 1 > z_{.95}
        z_power = normal_cdf(mu1 * math.sqrt(n) - normal_quantile(0.95))
        assert abs(power - z_power) <= 0.01


class TestMetrics:
    def _point(self, vals, is_null):
        vals = np.asarray(vals, dtype=float)
        return PointResult(point_id="x", point=(0.0,), is_null=is_null, n=10,
                           replications=len(vals),
                           rejection_rate=float(np.mean(vals > 0)),
                           mc_se=0.0, statistics=vals,
                           critical_values=np.zeros(len(vals)),
                           rejects=vals > 0)

    def test_all_zero_rates(self):
        null = self._point(-np.ones(100), True)
        alt = self._point(-np.ones(100), False)
        mnrp, wap, scwap, corr = compute_metrics([null, alt], [0], [1], 0.05)
        assert mnrp == 0.0 and wap == 0.0
        assert corr <= 0.0

    def test_exactly_alpha_needs_no_correction(self):
        vals = np.concatenate([np.linspace(0.01, 0.3, 5), -np.linspace(0.1, 1, 95)])
        null = self._point(vals, True)
        alt = self._point(np.linspace(-1, 1, 100), False)
        mnrp, wap, scwap, corr = compute_metrics([null, alt], [0], [1], 0.05)
        assert mnrp == 0.05
        assert corr == 0.0
        assert scwap == wap

    def test_bisection_matches_grid_search(self):
        rng = np.random.default_rng(40)
        null = self._point(rng.normal(0.3, 1.0, 4000), True)
        alt = self._point(rng.normal(1.0, 1.0, 4000), False)
        mnrp, wap, scwap, corr = compute_metrics([null, alt], [0], [1], 0.05)
        grid = np.arange(-2.0, 4.0, 1e-4)
        feasible = [c for c in grid
                    if np.mean(null.statistics > null.critical_values + c) <= 0.05]
        assert corr == pytest.approx(min(feasible), abs=2e-4)
        assert mnrp > 0.05  # needs a positive correction here
        assert corr > 0.0

    def test_requires_stored_statistics(self):
        null = self._point(-np.ones(10), True)
        null.statistics = None
        with pytest.raises(ValueError):
            compute_metrics([null, self._point(np.ones(10), False)], [0], [1], 0.05)


class TestRateAggregator:
    def test_se_formula_and_scaling(self):
        rate, se = _rate_and_se(np.array([True] * 5 + [False] * 95))
        assert rate == 0.05
        assert se == pytest.approx(math.sqrt(0.05 * 0.95 / 100))
        # quadrupling the sample at a fixed rate halves the standard error
        rate4, se4 = _rate_and_se(np.array(([True] * 5 + [False] * 95) * 4))
        assert se4 == pytest.approx(se / 2)


class TestSimulateIntervalRegression:
    def test_bit_reproducible(self):
        design = IntervalRegressionDesign(n_obs=300, replications=40, seed=5)
        a = simulate_interval_regression(design, "srcc", theta_grid=[-1.0, 0.0])
        b = simulate_interval_regression(design, "srcc", theta_grid=[-1.0, 0.0])
        assert json.dumps(a.summary(), default=float) == json.dumps(b.summary(), default=float)
        for pa, pb in zip(a.points, b.points):
            np.testing.assert_array_equal(pa.rejects, pb.rejects)

    def test_null_labeling_and_shape(self):
        design = IntervalRegressionDesign(n_obs=400, replications=60, seed=2)
        report = simulate_interval_regression(design, "srcc",
                                              theta_grid=[-1.0, 0.5])
        interior, outside = report.points
        assert interior.is_null and not outside.is_null
        assert interior.rejection_rate <= 0.15
        assert outside.rejection_rate >= 0.7
        assert report.mnrp == interior.rejection_rate

    def test_moment_counts_by_covariate_dimension(self):
        assert IntervalRegressionDesign(d_c=2).n_moments == 8
        assert IntervalRegressionDesign(d_c=3).n_moments == 24
        assert IntervalRegressionDesign(d_c=4).n_moments == 48
        assert IntervalRegressionDesign(d_c=4, ordered_pairs=True).n_moments == 96

    def test_csv_and_json_writers(self, tmp_path):
        design = IntervalRegressionDesign(n_obs=300, replications=10, seed=1)
        report = simulate_interval_regression(design, "scc", theta_grid=[-1.0])
        report.to_csv(tmp_path / "mc.csv")
        report.to_json(tmp_path / "mc.json")
        lines = (tmp_path / "mc.csv").read_text().splitlines()
        assert lines[0].startswith("design,variant,point_id")
        assert len(lines) == 2
        payload = json.loads((tmp_path / "mc.json").read_text())
        assert payload["variant"] == "scc"
        assert "timings" not in payload  # files stay byte-reproducible
