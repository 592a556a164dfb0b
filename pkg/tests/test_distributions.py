"""Distribution kernels checked against independent oracles.

The chi-squared CDF oracles are closed forms (Poisson sums for even degrees
of freedom, the error function for one degree) and adaptive quadrature of the
density; quantiles are cross-checked by bisection on the oracle CDFs.
"""

import math

import numpy as np
import pytest

from ineqtest import chi2_cdf, chi2_quantile, normal_cdf, normal_quantile


def chi2_cdf_even_oracle(r, x):
    """Closed-form CDF for even r: 1 - exp(-x/2) * sum (x/2)^i / i!."""
    assert r % 2 == 0 and r > 0
    half = x / 2.0
    term, total = 1.0, 1.0
    for i in range(1, r // 2):
        term *= half / i
        total += term
    return 1.0 - math.exp(-half) * total


def chi2_cdf_quadrature_oracle(r, x, panels=4000):
    """Simpson quadrature of the density; substitution x = t^2 regularizes r=1."""
    if x <= 0:
        return 0.0

    def integrand(t):
        # 2 t * f(t^2); the t = 0 limit is finite: sqrt(2/pi) at r = 1, else 0
        if t <= 0:
            return math.sqrt(2.0 / math.pi) if r == 1 else 0.0
        u = t * t
        return 2.0 * t * math.exp((r / 2 - 1) * math.log(u) - u / 2
                                  - math.lgamma(r / 2) - (r / 2) * math.log(2))

    hi = math.sqrt(x)
    h = hi / panels
    total = 0.0
    for i in range(panels):
        a = i * h
        total += (h / 6) * (integrand(a) + 4 * integrand(a + h / 2)
                            + integrand(a + h))
    return total


def bisect_quantile(cdf, p, lo=0.0, hi=500.0, iters=200):
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if cdf(mid) < p:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


class TestChi2:
    def test_point_mass_convention(self):
        assert chi2_quantile(0, 0.95) == 0.0
        assert chi2_cdf(0, 0.0) == 1.0
        assert chi2_cdf(1, 0.0) == 0.0

    def test_two_df_closed_form(self):
        assert chi2_quantile(2, 0.95) == pytest.approx(-2.0 * math.log(0.05), abs=1e-12)

    def test_one_df_against_bisection_of_integrated_density(self):
        # bisection on erf-based chi2_1 CDF, itself validated by quadrature
        oracle = bisect_quantile(lambda x: math.erf(math.sqrt(x / 2.0)), 0.95)
        assert oracle == pytest.approx(3.8414588206941227, abs=1e-10)
        assert chi2_quantile(1, 0.95) == pytest.approx(oracle, abs=1e-10)

    def test_cdf_examples(self):
        assert chi2_cdf(2, 5.991464547107982) == pytest.approx(0.95, abs=1e-8)
        # series-summation oracle: 1 - 1.5 e^{-0.5}
        assert chi2_cdf(4, 1.0) == pytest.approx(0.09020401043104986, abs=1e-12)

    @pytest.mark.parametrize("r", [2, 4, 6, 10, 20])
    @pytest.mark.parametrize("x", [0.5, 1.0, 4.0, 15.0])
    def test_cdf_against_even_series_oracle(self, r, x):
        assert chi2_cdf(r, x) == pytest.approx(chi2_cdf_even_oracle(r, x), abs=1e-12)

    @pytest.mark.parametrize("r", [1, 3, 5])
    @pytest.mark.parametrize("x", [0.3, 2.0, 7.0])
    def test_cdf_against_quadrature_oracle(self, r, x):
        assert chi2_cdf(r, x) == pytest.approx(chi2_cdf_quadrature_oracle(r, x), abs=1e-8)

    def test_quantile_monotone_in_p_and_r(self):
        ps = [0.5, 0.9, 0.95, 0.975, 0.99]
        for r in range(1, 21):
            qs = [chi2_quantile(r, p) for p in ps]
            assert all(a < b for a, b in zip(qs, qs[1:]))
        for p in ps:
            qs = [chi2_quantile(r, p) for r in range(0, 21)]
            assert all(a <= b for a, b in zip(qs, qs[1:]))

    def test_round_trip(self):
        for r in range(1, 21):
            for p in (0.5, 0.9, 0.95, 0.975, 0.99):
                assert chi2_cdf(r, chi2_quantile(r, p)) == pytest.approx(p, abs=1e-9)

    def test_rejects_bad_probability(self):
        with pytest.raises(ValueError):
            chi2_quantile(3, 0.0)
        with pytest.raises(ValueError):
            chi2_quantile(3, 1.0)

    def test_empirical_tail_rate(self):
        rng = np.random.default_rng(42)
        for r in (1, 3, 7):
            draws = rng.standard_normal((1_000_000, r))
            stat = np.sum(draws * draws, axis=1)
            rate = float(np.mean(stat > chi2_quantile(r, 0.95)))
            assert abs(rate - 0.05) < 1e-3, f"r={r}: rate {rate}"


class TestNormal:
    def test_symmetry_and_limits(self):
        assert normal_cdf(0.0) == 0.5
        assert normal_cdf(math.inf) == 1.0
        assert normal_cdf(-math.inf) == 0.0

    def test_cdf_value(self):
        # quadrature-free oracle: the point was derived by bisection on erf
        assert normal_cdf(1.959964) == pytest.approx(0.975, abs=1e-6)

    def test_quantile_round_trip(self):
        for p in np.linspace(1e-8, 1 - 1e-8, 2001):
            assert abs(normal_cdf(normal_quantile(p)) - p) <= 1e-12

    def test_quantile_domain(self):
        with pytest.raises(ValueError):
            normal_quantile(0.0)
        with pytest.raises(ValueError):
            normal_quantile(1.0)
