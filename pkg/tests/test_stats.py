import numpy as np
import pytest
from hypothesis import given, strategies as st

from src.utils.errors import DomainError, TooFewRows
from src.utils.stats import Rng, chi2_cdf, chi2_quantile, moments_influence_cov, sample_mean_cov


class TestChiSquare:
    @pytest.mark.parametrize("df,p,expected", [
        (1, 0.95, 3.841458820694124),
        (2, 0.95, 5.991464547107979),
        (4, 0.95, 9.487729036781154),
        (4, 0.90, 7.779440339734858),
    ])
    def test_known_quantiles(self, df, p, expected):
        assert chi2_quantile(df, p) == pytest.approx(expected, abs=1e-8)

    @given(st.integers(1, 30), st.floats(0.001, 0.999))
    def test_cdf_inverts_quantile(self, df, p):
        assert chi2_cdf(df, chi2_quantile(df, p)) == pytest.approx(p, abs=1e-9)

    def test_quantile_increases_with_p(self):
        assert chi2_quantile(3, 0.90) < chi2_quantile(3, 0.95) < chi2_quantile(3, 0.99)

    @pytest.mark.parametrize("df,p", [(0, 0.5), (2, 0.0), (2, 1.0), (2, -0.1)])
    def test_domain_errors(self, df, p):
        with pytest.raises(DomainError):
            chi2_quantile(df, p)


class TestRng:
    def test_same_seed_same_stream(self):
        np.testing.assert_array_equal(Rng(7).standard_normal(11), Rng(7).standard_normal(11))

    def test_derived_streams_differ(self):
        base = Rng(7)
        assert not np.array_equal(base.derive(1).standard_normal(5), base.derive(2).standard_normal(5))

    def test_normal_moments(self):
        draws = Rng(1).normal([1.0, -2.0], [4.0, 0.25], 20000)
        assert draws.shape == (20000, 2)
        np.testing.assert_allclose(draws.mean(axis=0), [1.0, -2.0], atol=0.05)
        np.testing.assert_allclose(draws.var(axis=0), [4.0, 0.25], rtol=0.05)

    def test_multivariate_normal_accepts_singular_covariance(self):
        draws = Rng(2).multivariate_normal([0.0, 0.0], [[1.0, 1.0], [1.0, 1.0]], 100)
        np.testing.assert_allclose(draws[:, 0], draws[:, 1], atol=1e-12)

    def test_negative_seed(self):
        with pytest.raises(DomainError):
            Rng(-1)


class TestCovariances:
    def test_sample_mean_cov(self):
        mean, cov = sample_mean_cov([[1.0, 2.0], [3.0, 6.0]])
        np.testing.assert_allclose(mean, [2.0, 4.0])
        np.testing.assert_allclose(cov, [[2.0, 4.0], [4.0, 8.0]])

    def test_too_few_rows(self):
        with pytest.raises(TooFewRows):
            sample_mean_cov([[1.0, 2.0]])

    def test_influence_covariance_of_two_points(self):
        """x in {-1, 1}: squared deviations are constant, so only the mean block varies."""
        V = moments_influence_cov([[-1.0], [1.0]])
        np.testing.assert_allclose(V, [[0.0, 0.0], [0.0, 2.0]])

    def test_influence_covariance_layout(self):
        x = Rng(5).standard_normal((50, 3))
        V = moments_influence_cov(x)
        assert V.shape == (12, 12)
        np.testing.assert_allclose(V[9:, 9:], sample_mean_cov(x)[1])
        np.testing.assert_allclose(V, V.T)

    def test_constant_panel_has_zero_covariance(self):
        np.testing.assert_array_equal(moments_influence_cov(np.ones((10, 2))), np.zeros((6, 6)))
