"""Distribution family behavior: densities, CDFs, quantiles, sampling,
moments. Monte-Carlo oracles are seeded and computed in-test."""

import math

import numpy as np
import pytest
from scipy.integrate import quad

from firmfacts.dists import (Family, ParamVector, cdf, logpdf, moments, pdf,
                             quantile, sample)
from firmfacts.errors import (DomainError, ParameterError,
                              UndefinedMomentError)

NORMAL = ParamVector(Family.NORMAL, (0.0, 1.0))
DLN_SYM = ParamVector(Family.DLN, (0.0, 1.0, 0.0, 1.0))
DLN_ASYM = ParamVector(Family.DLN, (1.0, 0.5, 0.0, 0.5))

FAMILY_CASES = [
    ParamVector(Family.NORMAL, (1.5, 2.0)),
    ParamVector(Family.SKEW_NORMAL, (-1.0, 1.5, 3.0)),
    ParamVector(Family.LAPLACE, (0.5, 1.2)),
    ParamVector(Family.STABLE, (1.5, 0.3, 1.0, 0.0)),
    ParamVector(Family.STABLE, (1.9, -0.5, 0.7, 2.0)),
    DLN_SYM,
    DLN_ASYM,
]


class TestParamVector:
    def test_rejects_bad_dispersion(self):
        with pytest.raises(ParameterError):
            ParamVector(Family.NORMAL, (0.0, -1.0))
        with pytest.raises(ParameterError):
            ParamVector(Family.DLN, (0.0, 1.0, 0.0, 0.0))

    def test_rejects_stable_domain(self):
        with pytest.raises(ParameterError):
            ParamVector(Family.STABLE, (2.5, 0.0, 1.0, 0.0))
        with pytest.raises(ParameterError):
            ParamVector(Family.STABLE, (1.5, 1.5, 1.0, 0.0))
        with pytest.raises(ParameterError):
            ParamVector(Family.STABLE, (0.4, 0.0, 1.0, 0.0))

    def test_arity_checked(self):
        with pytest.raises(ParameterError):
            ParamVector(Family.LAPLACE, (0.0, 1.0, 2.0))


class TestLogpdf:
    def test_standard_normal_mode(self):
        assert logpdf(NORMAL, 0.0) == pytest.approx(math.log(1.0 / math.sqrt(2 * math.pi)),
                                                    abs=1e-12)

    def test_dln_symmetry(self):
        assert logpdf(DLN_SYM, 0.3) == pytest.approx(logpdf(DLN_SYM, -0.3),
                                                     abs=1e-10)

    def test_dln_against_monte_carlo_density(self):
        # window density estimate at x = 1.7 from 5e6 draws
        x0, h = 1.7, 0.02
        draws = sample(DLN_ASYM, 5 * 10 ** 6, seed=914)
        oracle = np.mean((draws > x0 - h) & (draws <= x0 + h)) / (2 * h)
        ours = math.exp(logpdf(DLN_ASYM, x0))
        assert ours == pytest.approx(oracle, rel=0.02)

    def test_dln_vector_matches_scalar_quadrature(self):
        xs = np.array([-4.0, -0.7, 0.0, 0.5, 1.7, 9.0])
        vec = logpdf(DLN_ASYM, xs)
        sca = np.array([logpdf(DLN_ASYM, float(x)) for x in xs])
        assert np.max(np.abs(vec - sca)) < 1e-9

    @staticmethod
    def _window_mass(p, lo, hi):
        pieces = np.linspace(lo, hi, 9)
        total = 0.0
        for a, b in zip(pieces[:-1], pieces[1:]):
            val, _ = quad(lambda x: float(pdf(p, np.array([x]))[0]), a, b,
                          limit=200)
            total += val
        return total

    @pytest.mark.parametrize("p", FAMILY_CASES, ids=str)
    def test_density_integrates_to_one(self, p):
        eps = 1e-9
        lo, hi = quantile(p, eps), quantile(p, 1.0 - eps)
        total = self._window_mass(p, lo, hi)
        # stable tails are leading-order asymptotics; the others are exact
        tol = 1e-4 if p.family is Family.STABLE else 2e-6
        assert total == pytest.approx(1.0 - 2 * eps, abs=tol)

    @pytest.mark.parametrize("p", [c for c in FAMILY_CASES
                                   if c.family is not Family.STABLE], ids=str)
    def test_twelve_sd_window_holds_bulk(self, p):
        m, sd = moments(p, upto=2)
        assert self._window_mass(p, m - 12.0 * sd, m + 12.0 * sd) >= 0.999


class TestCdf:
    def test_laplace_median(self):
        assert cdf(ParamVector(Family.LAPLACE, (0.0, 1.0)), 0.0) == pytest.approx(0.5)

    def test_dln_symmetry_at_zero(self):
        assert cdf(DLN_SYM, 0.0) == pytest.approx(0.5, abs=1e-10)

    def test_dln_against_monte_carlo_cdf(self):
        draws = sample(DLN_ASYM, 10 ** 6, seed=915)
        oracle = float(np.mean(draws <= 2.0))
        assert cdf(DLN_ASYM, 2.0) == pytest.approx(oracle, abs=0.002)

    @pytest.mark.parametrize("p", FAMILY_CASES, ids=str)
    def test_monotone_with_limits(self, p):
        lo, hi = quantile(p, 1e-5), quantile(p, 1.0 - 1e-5)
        xs = np.linspace(lo, hi, 400)
        u = cdf(p, xs)
        assert np.all(np.diff(u) >= -1e-12)
        assert u[0] < 1e-4 and u[-1] > 1.0 - 1e-4


class TestQuantile:
    def test_normal_median(self):
        assert quantile(NORMAL, 0.5) == pytest.approx(0.0, abs=1e-12)

    def test_laplace_location_is_median(self):
        assert quantile(ParamVector(Family.LAPLACE, (3.0, 2.0)), 0.5) == pytest.approx(3.0)

    def test_dln_antisymmetric_quartiles(self):
        assert quantile(DLN_SYM, 0.25) == pytest.approx(-quantile(DLN_SYM, 0.75),
                                                        abs=1e-8)

    def test_domain_error(self):
        with pytest.raises(DomainError):
            quantile(NORMAL, 0.0)
        with pytest.raises(DomainError):
            quantile(NORMAL, 1.2)

    @pytest.mark.parametrize("p", FAMILY_CASES, ids=str)
    def test_cdf_of_quantile_is_identity(self, p):
        qs = np.arange(1, 100) / 100.0
        xs = quantile(p, qs)
        back = cdf(p, xs)
        assert np.max(np.abs(back - qs)) < 1e-6

    def test_round_trip_tolerance_scalar(self):
        for p in (DLN_ASYM, ParamVector(Family.SKEW_NORMAL, (0.0, 1.0, 2.0))):
            for q in (0.01, 0.37, 0.5, 0.93):
                assert cdf(p, quantile(p, q)) == pytest.approx(q, abs=1e-8)


class TestSample:
    def test_symmetric_dln_mean_near_zero(self):
        x = sample(DLN_SYM, 10 ** 5, seed=7)
        se = x.std() / math.sqrt(x.size)
        assert abs(x.mean()) < 3.0 * se

    def test_normal_sd_recovered(self):
        x = sample(ParamVector(Family.NORMAL, (5.0, 2.0)), 10 ** 5, seed=8)
        assert x.std() == pytest.approx(2.0, rel=0.02)

    def test_seed_determinism(self):
        for p in FAMILY_CASES:
            a = sample(p, 1000, seed=42)
            b = sample(p, 1000, seed=42)
            np.testing.assert_array_equal(a, b)

    def test_sample_size_validated(self):
        with pytest.raises(DomainError):
            sample(NORMAL, 0, seed=1)

    @pytest.mark.parametrize("p", [
        ParamVector(Family.SKEW_NORMAL, (-1.0, 1.5, 3.0)),
        ParamVector(Family.STABLE, (1.5, 0.3, 1.0, 0.0)),
        DLN_ASYM,
    ], ids=str)
    def test_sample_matches_cdf(self, p):
        # K-S distance of 1e5 draws against the model CDF ~ sampling noise
        x = np.sort(sample(p, 10 ** 5, seed=9))
        u = cdf(p, x)
        n = x.size
        i = np.arange(1, n + 1)
        ks = max(np.max(i / n - u), np.max(u - (i - 1) / n))
        assert ks < 1.95 / math.sqrt(n)  # 0.1% critical value


class TestMoments:
    def test_dln_symmetric(self):
        m, sd, skew, kurt = moments(DLN_SYM)
        assert m == pytest.approx(0.0, abs=1e-12)
        assert skew == pytest.approx(0.0, abs=1e-12)

    def test_dln_closed_form_mean(self):
        m = moments(DLN_ASYM, upto=1)[0]
        assert m == pytest.approx(math.exp(1.125) - math.exp(0.125), abs=1e-12)

    def test_stable_undefined_moments(self):
        with pytest.raises(UndefinedMomentError):
            moments(ParamVector(Family.STABLE, (1.5, 0.0, 1.0, 0.0)))

    def test_stable_mean_exists_above_one(self):
        m = moments(ParamVector(Family.STABLE, (1.5, 0.0, 1.0, 0.0)), upto=1)[0]
        assert m == pytest.approx(0.0, abs=1e-12)

    def test_dln_moments_match_monte_carlo(self):
        x = sample(DLN_ASYM, 10 ** 6, seed=10)
        mean, sd, skew, kurt = moments(DLN_ASYM)
        n = x.size
        se_mean = x.std() / math.sqrt(n)
        assert mean == pytest.approx(x.mean(), abs=3 * se_mean)
        # moment standard errors estimated by batching
        batches = x.reshape(100, -1)

        def batch_se(fn):
            vals = np.array([fn(b) for b in batches])
            return vals.std() / math.sqrt(len(vals))

        assert sd == pytest.approx(x.std(), abs=3 * batch_se(np.std))

        def skew_of(b):
            z = (b - b.mean()) / b.std()
            return np.mean(z ** 3)

        assert skew == pytest.approx(skew_of(x), abs=3 * batch_se(skew_of))

    def test_skew_normal_alpha_zero_equals_normal(self):
        sn = ParamVector(Family.SKEW_NORMAL, (0.7, 1.3, 0.0))
        nm = ParamVector(Family.NORMAL, (0.7, 1.3))
        xs = np.linspace(-5, 6, 111)
        assert np.max(np.abs(logpdf(sn, xs) - logpdf(nm, xs))) < 1e-12
        assert np.max(np.abs(cdf(sn, xs) - cdf(nm, xs))) < 1e-12
