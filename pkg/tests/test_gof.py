"""Goodness-of-fit statistics, bootstrap p-values, and model comparison."""

import math

import numpy as np
import pytest

from firmfacts import gof
from firmfacts.dists import Family, FitResult, ParamVector, quantile, sample
from firmfacts.errors import DomainError, SampleSizeError

NORMAL = ParamVector(Family.NORMAL, (0.0, 1.0))
DLN_INCOME = ParamVector(Family.DLN, (1.0, 0.6, 0.2, 0.8))


class TestKs:
    def test_single_point_at_median(self):
        # any continuous law with F(x) = 0.5 at the data point
        p = ParamVector(Family.NORMAL, (0.5, 1.0))
        assert gof.ks_stat(np.array([0.5]), p) == pytest.approx(0.5)

    def test_exact_quantile_grid(self):
        q = quantile(NORMAL, (np.arange(100) + 0.5) / 100)
        assert gof.ks_stat(q, NORMAL) == pytest.approx(0.005, abs=1e-12)

    def test_monotone_transform_invariance(self):
        # the statistic depends on the data only through PIT values, and a
        # common strictly increasing transform leaves those unchanged
        x = np.sort(sample(NORMAL, 500, seed=1))
        from firmfacts.dists import cdf

        u = cdf(NORMAL, x)
        direct = gof.ks_stat(x, NORMAL)
        assert gof._ks_from_sorted_pit(np.sort(u)) == pytest.approx(direct,
                                                                    abs=1e-13)
        # asinh both data and distribution: PIT of asinh(x) under F(sinh(.))
        u_t = cdf(NORMAL, np.sinh(np.arcsinh(x)))
        assert gof._ks_from_sorted_pit(np.sort(u_t)) == pytest.approx(direct,
                                                                      abs=1e-9)


class TestChi2:
    def test_perfectly_uniform_counts(self):
        # 10 points in each of 50 equiprobable bins
        centers = (np.arange(50)[:, None] + (np.arange(10) + 0.5)[None, :] / 10)
        q = quantile(NORMAL, (centers / 50).ravel())
        assert gof.chi2_binned(q, NORMAL, bins=50) == pytest.approx(0.0)

    def test_all_mass_in_one_bin(self):
        # n = 500 points inside a single bin: 49 empty bins contribute
        # 49 * 10 and the full bin (500 - 10)^2 / 10 = 24010
        x = np.full(500, quantile(NORMAL, 0.505))
        stat = gof.chi2_binned(x, NORMAL, bins=50)
        assert stat == pytest.approx(49 * 10 + (500 - 10) ** 2 / 10)

    def test_duplication_doubles_statistic(self):
        x = sample(NORMAL, 400, seed=3)
        s1 = gof.chi2_binned(x, NORMAL, bins=50)
        s2 = gof.chi2_binned(np.concatenate([x, x]), NORMAL, bins=50)
        assert s2 == pytest.approx(2.0 * s1, rel=1e-12)

    def test_sample_size_guard(self):
        with pytest.raises(SampleSizeError):
            gof.chi2_binned(np.arange(100.0), NORMAL, bins=50)

    def test_matches_pit_shortcut(self):
        x = sample(DLN_INCOME, 3000, seed=4)
        from firmfacts.dists import cdf

        direct = gof.chi2_binned(x, DLN_INCOME, bins=50)
        via_pit = gof._chi2_from_pit(np.sort(cdf(DLN_INCOME, np.sort(x))), 50)
        assert via_pit == pytest.approx(direct, abs=1e-9)


class TestAd:
    def test_naive_double_loop_oracle(self):
        x = np.sort(sample(NORMAL, 50, seed=5))
        from firmfacts.dists import cdf

        u = np.clip(cdf(NORMAL, x), 1e-12, 1 - 1e-12)
        n = len(u)
        total = 0.0
        for i in range(1, n + 1):
            total += (2 * i - 1) * (math.log(u[i - 1]) + math.log(1 - u[n - i]))
        oracle = -n - total / n
        assert gof.ad_stat(x, NORMAL) == pytest.approx(oracle, abs=1e-10)

    def test_near_perfect_fit_is_small(self):
        q = quantile(NORMAL, (np.arange(1000) + 0.5) / 1000)
        assert gof.ad_stat(q, NORMAL) < 0.3

    def test_shifted_data_diverges(self):
        x = sample(NORMAL, 200, seed=6)
        assert gof.ad_stat(x + 30.0, NORMAL) > 1e3


class TestBootstrap:
    def test_deterministic_given_seed(self):
        x = sample(NORMAL, 2000, seed=7)
        p1 = gof.bootstrap_pvalue("ks", x, Family.NORMAL, reps=249, seed=13)
        p2 = gof.bootstrap_pvalue("ks", x, Family.NORMAL, reps=249, seed=13)
        assert p1 == p2

    def test_worker_count_does_not_change_result(self):
        x = sample(NORMAL, 2000, seed=7)
        r1 = gof.bootstrap_report(x, Family.NORMAL, reps=249, seed=13, workers=1)
        r2 = gof.bootstrap_report(x, Family.NORMAL, reps=249, seed=13, workers=2)
        assert r1 == r2

    def test_reps_floor(self):
        x = sample(NORMAL, 2000, seed=7)
        with pytest.raises(DomainError):
            gof.bootstrap_pvalue("ks", x, Family.NORMAL, reps=99, seed=1)

    def test_zero_reps_skips_pvalues(self):
        x = sample(NORMAL, 2000, seed=7)
        rep = gof.bootstrap_report(x, Family.NORMAL, reps=0, seed=1)
        assert rep.pvalue_ks is None and rep.pvalue_ad is None
        assert rep.statistic_ks > 0

    def test_level_on_true_family(self):
        # normal data tested against the normal family: p > 0.05 nearly always
        hits = 0
        trials = 30
        for t in range(trials):
            x = sample(NORMAL, 10_000, seed=100 + t)
            rep = gof.bootstrap_report(x, Family.NORMAL, reps=249, seed=t)
            hits += rep.pvalue_ks > 0.05
        assert hits >= int(0.9 * trials)

    def test_power_against_wrong_family(self):
        # heavy two-sided data tested against laplace: rejected essentially
        # always at n = 1e4
        hits = 0
        trials = 20
        for t in range(trials):
            x = sample(DLN_INCOME, 10_000, seed=200 + t)
            rep = gof.bootstrap_report(x, Family.LAPLACE, reps=249, seed=t)
            hits += rep.pvalue_ks < 0.05
        assert hits >= int(0.95 * trials)


class TestCompareModels:
    def _fit(self, family, loglik, n):
        params = {Family.NORMAL: (0.0, 1.0), Family.LAPLACE: (0.0, 1.0)}[family]
        return FitResult(ParamVector(family, params), loglik, n, "mle", True, 0)

    def test_relative_likelihood_formula(self):
        # AICs of 10 and 12 give relative likelihoods 1 and e^{-1}
        fits = {Family.NORMAL: self._fit(Family.NORMAL, (4 - 10) / 2, 100),
                Family.LAPLACE: self._fit(Family.LAPLACE, (4 - 12) / 2, 100)}
        cmp_ = gof.compare_models(np.arange(100.0),
                                  [Family.NORMAL, Family.LAPLACE], fits=fits)
        assert cmp_.aic[Family.NORMAL] == pytest.approx(10.0)
        assert cmp_.aic[Family.LAPLACE] == pytest.approx(12.0)
        assert cmp_.rel_lik_aic[Family.NORMAL] == pytest.approx(1.0)
        assert cmp_.rel_lik_aic[Family.LAPLACE] == pytest.approx(math.exp(-1))

    def test_identical_models_tie(self):
        fits = {Family.NORMAL: self._fit(Family.NORMAL, -150.0, 100),
                Family.LAPLACE: self._fit(Family.LAPLACE, -150.0, 100)}
        cmp_ = gof.compare_models(np.arange(100.0),
                                  [Family.NORMAL, Family.LAPLACE], fits=fits)
        assert cmp_.rel_lik_aic[Family.NORMAL] == pytest.approx(1.0)
        assert cmp_.rel_lik_aic[Family.LAPLACE] == pytest.approx(1.0)
        assert cmp_.rel_lik_bic[Family.NORMAL] == pytest.approx(1.0)

    def test_needs_two_families(self):
        with pytest.raises(DomainError):
            gof.compare_models(np.arange(100.0), [Family.NORMAL])

    def test_dln_data_selects_dln(self):
        x = sample(DLN_INCOME, 30_000, seed=11)
        cmp_ = gof.compare_models(
            x, [Family.NORMAL, Family.LAPLACE, Family.DLN])
        assert cmp_.rel_lik_aic[Family.DLN] == pytest.approx(1.0)
        assert cmp_.rel_lik_aic[Family.NORMAL] < 1e-3
        assert cmp_.rel_lik_aic[Family.LAPLACE] < 1e-3
        assert cmp_.rel_lik_bic[Family.DLN] == pytest.approx(1.0)
