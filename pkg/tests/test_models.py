import math

import numpy as np
import pytest
from scipy import stats

from qhdboot.errors import LevelOutOfRange
from qhdboot.models import (Ar1Model, ContinuousModel, CountModel, phi_moment,
                            sample_ar1, sample_iid)
from qhdboot.stepfun import WeightFunction

MODELS = [
    ContinuousModel("normal", mu=0.3, sigma=1.7),
    ContinuousModel("exponential", rate=2.0),
    ContinuousModel("uniform", a=-1.0, b=3.0),
    ContinuousModel("pareto", scale=1.0, tail_index=3.0),
]


class TestCdfQuantile:
    def test_examples(self):
        assert ContinuousModel("normal").cdf(0.0) == pytest.approx(0.5, abs=1e-15)
        assert ContinuousModel("exponential", rate=1.0).cdf(0.0) == 0.0
        assert ContinuousModel("uniform", a=0, b=1).cdf(0.25) == 0.25
        assert ContinuousModel("uniform", a=0, b=1).quantile(0.9) == pytest.approx(0.9)
        assert ContinuousModel("exponential", rate=1.0).quantile(0.95) == pytest.approx(-math.log(0.05), rel=1e-12)
        assert ContinuousModel("normal").quantile(0.5) == pytest.approx(0.0, abs=1e-12)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
    def test_quantile_cdf_identity(self, model):
        s = np.linspace(0.001, 0.999, 101)
        back = np.asarray(model.cdf(model.quantile(s)))
        assert back == pytest.approx(s, abs=1e-9)

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
    def test_cdf_monotone(self, model, rng):
        xs = np.sort(rng.uniform(-5, 10, 200))
        vals = np.asarray(model.cdf(xs))
        assert np.all(np.diff(vals) >= 0)
        assert np.all((vals >= 0) & (vals <= 1))

    def test_quantile_domain(self):
        with pytest.raises(LevelOutOfRange):
            ContinuousModel("normal").quantile(0.0)
        with pytest.raises(LevelOutOfRange):
            ContinuousModel("normal").quantile(1.0)

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            ContinuousModel("normal", sigma=0.0)
        with pytest.raises(ValueError):
            ContinuousModel("uniform", a=1.0, b=1.0)
        with pytest.raises(ValueError):
            ContinuousModel("nope")


class TestSampling:
    def test_determinism(self):
        m = ContinuousModel("normal")
        a = sample_iid(m, 3, 7)
        b = sample_iid(m, 3, 7)
        assert a.tolist() == b.tolist()

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            sample_iid(ContinuousModel("uniform", a=0, b=1), 0, 1)

    def test_uniform_mean_clt(self):
        x = sample_iid(ContinuousModel("uniform", a=0, b=1), 100_000, 2024)
        assert abs(x.mean() - 0.5) < 0.01  # 3 sigma/sqrt(n) = 0.0027

    @pytest.mark.parametrize("model", MODELS, ids=lambda m: m.kind)
    def test_sample_matches_cdf(self, model):
        x = sample_iid(model, 40_000, 5)
        d = stats.kstest(x, lambda t: np.asarray(model.cdf(t))).statistic
        assert d < 1.63 / math.sqrt(40_000) * 1.5


class TestAr1:
    def test_rho_zero_is_iid_normal(self):
        m = Ar1Model(rho=0.0, innovation_sd=1.0)
        path = sample_ar1(m, 10_000, 11)
        iid = sample_iid(ContinuousModel("normal"), 10_000, 12)
        assert stats.ks_2samp(path, iid).pvalue > 0.001

    def test_lag1_autocorrelation(self):
        m = Ar1Model(rho=0.5, innovation_sd=1.0)
        x = sample_ar1(m, 100_000, 13)
        x0 = x - x.mean()
        acf1 = (x0[:-1] @ x0[1:]) / (x0 @ x0)
        assert abs(acf1 - 0.5) < 0.02

    def test_determinism_and_burn_in(self):
        m = Ar1Model(rho=0.8, innovation_sd=0.5)
        a = sample_ar1(m, 50, 99)
        b = sample_ar1(m, 50, 99)
        assert a.tolist() == b.tolist()
        c = sample_ar1(m, 50, 99, burn_in=10)
        assert c.shape == (50,)

    def test_stationary_marginal(self):
        m = Ar1Model(rho=0.6, innovation_sd=2.0)
        assert m.stationary_sd() == pytest.approx(2.0 / math.sqrt(1 - 0.36))
        st_model = m.stationary_model()
        x = sample_ar1(m, 200_000, 21)
        d = stats.kstest(x, lambda t: np.asarray(st_model.cdf(t))).statistic
        # dependent path: looser band than the i.i.d. DKW bound
        assert d < 0.02

    def test_rho_validation(self):
        with pytest.raises(ValueError):
            Ar1Model(rho=1.0)


class TestPhiMoment:
    def test_normal_finite(self):
        assert np.isfinite(phi_moment(ContinuousModel("normal"), WeightFunction(1.0), 4))

    def test_pareto_divergent(self):
        m = ContinuousModel("pareto", scale=1.0, tail_index=3.0)
        assert phi_moment(m, WeightFunction(1.0), 4) == math.inf

    def test_pareto_boundary_divergent(self):
        m = ContinuousModel("pareto", scale=1.0, tail_index=3.0)
        assert phi_moment(m, WeightFunction(1.0), 3) == math.inf

    def test_pareto_finite_below_tail(self):
        m = ContinuousModel("pareto", scale=1.0, tail_index=3.0)
        assert np.isfinite(phi_moment(m, WeightFunction(1.0), 2))

    def test_uniform_closed_form(self):
        # int_0^1 (1+x)^4 dx = 31/5
        val = phi_moment(ContinuousModel("uniform", a=0, b=1), WeightFunction(2.0), 2)
        assert val == pytest.approx(31 / 5, rel=1e-9)


class TestCountModel:
    @pytest.mark.parametrize("count", [
        CountModel("poisson", lam=1.3),
        CountModel("geometric", q=0.4),
        CountModel("binomial", m=7, q=0.3),
        CountModel("deterministic", m=4),
    ], ids=lambda c: c.kind)
    def test_pmf_sums_to_one_at_tight_truncation(self, count):
        K = count.truncation_K(1e-13)
        assert count.pmf_vector(K).sum() == pytest.approx(1.0, abs=1e-12)

    def test_truncation_bound_is_tight(self):
        c = CountModel("poisson", lam=2.0)
        K = c.truncation_K(1e-10)
        assert stats.poisson.sf(K, 2.0) <= 1e-10
        assert stats.poisson.sf(K - 1, 2.0) > 1e-10

    def test_means(self):
        assert CountModel("poisson", lam=2.5).mean() == 2.5
        assert CountModel("geometric", q=0.25).mean() == pytest.approx(3.0)
        assert CountModel("binomial", m=10, q=0.3).mean() == pytest.approx(3.0)
        assert CountModel("deterministic", m=6).mean() == 6.0

    def test_moment_matches_direct_sum(self):
        c = CountModel("geometric", q=0.5)
        K = c.truncation_K(1e-12)
        p = c.pmf_vector(K)
        direct = sum(pk * k**2 for k, pk in enumerate(p))
        assert c.moment(2.0, K) == pytest.approx(direct, rel=1e-12)
