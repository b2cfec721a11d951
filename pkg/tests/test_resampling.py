import math

import numpy as np
import pytest
from scipy import stats

from qhdboot import _kernels, seeds
from qhdboot.errors import BlockLengthInvalid, EmptySample, LengthMismatch
from qhdboot.models import ContinuousModel, sample_iid
from qhdboot.resampling import (BootstrapWeights, blockwise_expected_weights,
                                blockwise_weights, blockwise_weights_batch,
                                bootstrap_cdf, centering, empirical_cdf,
                                exchangeable_weights)
from qhdboot.stepfun import StepFunction


def coverage_expected_weights(n, ell):
    """Independent oracle for E[W_ni]: exact coverage probability of index i
    by k-1 uniform-start blocks of length ell plus one of the residual
    length, times the block counts."""
    k = math.ceil(n / ell)
    r = n - (k - 1) * ell
    s = n - ell + 1
    i = np.arange(1, n + 1)
    cov_full = np.clip(np.minimum(i, s) - np.maximum(i - ell + 1, 1) + 1, 0, None) / s
    cov_last = np.clip(np.minimum(i, s) - np.maximum(i - r + 1, 1) + 1, 0, None) / s
    return (k - 1) * cov_full + cov_last


class TestEmpiricalCdf:
    def test_basic(self):
        f = empirical_cdf([1, 2, 3])
        assert f.knots.tolist() == [1, 2, 3]
        assert f.values == pytest.approx([1 / 3, 2 / 3, 1.0], abs=0)

    def test_tie_merging(self):
        f = empirical_cdf([5, 5])
        assert f.knots.tolist() == [5]
        assert f.values.tolist() == [1.0]

    def test_empty_rejected(self):
        with pytest.raises(EmptySample):
            empirical_cdf([])

    def test_dkw_bound(self):
        n = 10_000
        x = sample_iid(ContinuousModel("uniform", a=0, b=1), n, 31415)
        xs = np.sort(x)
        i = np.arange(1, n + 1)
        sup = max(np.max(i / n - xs), np.max(xs - (i - 1) / n))
        assert sup <= 1.63 / math.sqrt(n)


class TestExchangeableWeights:
    def test_efron_support(self):
        w = exchangeable_weights("efron", 4, 1)
        assert w.weights.sum() == 4
        assert np.all(w.weights == np.round(w.weights))
        assert np.all((w.weights >= 0) & (w.weights <= 4))
        assert w.mean_weight == 1.0

    def test_bayesian_normalization(self):
        w = exchangeable_weights("bayesian", 173, 2)
        assert w.weights.sum() == pytest.approx(173.0, abs=1e-10)
        assert w.mean_weight == 1.0

    def test_wild_variance(self):
        rng = np.random.default_rng(3)
        draws = rng.exponential(1.0, size=100_000)
        w = BootstrapWeights("wild", draws, float(draws.mean()))
        assert w.weights.var(ddof=1) == pytest.approx(1.0, abs=0.02)

    def test_determinism(self):
        a = exchangeable_weights("bayesian", 10, 5)
        b = exchangeable_weights("bayesian", 10, 5)
        assert a.weights.tolist() == b.weights.tolist()

    def test_exchangeability_smoke(self):
        # W_n1 and W_n2 must share a distribution across draws
        rng = np.random.default_rng(17)
        n = 32
        efron = rng.multinomial(n, np.full(n, 1 / n), size=10_000)
        assert stats.ks_2samp(efron[:, 0], efron[:, 1]).pvalue > 0.001
        y = rng.exponential(1.0, size=(10_000, n))
        bayes = y * (n / y.sum(axis=1))[:, None]
        assert stats.ks_2samp(bayes[:, 0], bayes[:, 1]).pvalue > 0.001

    def test_unknown_scheme(self):
        with pytest.raises(ValueError):
            exchangeable_weights("blockwise", 5, 1)


class TestBlockwiseWeights:
    def test_sum_is_n(self):
        for seed in range(5):
            w = blockwise_weights(6, 2, seed)
            assert w.weights.sum() == 6
            assert w.block_count == 3

    def test_hand_enumeration(self):
        # n=6, ell=2: k=3, last block also has length 2; starts (1,1,5)
        # cover {1,2} twice and {5,6} once.
        w = _kernels.block_weights(np.array([[0, 0, 4]]), 6, 2, 2)[0]
        assert w.tolist() == [2, 2, 0, 0, 1, 1]

    def test_last_block_length(self):
        # n=10, ell=3: k=4 blocks, last covers 10 - 3*3 = 1 index
        w = _kernels.block_weights(np.array([[0, 0, 0, 0]]), 10, 3, 1)[0]
        assert w.tolist() == [4, 3, 3, 0, 0, 0, 0, 0, 0, 0]

    def test_weights_match_recorded_starts(self):
        w = blockwise_weights(20, 3, 7)
        k, ell = w.block_count, w.block_length
        last_len = 20 - (k - 1) * ell
        rebuilt = np.zeros(20)
        for j, start in enumerate(w.block_starts, start=1):
            length = ell if j < k else last_len
            rebuilt[start - 1:start - 1 + length] += 1
        assert rebuilt.tolist() == w.weights.tolist()

    def test_bounds_and_integrality(self):
        draws = blockwise_weights_batch(50, 7, 200, 11)
        k = math.ceil(50 / 7)
        assert np.all(draws == np.round(draws))
        assert np.all((draws >= 0) & (draws <= k))
        assert draws.sum(axis=1) == pytest.approx(np.full(200, 50.0), abs=0)

    def test_invalid_block_length(self):
        with pytest.raises(BlockLengthInvalid):
            blockwise_weights(10, 0, 1)
        with pytest.raises(BlockLengthInvalid):
            blockwise_weights(10, 10, 1)


class TestBlockwiseExpectedWeights:
    def test_middle_value_paper_case(self):
        w = blockwise_expected_weights(10, 3)
        assert w[3:7] == pytest.approx(np.full(4, 10 / 8), abs=0)

    def test_sum_equals_n(self):
        for n, ell in [(10, 3), (100, 7), (64, 8), (1000, 31), (20, 1), (9, 4)]:
            w = blockwise_expected_weights(n, ell)
            assert w.sum() == pytest.approx(n, abs=1e-9)

    @pytest.mark.parametrize("n,ell", [(10, 3), (12, 4), (100, 7), (64, 8),
                                       (20, 1), (9, 4), (101, 13), (30, 5)])
    def test_matches_coverage_oracle(self, n, ell):
        assert blockwise_expected_weights(n, ell) == pytest.approx(
            coverage_expected_weights(n, ell), abs=1e-12)

    def test_matches_monte_carlo(self):
        n, ell = 10, 3
        draws = blockwise_weights_batch(n, ell, 50_000,
                                        seeds.child_sequence(31415, seeds.STREAM_WEIGHTS_AUDIT, n, ell))
        w = blockwise_expected_weights(n, ell)
        se = draws.std(axis=0, ddof=1) / math.sqrt(draws.shape[0])
        assert np.all(np.abs(draws.mean(axis=0) - w) <= 3.5 * se)

    def test_overlapping_cases_rejected(self):
        # ell > (n+1)/2 makes the closed-form case ranges collide
        with pytest.raises(BlockLengthInvalid):
            blockwise_expected_weights(10, 6)


class TestBootstrapCdfAndCentering:
    def test_unit_weights_reduce_to_ecdf(self, rng):
        x = rng.normal(size=25)
        w = BootstrapWeights("wild", np.ones(25), 1.0)
        assert bootstrap_cdf(x, w).values == pytest.approx(empirical_cdf(x).values, abs=1e-15)

    def test_efron_total_mass_one(self, rng):
        x = rng.normal(size=40)
        w = exchangeable_weights("efron", 40, 9)
        assert bootstrap_cdf(x, w).total_mass == pytest.approx(1.0, abs=0)

    def test_wild_total_mass_is_mean_weight(self, rng):
        x = rng.normal(size=40)
        w = exchangeable_weights("wild", 40, 9)
        assert bootstrap_cdf(x, w).total_mass == pytest.approx(w.mean_weight, rel=1e-12)

    def test_length_mismatch(self, rng):
        with pytest.raises(LengthMismatch):
            bootstrap_cdf(rng.normal(size=5), exchangeable_weights("efron", 6, 0))

    def test_centering_equals_ecdf_for_mean_one_schemes(self, rng):
        x = rng.normal(size=30)
        for scheme in ("efron", "bayesian"):
            w = exchangeable_weights(scheme, 30, 3)
            c = centering(x, w)
            e = empirical_cdf(x)
            assert c(np.sort(x)) == pytest.approx(np.asarray(e(np.sort(x))), abs=1e-12)

    def test_degenerate_wild_centering(self, rng):
        x = rng.normal(size=12)
        w = BootstrapWeights("wild", np.ones(12), 1.0)
        c = centering(x, w)
        assert c.values == pytest.approx(empirical_cdf(x).values, abs=0)

    def test_blockwise_centering_jumps(self, rng):
        # (n=10, ell=3): time indices 4..7 carry weight 1.25/10 each
        x = rng.normal(size=10)
        w = blockwise_weights(10, 3, 4)
        c = centering(x, w)
        expected = blockwise_expected_weights(10, 3)
        for i in (3, 4, 5, 6):
            xi = x[i]
            jump = c(xi) - c(xi, side="left")
            assert jump == pytest.approx(expected[i] / 10, abs=1e-12)
        assert c.total_mass == pytest.approx(1.0, abs=1e-12)

    def test_zero_weight_atoms_stay_knots(self):
        x = np.array([1.0, 2.0, 3.0])
        w = BootstrapWeights("wild", np.array([1.0, 0.0, 2.0]), 1.0)
        f = bootstrap_cdf(x, w)
        assert f.knots.tolist() == [1.0, 2.0, 3.0]
        assert f.values == pytest.approx([1 / 3, 1 / 3, 1.0], abs=0)
