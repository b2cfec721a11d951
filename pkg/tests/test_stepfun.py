import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qhdboot.errors import LevelOutOfRange, NormInfinite, RangeTooSmall
from qhdboot.resampling import empirical_cdf
from qhdboot.stepfun import (GridPmf, StepFunction, WeightFunction, discretize,
                             left_continuous_inverse, weighted_sup_norm)

from conftest import random_step_difference


def dense_grid_norm(f, phi, fill=10_000):
    """Independent oracle: max of |f| * phi over knots, knot left-limits and
    a dense fill grid."""
    lo = f.knots[0] - 2.0
    hi = f.knots[-1] + 2.0
    grid = np.linspace(lo, hi, fill)
    vals = np.abs(np.asarray(f(grid))) * phi(grid)
    at_knots = np.abs(np.asarray(f(f.knots))) * phi(f.knots)
    at_left = np.abs(np.asarray(f(f.knots, side="left"))) * phi(f.knots)
    return max(vals.max(), at_knots.max(), at_left.max())


class TestEval:
    def test_right_continuity_at_jump(self):
        f = StepFunction.indicator(0.0)
        assert f(0.0) == 1.0

    def test_left_limit_before_jump(self):
        f = StepFunction.indicator(0.0)
        assert f(0.0, side="left") == 0.0

    def test_empirical_cdf_eval(self):
        f = empirical_cdf([1, 2, 3])
        assert f(2.0) == pytest.approx(2 / 3, abs=0)

    def test_vectorized_eval_matches_scalar(self, rng):
        f = random_step_difference(rng)
        xs = rng.uniform(-6, 6, 50)
        vec = np.asarray(f(xs))
        assert vec == pytest.approx([f(float(x)) for x in xs], abs=0)

    def test_left_tail_value(self):
        f = StepFunction(np.array([1.0]), np.array([2.0]), value_at_minus_inf=0.5)
        assert f(0.0) == 0.5
        assert f(1.0, side="left") == 0.5


class TestConstruction:
    def test_knots_must_increase(self):
        with pytest.raises(ValueError):
            StepFunction(np.array([0.0, 0.0]), np.array([1.0, 2.0]))

    def test_cdf_must_be_monotone(self):
        with pytest.raises(ValueError):
            StepFunction(np.array([0.0, 1.0]), np.array([0.5, 0.2]), is_cdf=True)

    def test_from_atoms_merges_ties(self):
        f = StepFunction.from_atoms([5.0, 5.0], [0.5, 0.5])
        assert f.knots.tolist() == [5.0]
        assert f.values.tolist() == [1.0]

    def test_arrays_are_readonly(self):
        f = StepFunction.indicator(0.0)
        with pytest.raises(ValueError):
            f.values[0] = 7.0

    def test_csv_roundtrip(self, rng):
        f = random_step_difference(rng)
        g = StepFunction.from_csv(f.to_csv())
        assert g.knots == pytest.approx(f.knots, abs=0)
        assert g.values == pytest.approx(f.values, abs=0)
        assert g.value_at_minus_inf == f.value_at_minus_inf


class TestWeightedSupNorm:
    def test_unit_block_phi1(self):
        f = StepFunction.indicator(0.0) - StepFunction.indicator(1.0)
        assert weighted_sup_norm(f, WeightFunction(1.0)) == 2.0

    def test_zero_function(self):
        z = StepFunction(np.array([0.0]), np.array([0.0]))
        assert weighted_sup_norm(z, WeightFunction(2.0)) == 0.0

    def test_two_block_phi2(self):
        # max(0.5 * phi(-2), 0.5 * phi(3-)) = max(0.5 * 9, 0.5 * 16) = 8
        f = StepFunction.indicator(-2.0).scale(0.5) - StepFunction.indicator(3.0).scale(0.5)
        assert weighted_sup_norm(f, WeightFunction(2.0)) == 8.0

    def test_norm_infinite_for_nonvanishing_tail(self):
        f = StepFunction.indicator(0.0)  # stays 1 at +inf
        with pytest.raises(NormInfinite):
            weighted_sup_norm(f, WeightFunction(1.0))

    def test_bounded_weight_allows_tails(self):
        f = StepFunction.indicator(0.0)
        assert weighted_sup_norm(f, WeightFunction(0.0)) == 1.0

    @pytest.mark.parametrize("lam", [0.0, 1.0, 2.0])
    def test_exact_matches_dense_grid(self, rng, lam):
        phi = WeightFunction(lam)
        for _ in range(25):
            f = random_step_difference(rng)
            exact = weighted_sup_norm(f, phi)
            grid = dense_grid_norm(f, phi)
            assert exact >= grid - 1e-12
            assert exact == pytest.approx(grid, abs=1e-9)

    @given(scale=st.floats(-5, 5, allow_nan=False), seed=st.integers(0, 2**32 - 1))
    @settings(max_examples=40, deadline=None)
    def test_norm_axioms(self, scale, seed):
        r = np.random.default_rng(seed)
        f = random_step_difference(r)
        g = random_step_difference(r)
        phi = WeightFunction(float(r.uniform(0, 3)))
        nf = weighted_sup_norm(f, phi)
        ng = weighted_sup_norm(g, phi)
        assert nf >= 0
        assert weighted_sup_norm(f.scale(scale), phi) == pytest.approx(abs(scale) * nf, rel=1e-12)
        assert weighted_sup_norm(f + g, phi) <= nf + ng + 1e-12

    def test_norm_zero_iff_zero(self, rng):
        f = random_step_difference(rng)
        phi = WeightFunction(1.0)
        assert weighted_sup_norm(f - f, phi) == 0.0
        if np.any(f.values != 0):
            assert weighted_sup_norm(f, phi) > 0


class TestInverse:
    def test_examples(self):
        f = empirical_cdf([1, 2, 3])
        assert left_continuous_inverse(f, 0.5) == 2.0
        assert left_continuous_inverse(f, 1 / 3) == 1.0
        point = StepFunction.indicator(4.5)
        for s in (0.01, 0.5, 1.0):
            assert left_continuous_inverse(point, s) == 4.5

    def test_level_out_of_range(self):
        f = empirical_cdf([1, 2, 3])
        with pytest.raises(LevelOutOfRange):
            left_continuous_inverse(f, 0.0)
        with pytest.raises(LevelOutOfRange):
            left_continuous_inverse(f, 1.0 + 1e-9)

    def test_monotone_and_galois(self, rng):
        f = StepFunction.from_atoms(rng.normal(size=12), rng.dirichlet(np.ones(12)))
        levels = np.sort(rng.uniform(1e-6, 1.0, 30))
        qs = [left_continuous_inverse(f, float(s)) for s in levels]
        assert all(q1 <= q2 for q1, q2 in zip(qs, qs[1:]))
        for s, q in zip(levels, qs):
            assert f(q) >= s - 1e-15


class TestDiscretize:
    def test_atom_on_lattice(self):
        gp = discretize(StepFunction.indicator(1.0), 0.5, 0.0, 2.0)
        assert gp.masses[gp.x_values().tolist().index(1.0)] == 1.0
        assert gp.total_mass == 1.0

    def test_nearest_point_rounding(self):
        gp = discretize(empirical_cdf([0.26]), 0.5, 0.0, 1.0)
        assert gp.masses.tolist() == [0.0, 1.0, 0.0]

    def test_tie_to_lower(self):
        gp = discretize(empirical_cdf([0.25, 0.75]), 0.5, 0.0, 1.0)
        assert gp.masses.tolist() == [0.5, 0.5, 0.0]

    def test_range_too_small(self):
        with pytest.raises(RangeTooSmall):
            discretize(StepFunction.indicator(3.0), 0.5, 0.0, 2.0)

    def test_mass_and_moment_budget(self, rng):
        for _ in range(20):
            k = int(rng.integers(2, 12))
            f = StepFunction.from_atoms(rng.uniform(-3, 3, k), rng.dirichlet(np.ones(k)))
            h = float(rng.uniform(0.05, 0.5))
            gp = discretize(f, h, -3.5, 3.5)
            assert gp.total_mass == pytest.approx(f.total_mass, abs=1e-12)
            jumps = f.jumps()
            xs = f.knots
            for r in (1, 2):
                exact = float(np.abs(xs) ** r @ jumps)
                gridm = gp.abs_moment(r)
                bound = r * (h / 2) * (1 + np.abs(xs).max()) ** (r - 1) * f.total_mass
                assert abs(exact - gridm) <= bound + 1e-12

    def test_max_displacement(self, rng):
        f = StepFunction.from_atoms(rng.uniform(0, 1, 5), rng.dirichlet(np.ones(5)))
        gp = discretize(f, 0.125, 0.0, 1.0)
        # every atom's nearest lattice point is within h/2
        xs = f.knots[f.jumps() > 0]
        lattice = gp.x_values()
        for x in xs:
            assert np.min(np.abs(lattice - x)) <= 0.125 / 2 + 1e-15


class TestGridPmf:
    def test_cdf_step_view(self):
        gp = GridPmf(0.0, 1.0, [0.25, 0.5, 0.25])
        cdf = gp.cdf_step()
        assert cdf.is_cdf
        assert cdf.values.tolist() == [0.25, 0.75, 1.0]

    def test_csv_roundtrip(self):
        gp = GridPmf(-1.0, 0.5, [0.2, 0.0, 0.8])
        back = GridPmf.from_csv(gp.to_csv())
        assert back.origin == gp.origin
        assert back.step == gp.step
        assert back.masses == pytest.approx(gp.masses, abs=0)

    def test_negative_mass_rejected(self):
        with pytest.raises(ValueError):
            GridPmf(0.0, 1.0, [0.5, -0.1])
