"""
Unit tests for the calibration module: tri-cube weights, the weighted cost
and the genetic algorithm.
"""

from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, strategies as st

from calibration import (GaConfig, GeneticCalibrator, WeightProfile, derive_seed, ga_calibrate, tricube_weight,
                         weighted_abs_error, weighted_cost)
from cf_models import DEFAULT_BOUNDS, FollowerState, PipesModel, PipesParams
from errors import CalibrationFailedError, InvalidInputError, PredictionError
from synthetic import perturbed_leader, simulate_pair
from traj_core import detect_gaps

PIPES = PipesParams(b_clear=5.0, T=1.5)


@pytest.fixture(scope='module')
def pipes_pair():
    """Pipes follower behind a strongly perturbed leader, samples 250..349 hidden"""
    leader = perturbed_leader(60.0, amplitude=2.0, period_s=20.0)
    v0 = float(leader.v[0])
    init = FollowerState(x=float(leader.x[0]) - leader.vehicle_length - (PIPES.b_clear + PIPES.T * v0), v=v0)
    pair = simulate_pair(PipesModel(PIPES), leader, init, pair_id='pipes')
    return pair.hide_gap(250, 349)


@pytest.fixture(scope='module')
def pipes_gap(pipes_pair):
    return detect_gaps(pipes_pair.headway, 5.0)[0]


def sphere(center):
    center = np.asarray(center)
    return lambda x: float(np.sum((np.asarray(x) - center) ** 2))


class TestTricube:
    """Tests for the tri-cube kernel and weight profiles."""

    def test_kernel_values(self):
        assert tricube_weight(0.0, 5.0) == 1.0
        assert tricube_weight(5.0, 5.0) == 0.0
        assert tricube_weight(7.0, 5.0) == 0.0
        assert tricube_weight(2.5, 5.0) == pytest.approx((1 - 0.125) ** 3)

    def test_kernel_near_edge(self):
        assert tricube_weight(1.0, 5.0) == pytest.approx(0.976191, abs=1e-6)

    def test_kernel_flat_at_both_ends(self):
        """Finite-difference slope vanishes at d = 0 and d = L."""
        eps = 1e-4

        assert abs(tricube_weight(eps, 5.0) - tricube_weight(0.0, 5.0)) / eps < 1e-6
        assert abs(tricube_weight(5.0, 5.0) - tricube_weight(5.0 - eps, 5.0)) / eps < 1e-6

    def test_kernel_rejects_bad_input(self):
        with pytest.raises(InvalidInputError):
            tricube_weight(1.0, 0.0)
        with pytest.raises(InvalidInputError):
            tricube_weight(-0.1, 5.0)

    @given(d1=st.floats(min_value=0, max_value=10), d2=st.floats(min_value=0, max_value=10))
    def test_kernel_non_increasing(self, d1, d2):
        lo, hi = sorted((d1, d2))
        assert tricube_weight(lo, 5.0) >= tricube_weight(hi, 5.0)

    def test_profile_for_five_second_window(self):
        profile = WeightProfile.tricube(50, 0.1)

        assert len(profile) == 50
        assert profile.weights[0] == 1.0
        assert 0 < profile.weights[-1] < 1e-3
        assert np.all(np.diff(profile.weights) <= 0)

    def test_profile_must_be_non_increasing(self):
        with pytest.raises(InvalidInputError):
            WeightProfile(np.array([0.5, 1.0]))

    def test_weighted_abs_error(self):
        assert weighted_abs_error([1.0, 2.0, 4.0], [1.0, 1.0, 1.0], [1.0, 0.5, 0.0]) == pytest.approx(0.5)


class TestWeightedCost:

    def test_true_model_has_zero_cost(self, pipes_pair, pipes_gap):
        """Pipes predicts its own follower exactly on both windows."""
        profile = WeightProfile.tricube(pipes_gap.context_samples)

        assert weighted_cost(PipesModel(PIPES), pipes_pair, pipes_gap, profile) < 1e-6

    def test_wrong_model_costs_more(self, pipes_pair, pipes_gap):
        profile = WeightProfile.tricube(pipes_gap.context_samples)
        wrong = PipesModel(PipesParams(b_clear=5.0, T=0.5))

        assert weighted_cost(wrong, pipes_pair, pipes_gap, profile) > 1.0

    def test_profile_length_must_match(self, pipes_pair, pipes_gap):
        with pytest.raises(InvalidInputError):
            weighted_cost(PipesModel(PIPES), pipes_pair, pipes_gap, WeightProfile.tricube(10))


class TestGaConfig:

    def test_default_budget(self):
        assert GaConfig().expected_evaluations == 1020

    @pytest.mark.parametrize('changes', [
        {'population': 1},
        {'crossover_rate': 1.5},
        {'mutation_rate': -0.1},
        {'elitism': 20},
        {'generations': -1},
    ])
    def test_invalid_settings(self, changes):
        with pytest.raises(InvalidInputError):
            GaConfig(**changes)


class TestGeneticCalibrator:
    """Tests for the real-coded GA."""

    def test_finds_quadratic_minimum(self):
        center = (1.3, -2.1)
        bounds = [(-5.0, 5.0), (-5.0, 5.0)]
        hits = 0
        for seed in range(10):
            outcome = GeneticCalibrator(bounds, GaConfig()).optimize(sphere(center), seed=seed)
            hits += outcome.cost < 0.05
            assert outcome.evaluations == 1020
        assert hits >= 9

    def test_beats_grid_search(self):
        """The GA ends at least as low as a coarse grid over the box."""
        center = (1.3, -2.1)
        grid = np.linspace(-5.0, 5.0, 6)
        grid_best = min(sphere(center)((a, b)) for a in grid for b in grid)

        outcome = GeneticCalibrator([(-5.0, 5.0), (-5.0, 5.0)]).optimize(sphere(center), seed=7)

        assert outcome.cost <= grid_best

    def test_history_never_rises(self):
        outcome = GeneticCalibrator([(-5.0, 5.0)] * 3).optimize(sphere((0.5, 0.5, 0.5)), seed=1)

        assert len(outcome.history) == 51
        assert all(b <= a for a, b in zip(outcome.history, outcome.history[1:]))

    def test_same_seed_same_result(self):
        bounds = [(-5.0, 5.0), (0.0, 2.0)]
        first = GeneticCalibrator(bounds).optimize(sphere((1.0, 1.0)), seed=42)
        second = GeneticCalibrator(bounds).optimize(sphere((1.0, 1.0)), seed=42)

        np.testing.assert_array_equal(first.best, second.best)
        assert first.cost == second.cost

    def test_best_stays_in_bounds(self):
        outcome = GeneticCalibrator([(0.0, 1.0), (2.0, 3.0)]).optimize(sphere((-10.0, 10.0)), seed=3)

        assert 0.0 <= outcome.best[0] <= 1.0
        assert 2.0 <= outcome.best[1] <= 3.0

    def test_failed_evaluations_counted(self):
        def cost(x):
            if x[0] > 0:
                raise PredictionError("non-finite headway", index=0)
            return float(x[0] ** 2)

        outcome = GeneticCalibrator([(-1.0, 1.0)], GaConfig(population=10, generations=5)).optimize(cost, seed=0)

        assert outcome.failed_evaluations > 0
        assert np.isfinite(outcome.cost)
        assert outcome.best[0] <= 0

    def test_roulette_with_zero_fitness_is_uniform(self):
        rng = np.random.Generator(np.random.PCG64(0))

        picks = GeneticCalibrator._roulette(rng, np.zeros(4), 400)

        assert set(picks.tolist()) == {0, 1, 2, 3}

    def test_roulette_never_picks_zero_fitness(self):
        rng = np.random.Generator(np.random.PCG64(0))

        picks = GeneticCalibrator._roulette(rng, np.array([0.0, 0.0, 1.0]), 100)

        assert set(picks.tolist()) == {2}

    def test_invalid_bounds(self):
        with pytest.raises(InvalidInputError):
            GeneticCalibrator([(1.0, 1.0)])
        with pytest.raises(InvalidInputError):
            GeneticCalibrator([])


class TestGaCalibrate:
    """Tests for per-gap calibration."""

    def test_recovers_pipes_time_headway(self, pipes_pair, pipes_gap):
        result = ga_calibrate('pipes', pipes_pair, pipes_gap, DEFAULT_BOUNDS['pipes'], seed=11)

        assert result.model == 'pipes'
        assert result.evaluations == 1020
        assert result.seed == 11
        assert result.params.T == pytest.approx(PIPES.T, abs=0.05)

    def test_deterministic_for_a_seed(self, pipes_pair, pipes_gap):
        cfg = GaConfig(population=6, generations=3)
        first = ga_calibrate('newell', pipes_pair, pipes_gap, DEFAULT_BOUNDS['newell'], cfg, seed=5)
        second = ga_calibrate('newell', pipes_pair, pipes_gap, DEFAULT_BOUNDS['newell'], cfg, seed=5)

        assert first.params == second.params
        assert first.cost == second.cost
        assert first.evaluations == 24

    def test_every_evaluation_failing(self, pipes_pair, pipes_gap):
        cfg = GaConfig(population=4, generations=2)
        with patch('calibration.weighted_cost', side_effect=PredictionError("non-finite headway", index=3)):
            with pytest.raises(CalibrationFailedError) as exc:
                ga_calibrate('idm', pipes_pair, pipes_gap, DEFAULT_BOUNDS['idm'], cfg)
        assert exc.value.model == 'idm'

    def test_gap_without_context_rejected(self, pipes_pair):
        edge_gap = detect_gaps(pipes_pair.headway.hide(0, 20), 5.0)[0]

        with pytest.raises(InvalidInputError):
            ga_calibrate('pipes', pipes_pair, edge_gap, DEFAULT_BOUNDS['pipes'])


class TestDeriveSeed:

    def test_stable(self):
        assert derive_seed(0, 'p', 3, 'gipps') == derive_seed(0, 'p', 3, 'gipps')

    def test_parts_matter(self):
        seeds = {derive_seed(0, 'p', 3, tag) for tag in ('gipps', 'idm', 'pipes', 'newell')}
        seeds.add(derive_seed(1, 'p', 3, 'gipps'))

        assert len(seeds) == 5

    def test_fits_in_64_bits(self):
        assert 0 <= derive_seed(123, 'x') < 2 ** 64
