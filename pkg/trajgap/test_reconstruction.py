"""
Tests for gap reconstruction: blend weights, the smooth transition and the
short/long gap dispatch.
"""

from unittest.mock import patch

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from calibration import GaConfig
from cf_models import MODEL_TAGS, GippsParams
from errors import CalibrationFailedError, InvalidInputError, PredictionError
from evaluation import score_values, synthesize_gaps
from reconstruction import (BlendWeights, ReconstructionConfig, blend_weights, fill_pair, reconstruct_gap,
                            reconstruct_headway, reconstruct_pair, smooth_transition)
from synthetic import gipps_pair, headway_with_gaps
from traj_core import HeadwaySeries, detect_gaps, straight_line

GIPPS = GippsParams(v0=30.0, a=1.5, b=2.0, s0=2.0, dt_r=1.2)
QUICK_GA = GaConfig(population=6, generations=3)


@pytest.fixture(scope='module')
def truth():
    return gipps_pair(GIPPS, duration_s=60.0, seed=1)


class TestBlendWeights:

    def test_linear_ramp_ends_at_last_sample(self):
        blend = blend_weights(0, 5, 'linear')

        np.testing.assert_allclose(blend.weights, [1.0, 0.75, 0.5, 0.25, 0.0])

    def test_linear_ramp_from_reshape_start(self):
        blend = blend_weights(58, 100)

        assert len(blend.weights) == 42
        assert blend.weights[0] == 1.0
        assert blend.weights[-1] == 0.0
        np.testing.assert_allclose(np.diff(blend.weights), -1.0 / 41)

    def test_settling_ramp(self):
        blend = blend_weights(0, 5, 'linear-settle')

        np.testing.assert_allclose(blend.weights, [1.0, 2 / 3, 1 / 3, 0.0, 0.0])

    def test_unknown_schedule(self):
        with pytest.raises(InvalidInputError):
            blend_weights(0, 5, 'cubic')

    def test_start_at_second_to_last(self):
        assert blend_weights(3, 5).weights.tolist() == [1.0, 0.0]

    def test_cosine_ramp(self):
        blend = blend_weights(2, 12, 'cosine')

        assert blend.weights[0] == 1.0
        assert blend.weights[-2] == 0.0
        assert blend.weights[-1] == 0.0
        assert np.all(np.diff(blend.weights) <= 0)

    def test_invalid_start(self):
        with pytest.raises(InvalidInputError):
            blend_weights(4, 5)

    def test_weights_validated(self):
        with pytest.raises(InvalidInputError):
            BlendWeights(0, np.array([0.5, 0.0]))


class TestSmoothTransition:
    """Tests for smooth_transition."""

    def test_constant_prediction_reshape_point(self):
        """Constant 10 m prediction, far edge 12 m, 100 samples: the reshape starts at sample 58."""
        result = smooth_transition(np.full(100, 10.0), 12.0, 0.0, 0.5)

        assert result.reshape_start == 58
        assert not result.whole_gap_blend
        assert result.values[-1] == 12.0
        np.testing.assert_array_equal(result.values[:59], 10.0)
        assert result.line_slope == pytest.approx(2.0 / 4.1)

    def test_single_sample_gap(self):
        result = smooth_transition([10.0], 12.0, 0.0, 0.5)

        assert result.values.tolist() == [12.0]

    def test_no_qualifying_point_blends_whole_gap(self):
        result = smooth_transition(np.full(10, 10.0), 30.0, 0.0, 0.5)

        assert result.whole_gap_blend
        assert result.reshape_start == 0
        assert result.values[0] == 10.0
        assert result.values[-1] == 30.0

    def test_non_finite_input_rejected(self):
        with pytest.raises(InvalidInputError):
            smooth_transition([10.0, np.nan, 11.0], 12.0, 0.0, 0.5)
        with pytest.raises(InvalidInputError):
            smooth_transition([], 12.0, 0.0, 0.5)

    @given(
        predicted=st.lists(st.floats(min_value=5.0, max_value=50.0), min_size=2, max_size=60),
        s_end=st.floats(min_value=5.0, max_value=50.0),
        edge_slope=st.floats(min_value=-2.0, max_value=2.0),
        threshold=st.floats(min_value=0.05, max_value=2.0),
        schedule=st.sampled_from(['linear', 'linear-settle', 'cosine']),
    )
    @settings(max_examples=100, deadline=None)
    def test_continuity_at_far_edge(self, predicted, s_end, edge_slope, threshold, schedule):
        """The output ends on the far edge; settling schedules arrive at the edge slope."""
        result = smooth_transition(predicted, s_end, edge_slope, threshold, 0.1, schedule)
        out = result.values

        assert len(out) == len(predicted)
        assert out[-1] == s_end
        np.testing.assert_array_equal(out[:result.reshape_start], predicted[:result.reshape_start])
        if schedule != 'linear' and not result.whole_gap_blend:
            arrival = (out[-1] - out[-2]) / 0.1
            assert abs(arrival - edge_slope) < threshold + 1e-9


class TestReconstructionConfig:

    @pytest.mark.parametrize('changes', [
        {'short_gap_limit': 0.0},
        {'slope_threshold': -1.0},
        {'blend_schedule': 'cubic'},
        {'model': 'krauss'},
        {'leader_speed': 'oracle'},
    ])
    def test_invalid_settings(self, changes):
        with pytest.raises(InvalidInputError):
            ReconstructionConfig(**changes)

    def test_leader_speed_only_for_gipps(self):
        cfg = ReconstructionConfig(leader_speed='edge')

        assert cfg.model_options('gipps') == {'leader_speed': 'edge'}
        assert cfg.model_options('idm') == {}


class TestReconstructGap:
    """Tests for the short/long gap dispatch."""

    def test_short_gap_is_interpolated(self, truth):
        hidden = truth.hide_gap(100, 129)
        gap = detect_gaps(hidden.headway)[0]

        out = reconstruct_gap(hidden, gap)

        assert out.record.method == 'linear'
        assert out.record.evaluations == 0
        np.testing.assert_allclose(out.values, straight_line(hidden.headway, gap))

    def test_five_second_gap_uses_model(self, truth):
        hidden = truth.hide_gap(200, 249)
        gap = detect_gaps(hidden.headway)[0]

        out = reconstruct_gap(hidden, gap, ga=QUICK_GA)

        assert out.record.method == 'model'
        assert out.record.model == 'gipps'
        assert out.record.evaluations == 24
        assert out.values[-1] == hidden.headway.s[250]
        assert 200 <= out.record.reshape_start <= 248

    def test_gap_without_context_skipped(self, truth):
        hidden = truth.hide_gap(10, 89)
        gap = detect_gaps(hidden.headway)[0]

        out = reconstruct_gap(hidden, gap, ga=QUICK_GA)

        assert not out.filled
        assert out.record.method == 'skipped'
        assert 'boundary' in out.record.note

    def test_short_gap_at_series_start_skipped(self, truth):
        hidden = truth.hide_gap(0, 9)
        gap = detect_gaps(hidden.headway)[0]

        out = reconstruct_gap(hidden, gap)

        assert out.record.method == 'skipped'

    def test_calibration_failure_falls_back_to_line(self, truth):
        hidden = truth.hide_gap(200, 279)
        gap = detect_gaps(hidden.headway)[0]

        with patch('reconstruction.ga_calibrate', side_effect=CalibrationFailedError('gipps')):
            out = reconstruct_gap(hidden, gap, ga=QUICK_GA)

        assert out.record.method == 'linear-fallback'
        np.testing.assert_allclose(out.values, straight_line(hidden.headway, gap))

    def test_prediction_failure_falls_back_to_line(self, truth):
        hidden = truth.hide_gap(200, 279)
        gap = detect_gaps(hidden.headway)[0]

        with patch('reconstruction.predict_headway', side_effect=PredictionError("non-finite headway", index=210)):
            out = reconstruct_gap(hidden, gap, ga=QUICK_GA)

        assert out.record.method == 'linear-fallback'
        assert out.record.model == 'gipps'
        assert len(out.calibrations) == 1

    def test_best_of_all_picks_lowest_cost(self, truth):
        hidden = truth.hide_gap(200, 279)
        gap = detect_gaps(hidden.headway)[0]

        out = reconstruct_gap(hidden, gap, ReconstructionConfig(model='best-of-all'), QUICK_GA)

        assert [c.model for c in out.calibrations] == list(MODEL_TAGS)
        assert out.record.evaluations == 4 * 24
        assert out.record.cost == min(c.cost for c in out.calibrations)

    def test_model_fill_meets_both_edges(self, truth):
        """Random gaps, every model: the fill starts on the pre-gap value and ends on the post-gap value."""
        for seed in range(20):
            first, last = synthesize_gaps(truth.headway, 1, seed).ranges()[0]
            hidden = truth.hide_gap(first, last)
            gap = detect_gaps(hidden.headway)[0]
            cfg = ReconstructionConfig(model=MODEL_TAGS[seed % len(MODEL_TAGS)])

            out = reconstruct_gap(hidden, gap, cfg, QUICK_GA)

            assert out.record.method == 'model'
            assert out.values[0] == hidden.headway.s[first - 1]
            assert out.values[-1] == hidden.headway.s[last + 1]

    def test_same_seed_same_values(self, truth):
        hidden = truth.hide_gap(200, 279)
        gap = detect_gaps(hidden.headway)[0]

        first = reconstruct_gap(hidden, gap, ga=QUICK_GA)
        second = reconstruct_gap(hidden, gap, ga=QUICK_GA)

        np.testing.assert_array_equal(first.values, second.values)

    def test_gipps_round_trip_accuracy(self):
        """A hidden 10 s gap in a Gipps pair is recovered within 0.5 m RMSE and 5 % MAPE."""
        good = 0
        for seed in range(10):
            pair = gipps_pair(GIPPS, duration_s=120.0, seed=seed)
            hidden = pair.hide_gap(500, 599)
            gap = detect_gaps(hidden.headway)[0]

            out = reconstruct_gap(hidden, gap, ga=GaConfig(seed=seed))
            rmse, mape = score_values(pair.headway.s[500:600], out.values)

            assert out.record.evaluations == 1020
            good += rmse < 0.5 and mape < 5.0
        assert good >= 8


class TestReconstructPair:

    def test_every_gap_filled(self, truth):
        hidden = truth.hide_gap(100, 129).hide_gap(300, 399)

        result = reconstruct_pair(hidden, ga=QUICK_GA)

        assert result.headway.is_complete
        assert [r.method for r in result.records] == ['linear', 'model']

    def test_observed_samples_untouched(self, truth):
        hidden = truth.hide_gap(300, 399)

        result = reconstruct_pair(hidden, ga=QUICK_GA)

        keep = hidden.headway.present
        np.testing.assert_array_equal(result.headway.s[keep], hidden.headway.s[keep])

    def test_fill_pair_rebuilds_leader_positions(self, truth):
        hidden = truth.hide_gap(100, 129)
        result = reconstruct_pair(hidden)

        filled = fill_pair(hidden, result.headway)

        assert filled.leader.x_present.all()
        expected = hidden.follower.x[100:130] + result.headway.s[100:130] + hidden.leader_length
        np.testing.assert_allclose(filled.leader.x[100:130], expected)


class TestReconstructHeadway:

    def test_headway_only_series(self):
        values = headway_with_gaps([12.0] * 400, [(50, 59), (200, 299)])
        series = HeadwaySeries.from_values(0.0, values)

        result = reconstruct_headway(series, series_id='scan')

        methods = [r.method for r in result.records]
        assert methods == ['linear', 'skipped']
        assert result.records[1].note == 'follower kinematics unavailable'
        assert result.headway.present[50:60].all()
        assert not result.headway.present[200:300].any()
