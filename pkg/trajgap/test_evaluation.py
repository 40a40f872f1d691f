"""
Unit tests for gap synthesis, scoring and summaries.
"""

import logging
import os

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st

from errors import GapCapacityError, InvalidInputError, ScoringError
from evaluation import (PER_GAP_COLUMNS, EvaluationReport, plan_specs, read_per_gap, score_gap, score_values,
                        summarize, synthesize_gaps)
from synthetic import constant_headway
from traj_core import HeadwaySeries


def row(gap_id, model, rmse, mape, dataset='ngsim', pair_id='p'):
    return {'gap_id': gap_id, 'pair_id': pair_id, 'model': model, 'gap_len_s': 10.0,
            'rmse_m': rmse, 'mape_pct': mape, 'dataset': dataset}


class TestSynthesizeGaps:
    """Tests for random gap placement."""

    @given(seed=st.integers(min_value=0, max_value=2 ** 32), count=st.integers(min_value=0, max_value=8))
    @settings(max_examples=25, deadline=None)
    def test_gaps_keep_context_clear(self, seed, count):
        series = constant_headway(12.0, 3000)

        plan = synthesize_gaps(series, count, seed)

        assert len(plan) == count
        ranges = plan.ranges()
        for first, last in ranges:
            assert 50 <= last - first + 1 <= 150
            assert first >= 50
            assert last + 50 <= len(series) - 1
        for (_, last), (first, _) in zip(ranges, ranges[1:]):
            assert first - last - 1 >= 50

    def test_same_seed_same_plan(self):
        series = constant_headway(12.0, 3000)

        assert synthesize_gaps(series, 5, 3).gaps == synthesize_gaps(series, 5, 3).gaps
        assert synthesize_gaps(series, 5, 3).gaps != synthesize_gaps(series, 5, 4).gaps

    def test_capacity_exceeded(self):
        with pytest.raises(GapCapacityError):
            synthesize_gaps(constant_headway(12.0, 300), 5, 0, max_attempts=50)

    def test_series_must_be_complete(self):
        series = HeadwaySeries.from_values(0.0, [12.0, None] + [12.0] * 500)

        with pytest.raises(InvalidInputError):
            synthesize_gaps(series, 1, 0)

    def test_specs_are_reconstructable(self):
        series = constant_headway(12.0, 2000)
        plan = synthesize_gaps(series, 4, 11)

        specs = plan_specs(series, plan)

        assert [(g.first_missing_idx, g.last_missing_idx) for g in specs] == plan.ranges()
        assert all(g.reconstructable for g in specs)


class TestScoring:
    """Tests for RMSE and MAPE."""

    def test_known_errors(self):
        rmse, mape = score_values([10.0, 10.0], [11.0, 9.0])

        assert rmse == pytest.approx(1.0)
        assert mape == pytest.approx(10.0)

    def test_tiny_true_headway_excluded(self, caplog):
        with caplog.at_level(logging.WARNING):
            rmse, mape = score_values([0.05, 10.0], [5.0, 11.0])

        assert rmse == pytest.approx(1.0)
        assert mape == pytest.approx(10.0)
        assert 'Excluding 1 samples' in caplog.text

    def test_nothing_to_score(self):
        with pytest.raises(ScoringError):
            score_values([0.01, 0.02], [1.0, 1.0])

    def test_length_mismatch(self):
        with pytest.raises(InvalidInputError):
            score_values([1.0, 2.0], [1.0])

    def test_score_gap_window(self):
        truth = constant_headway(10.0, 200)
        gap = plan_specs(truth, synthesize_gaps(truth, 1, 0, min_length_s=1.0, max_length_s=1.0))[0]

        rmse, mape = score_gap(truth, truth.fill(gap.first_missing_idx, np.full(10, 11.0)), gap)

        assert rmse == pytest.approx(1.0)
        assert mape == pytest.approx(10.0)


class TestSummaries:
    """Tests for summary tables."""

    def test_five_numbers(self):
        rows = [row(0, 'gipps', 1.0, 5.0), row(1, 'gipps', 2.0, 6.0), row(2, 'gipps', 3.0, 10.0)]

        summary = summarize(rows)
        rmse = summary[summary['metric'] == 'rmse_m'].iloc[0]

        assert list(summary.columns) == ['model', 'metric', 'min', 'max', 'average', 'median', 'std']
        assert (rmse['min'], rmse['max'], rmse['average'], rmse['median']) == (1.0, 3.0, 2.0, 2.0)
        assert rmse['std'] == pytest.approx(1.0)

    def test_single_row_has_zero_std(self):
        summary = summarize([row(0, 'idm', 2.5, 7.0)])

        assert summary['std'].tolist() == [0.0, 0.0]

    def test_grouped_by_dataset(self):
        rows = [row(0, 'gipps', 1.0, 5.0, 'ngsim'), row(1, 'gipps', 2.0, 6.0, 'lidar')]

        summary = summarize(rows, by=('dataset', 'model'))

        assert summary['dataset'].tolist() == ['lidar', 'lidar', 'ngsim', 'ngsim']

    def test_empty(self):
        assert summarize([]).empty

    def test_report_written_and_read_back(self, tmp_path):
        rows = [row(1, 'idm', 0.4, 2.0), row(0, 'gipps', 0.3, 1.5, pair_id='007')]
        report = EvaluationReport.from_rows(rows)

        report.write(str(tmp_path / 'out'))
        loaded = read_per_gap(str(tmp_path / 'out' / 'per_gap.csv'))

        assert list(loaded.columns) == PER_GAP_COLUMNS
        assert loaded['gap_id'].tolist() == [0, 1]
        assert loaded['pair_id'].tolist() == ['007', 'p']
        assert os.path.exists(tmp_path / 'out' / 'summary.csv')
        assert os.path.exists(tmp_path / 'out' / 'summary_by_dataset.csv')

    def test_per_gap_needs_columns(self, tmp_path):
        target = tmp_path / 'per_gap.csv'
        pd.DataFrame({'gap_id': [0], 'model': ['gipps']}).to_csv(target, index=False)

        with pytest.raises(InvalidInputError):
            read_per_gap(str(target))

    def test_per_gap_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            read_per_gap(str(tmp_path / 'nope.csv'))
