#!/usr/bin/env python3
"""
Evaluation harness: random gap placement, per-gap error metrics and
summary tables.
"""

import logging
import os
from dataclasses import dataclass, field
from typing import Iterable, List, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from errors import GapCapacityError, InvalidInputError, ScoringError
from traj_core import DEFAULT_CONTEXT_S, GapSpec, HeadwaySeries, detect_gaps

logger = logging.getLogger(__name__)

MIN_SCORED_HEADWAY = 0.1
PER_GAP_COLUMNS = ['gap_id', 'pair_id', 'model', 'gap_len_s', 'rmse_m', 'mape_pct', 'dataset']
SUMMARY_COLUMNS = ['model', 'metric', 'min', 'max', 'average', 'median', 'std']
METRICS = ('rmse_m', 'mape_pct')


@dataclass
class GapPlan:
    """Gap placements as (start index, length in samples), sorted by start"""
    seed: int
    gaps: List[Tuple[int, int]] = field(default_factory=list)

    def ranges(self) -> List[Tuple[int, int]]:
        return [(start, start + length - 1) for start, length in self.gaps]

    def __len__(self) -> int:
        return len(self.gaps)


def synthesize_gaps(series: HeadwaySeries, count: int, seed: int, min_length_s: float = 5.0,
                    max_length_s: float = 15.0, context_s: float = DEFAULT_CONTEXT_S,
                    max_attempts: int = 1000) -> GapPlan:
    """
    Place ``count`` random gaps in a complete series.

    Lengths are uniform in [min_length_s, max_length_s] rounded to whole
    samples; every gap keeps ``context_s`` of observed samples on both sides,
    clear of the series ends and of the other gaps.

    Raises:
        GapCapacityError: A gap could not be placed within ``max_attempts`` draws
    """
    if count < 0:
        raise InvalidInputError("gap count must be non-negative")
    if not series.is_complete:
        raise InvalidInputError("gaps can only be synthesized in a complete series")
    if not 0 < min_length_s <= max_length_s:
        raise InvalidInputError("gap lengths need 0 < min <= max")
    rng = np.random.Generator(np.random.PCG64(seed))
    n = len(series)
    ctx = int(round(context_s / series.h))
    placed: List[Tuple[int, int]] = []

    for k in range(count):
        for _ in range(max_attempts):
            length = max(1, int(round(rng.uniform(min_length_s, max_length_s) / series.h)))
            latest = n - ctx - length
            if latest < ctx:
                continue
            start = int(rng.integers(ctx, latest + 1))
            end = start + length - 1
            # at least ctx observed samples between any two gaps
            if all(start - (s + l) >= ctx or s - end - 1 >= ctx for s, l in placed):
                placed.append((start, length))
                break
        else:
            raise GapCapacityError(
                f"could not place gap {k + 1} of {count} in a {n * series.h:.1f} s series after {max_attempts} attempts")
    return GapPlan(seed=seed, gaps=sorted(placed))


def plan_specs(series: HeadwaySeries, plan: GapPlan, context_s: float = DEFAULT_CONTEXT_S) -> List[GapSpec]:
    """GapSpecs for each planned gap, each hidden on its own"""
    specs = []
    for first, last in plan.ranges():
        gaps = detect_gaps(series.hide(first, last), context_s)
        specs.append(gaps[0])
    return specs


def score_values(truth: Sequence[float], predicted: Sequence[float]) -> Tuple[float, float]:
    """
    (rmse, mape %) over samples whose true headway is at least 0.1 m.

    Raises:
        ScoringError: No usable sample
    """
    truth = np.asarray(truth, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    if truth.shape != predicted.shape:
        raise InvalidInputError("truth and prediction differ in length")
    usable = truth >= MIN_SCORED_HEADWAY
    if not usable.all():
        logger.warning("Excluding %d samples with true headway below %.1f m from scoring",
                       int((~usable).sum()), MIN_SCORED_HEADWAY)
    if not usable.any():
        raise ScoringError("no usable samples to score")
    err = predicted[usable] - truth[usable]
    rmse = float(np.sqrt(np.mean(err ** 2)))
    mape = float(100.0 * np.mean(np.abs(err) / truth[usable]))
    return rmse, mape


def score_gap(truth: HeadwaySeries, reconstructed: HeadwaySeries, gap: GapSpec) -> Tuple[float, float]:
    """RMSE (m) and MAPE (%) of the reconstruction over the gap samples only"""
    first, last = gap.first_missing_idx, gap.last_missing_idx
    if not (truth.present[first:last + 1].all() and reconstructed.present[first:last + 1].all()):
        raise InvalidInputError(f"gap {first}..{last} is not fully present in both series")
    return score_values(truth.s[first:last + 1], reconstructed.s[first:last + 1])


def _rows_frame(rows: Union[pd.DataFrame, Iterable[dict]]) -> pd.DataFrame:
    frame = rows if isinstance(rows, pd.DataFrame) else pd.DataFrame(list(rows))
    if frame.empty:
        return pd.DataFrame(columns=PER_GAP_COLUMNS)
    return frame


def _five_numbers(values: pd.Series) -> dict:
    std = float(values.std(ddof=1)) if len(values) > 1 else 0.0
    return {
        'min': float(values.min()),
        'max': float(values.max()),
        'average': float(values.mean()),
        'median': float(values.median()),
        'std': std,
    }


def summarize(rows: Union[pd.DataFrame, Iterable[dict]], by: Sequence[str] = ('model',)) -> pd.DataFrame:
    """
    Min, max, average, median and sample standard deviation of each metric,
    grouped by ``by`` (one row per group and metric). A group of one row
    reports a standard deviation of 0.
    """
    frame = _rows_frame(rows)
    keys = list(by)
    columns = keys + SUMMARY_COLUMNS[1:]
    if frame.empty:
        return pd.DataFrame(columns=columns)
    out = []
    for group, part in frame.groupby(keys, sort=True):
        group = group if isinstance(group, tuple) else (group,)
        for metric in METRICS:
            row = dict(zip(keys, group))
            row['metric'] = metric
            row.update(_five_numbers(part[metric].astype(float)))
            out.append(row)
    return pd.DataFrame(out, columns=columns)


@dataclass
class EvaluationReport:
    """Per-gap rows and their summaries"""
    per_gap: pd.DataFrame
    summary: pd.DataFrame
    summary_by_dataset: pd.DataFrame

    @classmethod
    def from_rows(cls, rows: Union[pd.DataFrame, Iterable[dict]]) -> 'EvaluationReport':
        frame = _rows_frame(rows)
        for col in PER_GAP_COLUMNS:
            if col not in frame.columns:
                frame[col] = '' if col in ('pair_id', 'dataset') else np.nan
        frame = frame[PER_GAP_COLUMNS].sort_values(['gap_id', 'model'], kind='stable').reset_index(drop=True)
        return cls(per_gap=frame, summary=summarize(frame),
                   summary_by_dataset=summarize(frame, by=('dataset', 'model')))

    def write(self, out_dir: str):
        os.makedirs(out_dir, exist_ok=True)
        self.per_gap.to_csv(os.path.join(out_dir, 'per_gap.csv'), index=False)
        self.summary.to_csv(os.path.join(out_dir, 'summary.csv'), index=False)
        self.summary_by_dataset.to_csv(os.path.join(out_dir, 'summary_by_dataset.csv'), index=False)


def read_per_gap(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Per-gap table not found: {path}")
    frame = pd.read_csv(path, dtype={'pair_id': str, 'dataset': str}, keep_default_na=False,
                        na_values={'rmse_m': [''], 'mape_pct': ['']})
    missing = [c for c in PER_GAP_COLUMNS if c not in frame.columns and c != 'dataset']
    if missing:
        raise InvalidInputError(f"{path}: missing columns {missing}")
    return frame
