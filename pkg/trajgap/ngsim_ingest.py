#!/usr/bin/env python3
"""
NGSIM I-80 trajectory ingestion.

Parses FHWA 18-column trajectory text and extracts leader-follower pairs
where the follower keeps the same leader in the same lane for long enough.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, TextIO, Tuple, Union

import numpy as np
import pandas as pd

from errors import InvalidInputError, NgsimParseError
from traj_core import SAMPLE_INTERVAL, Trajectory, VehiclePair

logger = logging.getLogger(__name__)

METERS_PER_FOOT = 0.3048
SPEED_SANITY_MPS = 60.0

NGSIM_COLUMNS = (
    'vehicle_id',
    'frame_id',            # 1 frame per 0.1 s
    'total_frames',
    'global_time',         # ms
    'local_x',             # ft
    'local_y',             # ft
    'global_x',
    'global_y',
    'vehicle_length',      # ft
    'vehicle_width',       # ft
    'vehicle_class',       # 1 motorcycle, 2 auto, 3 truck
    'speed',               # ft/s
    'acceleration',        # ft/s^2
    'lane_id',             # 1 is the leftmost lane
    'preceding_vehicle_id',
    'following_vehicle_id',
    'space_headway',       # ft, front to front
    'time_headway',        # s
)
FEET_COLUMNS = ('local_x', 'local_y', 'vehicle_length', 'vehicle_width', 'speed', 'acceleration', 'space_headway')
INTEGER_COLUMNS = ('vehicle_id', 'frame_id', 'total_frames', 'global_time', 'vehicle_class', 'lane_id',
                   'preceding_vehicle_id', 'following_vehicle_id')
RECORD_COLUMNS = ('vehicle_id', 'frame_id', 'global_time', 'local_x', 'local_y', 'vehicle_length',
                  'vehicle_class', 'speed', 'acceleration', 'lane_id', 'preceding_vehicle_id',
                  'space_headway', 'time_headway')


def feet_to_meters(value):
    return value * METERS_PER_FOOT


def meters_to_feet(value):
    return value / METERS_PER_FOOT


@dataclass(frozen=True)
class NgsimRecord:
    """One NGSIM row with lengths in meters and speeds in m/s"""
    vehicle_id: int
    frame_id: int
    global_time: int
    local_x: float
    local_y: float
    vehicle_length: float
    vehicle_class: int
    speed: float
    acceleration: float
    lane_id: int
    preceding_vehicle_id: int
    space_headway: float
    time_headway: float


def parse_ngsim_frame(stream: Union[TextIO, Iterable[str]]) -> pd.DataFrame:
    """
    Parse NGSIM rows into a DataFrame with metric units.

    Rows may be whitespace or comma delimited; blank lines are ignored and
    columns past the 18th are dropped.

    Raises:
        NgsimParseError: A row has fewer than 18 fields or a non-numeric field
    """
    lines = pd.Series(list(stream), dtype=object)
    if lines.empty:
        return pd.DataFrame(columns=list(NGSIM_COLUMNS))
    numbers = pd.Series(np.arange(1, len(lines) + 1))
    stripped = lines.str.strip()
    keep = stripped.str.len() > 0
    stripped, numbers = stripped[keep], numbers[keep]
    if stripped.empty:
        return pd.DataFrame(columns=list(NGSIM_COLUMNS))

    tokens = stripped.str.split(r'[,\s]+', regex=True)
    counts = tokens.str.len()
    short = counts < len(NGSIM_COLUMNS)
    if short.any():
        i = short.idxmax()
        raise NgsimParseError(f"expected {len(NGSIM_COLUMNS)} columns, found {counts[i]}", int(numbers[i]))

    frame = pd.DataFrame(tokens.str[:len(NGSIM_COLUMNS)].tolist(), columns=list(NGSIM_COLUMNS))
    numeric = frame.apply(pd.to_numeric, errors='coerce')
    bad = numeric.isna().any(axis=1).to_numpy()
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        column = numeric.columns[numeric.iloc[i].isna()][0]
        raise NgsimParseError(f"non-numeric value '{frame.iloc[i][column]}' in column {column}",
                              int(numbers.iloc[i]))

    for col in INTEGER_COLUMNS:
        numeric[col] = numeric[col].astype(np.int64)
    for col in FEET_COLUMNS:
        numeric[col] = feet_to_meters(numeric[col].astype(float))

    fast = numeric['speed'] > SPEED_SANITY_MPS
    if fast.any():
        logger.warning("%d rows report speeds above %.0f m/s after unit conversion (first at line %d)",
                       int(fast.sum()), SPEED_SANITY_MPS, int(numbers.iloc[int(np.flatnonzero(fast)[0])]))
    return numeric


def parse_ngsim(stream: Union[TextIO, Iterable[str]]) -> List[NgsimRecord]:
    """Parse NGSIM rows into typed records (meters, m/s)"""
    frame = parse_ngsim_frame(stream)
    return [NgsimRecord(**row) for row in frame[list(RECORD_COLUMNS)].to_dict('records')]


def records_to_frame(records: Iterable[NgsimRecord]) -> pd.DataFrame:
    rows = [r.__dict__ for r in records]
    return pd.DataFrame(rows, columns=list(RECORD_COLUMNS))


@dataclass
class ExtractionRules:
    """
    Attributes:
        min_duration_s: Shortest accepted pair, frames x 0.1 s
        excluded_lanes: Lanes dropped outright (HOV lane)
        ramp_lane_min: Lanes at or above this number are dropped (merge/ramp)
        headway_mismatch_m: Cross-check tolerance against the recorded spacing
    """
    min_duration_s: float = 50.0
    excluded_lanes: Tuple[int, ...] = (1,)
    ramp_lane_min: int = 6
    headway_mismatch_m: float = 1.0

    def __post_init__(self):
        if self.min_duration_s < 0:
            raise InvalidInputError("min_duration_s must be non-negative")
        self.excluded_lanes = tuple(int(v) for v in self.excluded_lanes)

    def lane_allowed(self, lane: int) -> bool:
        return lane not in self.excluded_lanes and lane < self.ramp_lane_min


REJECTION_REASONS = ('leader_missing', 'discontinuous', 'lane_change', 'excluded_lane', 'too_short',
                     'nonpositive_headway')


@dataclass
class ExtractionSummary:
    """Counts of candidate leader runs by outcome"""
    min_duration_s: float
    candidates: int = 0
    accepted: int = 0
    rejected: Dict[str, int] = field(default_factory=lambda: {r: 0 for r in REJECTION_REASONS})
    headway_mismatch_rows: int = 0

    def to_dict(self) -> dict:
        return {
            'min_duration_s': self.min_duration_s,
            'candidates': self.candidates,
            'accepted': self.accepted,
            'rejected': dict(self.rejected),
            'headway_mismatch_rows': self.headway_mismatch_rows,
        }


def _leader_runs(follower: pd.DataFrame) -> List[pd.DataFrame]:
    """Split a follower's rows into runs of constant, nonzero preceding vehicle"""
    prec = follower['preceding_vehicle_id']
    run_id = (prec != prec.shift()).cumsum()
    return [run for _, run in follower.groupby(run_id, sort=False) if run['preceding_vehicle_id'].iloc[0] != 0]


def _check_run(run: pd.DataFrame, leader: pd.DataFrame, rules: ExtractionRules) -> str:
    frames = run['frame_id'].to_numpy()
    if len(leader) != len(run):
        return 'leader_missing'
    if len(frames) > 1 and np.any(np.diff(frames) != 1):
        return 'discontinuous'
    lanes = set(run['lane_id']) | set(leader['lane_id'])
    if len(lanes) != 1:
        return 'lane_change'
    if not rules.lane_allowed(lanes.pop()):
        return 'excluded_lane'
    if len(frames) * SAMPLE_INTERVAL < rules.min_duration_s - 1e-9:
        return 'too_short'
    return ''


def extract_pairs(records: Union[pd.DataFrame, Iterable[NgsimRecord]],
                  rules: ExtractionRules = None) -> Tuple[List[VehiclePair], ExtractionSummary]:
    """
    Extract qualifying leader-follower pairs.

    A pair is one maximal run of frames over which the follower reports the
    same preceding vehicle. It qualifies when the leader is recorded on every
    frame, frames are contiguous, both vehicles stay in one allowed lane and
    the run lasts at least ``rules.min_duration_s``.

    Returns:
        (pairs sorted by follower id then start time, extraction summary)
    """
    rules = rules or ExtractionRules()
    frame = records if isinstance(records, pd.DataFrame) else records_to_frame(records)
    summary = ExtractionSummary(min_duration_s=rules.min_duration_s)
    if frame.empty:
        return [], summary

    frame = frame.sort_values(['vehicle_id', 'frame_id'], kind='stable')
    by_vehicle_frame = frame.set_index(['vehicle_id', 'frame_id'])
    pairs = []
    rejected = Counter()

    for follower_id, follower in frame.groupby('vehicle_id', sort=True):
        for run in _leader_runs(follower):
            summary.candidates += 1
            leader_id = int(run['preceding_vehicle_id'].iloc[0])
            keys = pd.MultiIndex.from_arrays([np.full(len(run), leader_id), run['frame_id'].to_numpy()])
            leader = by_vehicle_frame.reindex(keys).dropna(subset=['local_y'])

            reason = _check_run(run, leader, rules)
            if not reason:
                pair, mismatches = _build_pair(int(follower_id), leader_id, run, leader, rules)
                if pair is None:
                    reason = 'nonpositive_headway'
                else:
                    summary.headway_mismatch_rows += mismatches
                    pairs.append(pair)
            if reason:
                rejected[reason] += 1
                logger.debug("Rejected follower %s behind %s from frame %d: %s",
                             follower_id, leader_id, int(run['frame_id'].iloc[0]), reason)

    summary.rejected.update(rejected)
    summary.accepted = len(pairs)
    logger.info("Extracted %d of %d candidate pairs", summary.accepted, summary.candidates)
    return pairs, summary


def _build_pair(follower_id: int, leader_id: int, run: pd.DataFrame, leader: pd.DataFrame,
                rules: ExtractionRules) -> Tuple[VehiclePair, int]:
    start = int(run['frame_id'].iloc[0])
    t0 = round(start * SAMPLE_INTERVAL, 1)
    leader_length = float(leader['vehicle_length'].median())
    lx = leader['local_y'].to_numpy(dtype=float)
    fx = run['local_y'].to_numpy(dtype=float)
    if np.any(lx - fx - leader_length <= 0):
        return None, 0

    recorded = run['space_headway'].to_numpy(dtype=float) - leader_length
    mismatch = np.abs((lx - fx - leader_length) - recorded) > rules.headway_mismatch_m
    if mismatch.any():
        logger.warning("Pair %d/%d: %d rows differ from the recorded spacing by more than %.1f m",
                       follower_id, leader_id, int(mismatch.sum()), rules.headway_mismatch_m)

    pair_id = f"{follower_id}_{leader_id}_{start}"
    lead = Trajectory.from_values(f"{leader_id}", t0, lx, v=leader['speed'].to_numpy(dtype=float),
                                  vehicle_length=leader_length)
    follow = Trajectory.from_values(f"{follower_id}", t0, fx, v=run['speed'].to_numpy(dtype=float),
                                    vehicle_length=float(run['vehicle_length'].median()))
    return VehiclePair.from_trajectories(lead, follow, pair_id=pair_id), int(mismatch.sum())
