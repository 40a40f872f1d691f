#!/usr/bin/env python3
"""
Canonical pair file reader and writer.

One row per 0.1 s sample with columns
``t_s, leader_x_m, follower_x_m, follower_v_mps, headway_m``; an empty field
is a missing sample and the header row is mandatory.
"""

import logging
import os
from typing import Optional

import numpy as np
import pandas as pd

from errors import InvalidInputError
from traj_core import SAMPLE_INTERVAL, HeadwaySeries, Trajectory, VehiclePair

logger = logging.getLogger(__name__)

PAIR_COLUMNS = ['t_s', 'leader_x_m', 'follower_x_m', 'follower_v_mps', 'headway_m']
GRID_CHECK = 1e-6


def _read_table(path: str) -> pd.DataFrame:
    if not os.path.exists(path):
        raise FileNotFoundError(f"Pair file not found: {path}")
    try:
        frame = pd.read_csv(path, skipinitialspace=True)
    except pd.errors.EmptyDataError:
        raise InvalidInputError(f"{path}: file is empty, a header row is required")
    frame.columns = [c.strip() for c in frame.columns]
    missing = [c for c in PAIR_COLUMNS if c not in frame.columns]
    if missing:
        raise InvalidInputError(f"{path}: missing columns {missing}")
    if len(frame) < 2:
        raise InvalidInputError(f"{path}: at least 2 rows are required")
    t = frame['t_s'].to_numpy(dtype=float)
    if not np.all(np.abs(np.diff(t) - SAMPLE_INTERVAL) < GRID_CHECK):
        bad = int(np.flatnonzero(np.abs(np.diff(t) - SAMPLE_INTERVAL) >= GRID_CHECK)[0]) + 2
        raise InvalidInputError(f"{path}: row {bad} breaks the {SAMPLE_INTERVAL} s grid")
    return frame


def _grid_t0(frame: pd.DataFrame) -> float:
    t0 = float(frame['t_s'].iloc[0])
    return round(round(t0 / SAMPLE_INTERVAL) * SAMPLE_INTERVAL, 9)


def _pair_id(path: str) -> str:
    return os.path.splitext(os.path.basename(path))[0]


def read_headway_file(path: str) -> HeadwaySeries:
    """Load only the headway channel of a pair file"""
    frame = _read_table(path)
    return HeadwaySeries.from_values(_grid_t0(frame), frame['headway_m'].to_numpy(dtype=float))


def has_positions(path: str) -> bool:
    frame = _read_table(path)
    return bool(frame['leader_x_m'].notna().sum() >= 2 and frame['follower_x_m'].notna().sum() >= 2)


def read_pair_file(path: str, pair_id: Optional[str] = None) -> VehiclePair:
    """
    Load a leader-follower pair.

    The leader length is not stored in the file; it is recovered as the
    median of ``leader_x - follower_x - headway`` over fully observed rows.
    """
    frame = _read_table(path)
    t0 = _grid_t0(frame)
    lx = frame['leader_x_m'].to_numpy(dtype=float)
    fx = frame['follower_x_m'].to_numpy(dtype=float)
    fv = frame['follower_v_mps'].to_numpy(dtype=float)
    s = frame['headway_m'].to_numpy(dtype=float)

    both = np.isfinite(lx) & np.isfinite(fx) & np.isfinite(s)
    leader_length = float(np.median(lx[both] - fx[both] - s[both])) if both.any() else None
    pid = pair_id or _pair_id(path)
    try:
        leader = Trajectory.from_values(f"{pid}:leader", t0, lx, vehicle_length=leader_length)
        follower = Trajectory.from_values(f"{pid}:follower", t0, fx, v=fv)
    except InvalidInputError as e:
        raise InvalidInputError(f"{path}: {e}")
    return VehiclePair(leader=leader, follower=follower,
                       headway=HeadwaySeries.from_values(t0, s), pair_id=pid)


def _column(values: np.ndarray, present: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=float, copy=True)
    out[~present] = np.nan
    return out


def _write(path: str, t: np.ndarray, columns: dict):
    frame = pd.DataFrame({'t_s': np.round(t, 9), **columns}, columns=PAIR_COLUMNS)
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, na_rep='')


def write_pair_file(path: str, pair: VehiclePair):
    """Write a pair in the canonical format"""
    n = len(pair.headway)
    _write(path, pair.headway.t, {
        'leader_x_m': _column(pair.leader.x, pair.leader.x_present),
        'follower_x_m': _column(pair.follower.x, pair.follower.x_present),
        'follower_v_mps': _column(pair.follower.v, pair.follower.v_present & pair.follower.x_present),
        'headway_m': _column(pair.headway.s, pair.headway.present),
    })
    logger.debug("Wrote %d rows to %s", n, path)


def write_headway_file(path: str, series: HeadwaySeries):
    """Write a headway-only series; position and speed columns stay empty"""
    empty = np.full(len(series), np.nan)
    _write(path, series.t, {
        'leader_x_m': empty,
        'follower_x_m': empty,
        'follower_v_mps': empty,
        'headway_m': _column(series.s, series.present),
    })
