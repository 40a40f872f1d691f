#!/usr/bin/env python3
"""
Core time-series and trajectory types for leader-follower data.

All series live on a uniform 0.1 s grid. Missing samples are carried as an
explicit boolean ``present`` mask next to the value array; values at missing
slots are NaN and are never read.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from errors import GapPolicyError, InvalidInputError

logger = logging.getLogger(__name__)

SAMPLE_INTERVAL = 0.1
DEFAULT_CONTEXT_S = 5.0
SHORT_GAP_LIMIT_S = 5.0
GRID_TOLERANCE = 1e-9
HEADWAY_TOLERANCE = 1e-6


def _frozen(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


def _split_missing(values: Sequence[Optional[float]]) -> Tuple[np.ndarray, np.ndarray]:
    """Turn a sequence with None/NaN holes into (values, present mask)"""
    raw = np.array([np.nan if v is None else v for v in values], dtype=float)
    present = np.isfinite(raw)
    raw[~present] = np.nan
    return raw, present


def _check_grid_time(t: float, h: float, what: str = 't'):
    if t < -GRID_TOLERANCE:
        raise InvalidInputError(f"{what}={t} is negative")
    steps = t / h
    if abs(steps - round(steps)) * h > GRID_TOLERANCE * max(1.0, abs(t)):
        raise InvalidInputError(f"{what}={t} is not a multiple of the sample interval {h}")


@dataclass(frozen=True)
class SamplePoint:
    """One sample slot of a trajectory: time, optional position and speed"""
    t: float
    x: Optional[float] = None
    v: Optional[float] = None

    def __post_init__(self):
        _check_grid_time(self.t, SAMPLE_INTERVAL)
        if self.x is not None and self.v is not None and self.v < 0:
            raise InvalidInputError(f"negative speed {self.v} at t={self.t}")


@dataclass(frozen=True)
class Trajectory:
    """
    Longitudinal trajectory of one vehicle on the 0.1 s grid.

    Attributes:
        id: Opaque vehicle identifier
        t0: Time of the first slot in seconds
        x: Positions in meters (NaN where missing)
        x_present: Presence mask for x
        v: Speeds in m/s (NaN where missing)
        v_present: Presence mask for v
        vehicle_length: Vehicle length in meters, if known
    """
    id: str
    t0: float
    x: np.ndarray
    x_present: np.ndarray
    v: np.ndarray = None
    v_present: np.ndarray = None
    vehicle_length: Optional[float] = None
    h: float = SAMPLE_INTERVAL

    def __post_init__(self):
        _check_grid_time(self.t0, self.h, 't0')
        x = _frozen(self.x)
        x_present = _frozen(self.x_present, dtype=bool)
        if x.shape != x_present.shape:
            raise InvalidInputError("x and its presence mask differ in length")
        if self.v is None:
            v = _frozen(np.full(x.shape, np.nan))
            v_present = _frozen(np.zeros(x.shape, dtype=bool), dtype=bool)
        else:
            v = _frozen(self.v)
            v_present = _frozen(self.v_present if self.v_present is not None else np.isfinite(v), dtype=bool)
        if v.shape != x.shape or v_present.shape != x.shape:
            raise InvalidInputError("speed channel length differs from position channel")
        if int(x_present.sum()) < 2:
            raise InvalidInputError(f"trajectory '{self.id}' needs at least 2 present samples")
        if np.any(v[v_present & x_present] < 0):
            raise InvalidInputError(f"trajectory '{self.id}' has negative speeds")
        object.__setattr__(self, 'x', x)
        object.__setattr__(self, 'x_present', x_present)
        object.__setattr__(self, 'v', v)
        object.__setattr__(self, 'v_present', v_present)

    @classmethod
    def from_values(cls, id: str, t0: float, x: Sequence[Optional[float]],
                    v: Optional[Sequence[Optional[float]]] = None,
                    vehicle_length: Optional[float] = None, h: float = SAMPLE_INTERVAL) -> 'Trajectory':
        """Build a trajectory from plain sequences where None or NaN marks a missing sample"""
        xs, xp = _split_missing(x)
        if v is None:
            return cls(id=id, t0=t0, x=xs, x_present=xp, vehicle_length=vehicle_length, h=h)
        vs, vp = _split_missing(v)
        return cls(id=id, t0=t0, x=xs, x_present=xp, v=vs, v_present=vp,
                   vehicle_length=vehicle_length, h=h)

    def __len__(self) -> int:
        return len(self.x)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.x)) * self.h

    @property
    def points(self) -> List[SamplePoint]:
        return [
            SamplePoint(t=round(float(t), 9),
                        x=float(x) if xp else None,
                        v=float(v) if vp else None)
            for t, x, xp, v, vp in zip(self.t, self.x, self.x_present, self.v, self.v_present)
        ]

    @property
    def has_speed(self) -> bool:
        return bool(np.all(self.v_present[self.x_present]))

    def replace(self, **changes) -> 'Trajectory':
        params = dict(id=self.id, t0=self.t0, x=self.x, x_present=self.x_present, v=self.v,
                      v_present=self.v_present, vehicle_length=self.vehicle_length, h=self.h)
        params.update(changes)
        return Trajectory(**params)

    def hide(self, first: int, last: int) -> 'Trajectory':
        """Return a copy with positions and speeds in [first, last] marked missing"""
        x, xp = self.x.copy(), self.x_present.copy()
        v, vp = self.v.copy(), self.v_present.copy()
        x[first:last + 1] = np.nan
        xp[first:last + 1] = False
        v[first:last + 1] = np.nan
        vp[first:last + 1] = False
        return self.replace(x=x, x_present=xp, v=v, v_present=vp)


@dataclass(frozen=True)
class HeadwaySeries:
    """Uniformly sampled bumper-to-bumper spacing with explicit missing samples"""
    t0: float
    s: np.ndarray
    present: np.ndarray
    h: float = SAMPLE_INTERVAL

    def __post_init__(self):
        s = _frozen(self.s)
        present = _frozen(self.present, dtype=bool)
        if s.ndim != 1 or len(s) == 0:
            raise InvalidInputError("headway series is empty")
        if s.shape != present.shape:
            raise InvalidInputError("headway values and presence mask differ in length")
        if len(s) < 2:
            raise InvalidInputError("headway series needs at least 2 samples")
        _check_grid_time(self.t0, self.h, 't0')
        observed = s[present]
        if not np.all(np.isfinite(observed)):
            raise InvalidInputError("present headway samples must be finite")
        if np.any(observed <= 0):
            bad = int(np.flatnonzero(present & ~(s > 0))[0])
            raise InvalidInputError(f"headway at index {bad} is not positive")
        object.__setattr__(self, 's', s)
        object.__setattr__(self, 'present', present)

    @classmethod
    def from_values(cls, t0: float, values: Sequence[Optional[float]], h: float = SAMPLE_INTERVAL) -> 'HeadwaySeries':
        s, present = _split_missing(values)
        return cls(t0=t0, s=s, present=present, h=h)

    def __len__(self) -> int:
        return len(self.s)

    @property
    def t(self) -> np.ndarray:
        return self.t0 + np.arange(len(self.s)) * self.h

    @property
    def is_complete(self) -> bool:
        return bool(self.present.all())

    def missing_indices(self) -> np.ndarray:
        return np.flatnonzero(~self.present)

    def observed(self, first: int, last: int) -> np.ndarray:
        """Values over [first, last]; every sample must be present"""
        if first < 0 or last >= len(self.s) or not self.present[first:last + 1].all():
            raise InvalidInputError(f"headway samples {first}..{last} are not all present")
        return self.s[first:last + 1].copy()

    def hide(self, first: int, last: int) -> 'HeadwaySeries':
        s, present = self.s.copy(), self.present.copy()
        s[first:last + 1] = np.nan
        present[first:last + 1] = False
        return HeadwaySeries(t0=self.t0, s=s, present=present, h=self.h)

    def fill(self, first: int, values: Sequence[float]) -> 'HeadwaySeries':
        """Return a copy with ``values`` written from index ``first`` on"""
        values = np.asarray(values, dtype=float)
        s, present = self.s.copy(), self.present.copy()
        s[first:first + len(values)] = values
        present[first:first + len(values)] = True
        return HeadwaySeries(t0=self.t0, s=s, present=present, h=self.h)


@dataclass(frozen=True)
class VehiclePair:
    """Leader and follower trajectories with the headway between them"""
    leader: Trajectory
    follower: Trajectory
    headway: HeadwaySeries
    pair_id: str = ''

    def __post_init__(self):
        n = len(self.headway)
        for traj in (self.leader, self.follower):
            if len(traj) != n or abs(traj.t0 - self.headway.t0) > GRID_TOLERANCE or traj.h != self.headway.h:
                raise InvalidInputError(f"pair '{self.pair_id}': trajectory '{traj.id}' is not on the headway grid")
        both = self.leader.x_present & self.follower.x_present & self.headway.present
        if both.any():
            expected = self.leader.x[both] - self.follower.x[both] - self.leader_length
            err = np.abs(self.headway.s[both] - expected)
            if err.max() > HEADWAY_TOLERANCE:
                worst = int(np.flatnonzero(both)[int(np.argmax(err))])
                raise InvalidInputError(
                    f"pair '{self.pair_id}': headway at index {worst} disagrees with positions by {err.max():.3g} m")

    @property
    def leader_length(self) -> float:
        return self.leader.vehicle_length or 0.0

    @classmethod
    def from_trajectories(cls, leader: Trajectory, follower: Trajectory, pair_id: str = '') -> 'VehiclePair':
        """Derive the headway channel from positions: s = x_leader - x_follower - L_leader"""
        present = leader.x_present & follower.x_present
        s = np.full(len(leader), np.nan)
        s[present] = leader.x[present] - follower.x[present] - (leader.vehicle_length or 0.0)
        series = HeadwaySeries(t0=leader.t0, s=s, present=present, h=leader.h)
        return cls(leader=leader, follower=follower, headway=series, pair_id=pair_id)

    def hide_gap(self, first: int, last: int) -> 'VehiclePair':
        """Hide headway and leader samples over [first, last]; follower stays observed"""
        return VehiclePair(leader=self.leader.hide(first, last), follower=self.follower,
                           headway=self.headway.hide(first, last), pair_id=self.pair_id)

    def with_headway(self, headway: HeadwaySeries) -> 'VehiclePair':
        return VehiclePair(leader=self.leader, follower=self.follower, headway=headway, pair_id=self.pair_id)


@dataclass(frozen=True)
class GapSpec:
    """
    One maximal run of missing samples with its before/after context windows.

    Windows are inclusive index ranges. ``reconstructable`` is False when a
    window crosses the series boundary or overlaps another gap.
    """
    first_missing_idx: int
    last_missing_idx: int
    before_window: Tuple[int, int]
    after_window: Tuple[int, int]
    h: float = SAMPLE_INTERVAL
    has_edges: bool = True
    reconstructable: bool = True
    reason: str = ''

    @property
    def n_missing(self) -> int:
        return self.last_missing_idx - self.first_missing_idx + 1

    @property
    def duration_s(self) -> float:
        return self.n_missing * self.h

    @property
    def indices(self) -> np.ndarray:
        return np.arange(self.first_missing_idx, self.last_missing_idx + 1)

    @property
    def context_samples(self) -> int:
        return self.before_window[1] - self.before_window[0] + 1


def _missing_runs(present: np.ndarray) -> List[Tuple[int, int]]:
    missing = np.concatenate(([0], (~present).astype(np.int8), [0]))
    edges = np.diff(missing)
    starts = np.flatnonzero(edges == 1)
    stops = np.flatnonzero(edges == -1) - 1
    return list(zip(starts.tolist(), stops.tolist()))


def detect_gaps(series: HeadwaySeries, required_context_s: float = DEFAULT_CONTEXT_S) -> List[GapSpec]:
    """
    Find every maximal run of missing samples and annotate its context windows.

    Args:
        series: Headway series to scan
        required_context_s: Length of each context window in seconds

    Returns:
        GapSpec list in time order; gaps whose windows are not fully observed
        are returned with ``reconstructable=False``
    """
    if series is None or len(series) == 0:
        raise InvalidInputError("cannot detect gaps in an empty series")
    if required_context_s < 0:
        raise InvalidInputError("context length must be non-negative")

    n = len(series)
    ctx = int(round(required_context_s / series.h))
    gaps = []
    for first, last in _missing_runs(series.present):
        before = (first - ctx, first - 1)
        after = (last + 1, last + ctx)
        has_edges = first > 0 and last < n - 1
        reason = ''
        if before[0] < 0 or after[1] > n - 1:
            reason = 'context window crosses the series boundary'
        elif not (series.present[before[0]:before[1] + 1].all() and series.present[after[0]:after[1] + 1].all()):
            reason = 'context window overlaps another gap'
        gaps.append(GapSpec(first_missing_idx=first, last_missing_idx=last,
                            before_window=before, after_window=after, h=series.h,
                            has_edges=has_edges, reconstructable=not reason, reason=reason))
    logger.debug("Detected %d gaps (%d reconstructable)", len(gaps), sum(g.reconstructable for g in gaps))
    return gaps


def straight_line(series: HeadwaySeries, gap: GapSpec) -> np.ndarray:
    """Values of the straight line between the two samples bracketing the gap"""
    a, b = gap.first_missing_idx - 1, gap.last_missing_idx + 1
    if a < 0 or b >= len(series) or not (series.present[a] and series.present[b]):
        raise InvalidInputError(f"gap {gap.first_missing_idx}..{gap.last_missing_idx} lacks observed edge samples")
    s_a, s_b = series.s[a], series.s[b]
    frac = (gap.indices - a) / (b - a)
    return s_a + (s_b - s_a) * frac


def linear_fill(series: HeadwaySeries, gap: GapSpec, limit_s: float = SHORT_GAP_LIMIT_S) -> HeadwaySeries:
    """
    Fill a short gap by linear interpolation between its edge samples.

    Raises:
        GapPolicyError: The gap is as long as or longer than ``limit_s``
    """
    if gap.duration_s >= limit_s - GRID_TOLERANCE:
        raise GapPolicyError(
            f"gap of {gap.duration_s:.1f} s is not shorter than {limit_s:.1f} s; use model-based reconstruction")
    return series.fill(gap.first_missing_idx, straight_line(series, gap))


def estimate_speed(traj: Trajectory) -> Trajectory:
    """
    Populate speeds by finite differences of position.

    Central differences on interior samples, one-sided at the ends of the
    present range, clamped at zero.
    """
    idx = np.flatnonzero(traj.x_present)
    if len(idx) < 2:
        raise InvalidInputError(f"trajectory '{traj.id}' has fewer than 2 present positions")
    first, last = int(idx[0]), int(idx[-1])
    if last - first + 1 != len(idx):
        raise InvalidInputError(f"trajectory '{traj.id}' positions are not contiguous")
    v = np.full(len(traj), np.nan)
    v[first:last + 1] = np.maximum(np.gradient(traj.x[first:last + 1], traj.h), 0.0)
    return traj.replace(v=v, v_present=traj.x_present.copy())


def ensure_speed(traj: Trajectory) -> Trajectory:
    return traj if traj.has_speed else estimate_speed(traj)
