#!/usr/bin/env python3
"""
Gap reconstruction pipeline.

Short gaps are filled by linear interpolation. Longer gaps get a
car-following model calibrated on their context windows; the model's
headway prediction starts at the pre-gap edge and is bent onto the far edge
by the smooth transition blend.
"""

import logging
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from calibration import CalibrationResult, GaConfig, derive_seed, ga_calibrate
from cf_models import DEFAULT_BOUNDS, MODEL_TAGS, ModelFactory, predict_headway
from cf_models.gipps_model import LEADER_SPEED_MODES
from errors import CalibrationFailedError, InvalidInputError, TrajGapError
from traj_core import (DEFAULT_CONTEXT_S, GRID_TOLERANCE, SHORT_GAP_LIMIT_S, GapSpec, HeadwaySeries,
                       VehiclePair, detect_gaps, linear_fill, straight_line)

logger = logging.getLogger(__name__)

BLEND_SCHEDULES = ('linear', 'linear-settle', 'cosine')


@dataclass
class ReconstructionConfig:
    """Gap policy and transition settings"""
    short_gap_limit: float = SHORT_GAP_LIMIT_S
    context_length: float = DEFAULT_CONTEXT_S
    slope_threshold: float = 0.5
    blend_schedule: str = 'linear'
    model: str = 'gipps'
    leader_speed: str = 'follower'

    def __post_init__(self):
        if not self.short_gap_limit > 0:
            raise InvalidInputError(f"short_gap_limit must be > 0, got {self.short_gap_limit}")
        if not self.context_length > 0:
            raise InvalidInputError(f"context_length must be > 0, got {self.context_length}")
        if not self.slope_threshold > 0:
            raise InvalidInputError(f"slope_threshold must be > 0, got {self.slope_threshold}")
        if self.blend_schedule not in BLEND_SCHEDULES:
            raise InvalidInputError(f"unknown blend schedule '{self.blend_schedule}'")
        if self.leader_speed not in LEADER_SPEED_MODES:
            raise InvalidInputError(f"unknown leader speed mode '{self.leader_speed}'")
        ModelFactory.resolve_models(self.model)

    def model_options(self, tag: str) -> dict:
        return {'leader_speed': self.leader_speed} if tag == 'gipps' else {}


@dataclass(frozen=True)
class BlendWeights:
    """Blend weights over the reshaped region [start, N - 1] of a gap"""
    start: int
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        if len(w) < 2:
            raise InvalidInputError("a blend region spans at least two samples")
        if w[0] != 1.0 or w[-1] != 0.0:
            raise InvalidInputError("blend weights must run from 1 to 0")
        if np.any(np.diff(w) > 0) or np.any(w < 0) or np.any(w > 1):
            raise InvalidInputError("blend weights must be non-increasing within [0, 1]")
        w.flags.writeable = False
        object.__setattr__(self, 'weights', w)


def blend_weights(start: int, n_samples: int, schedule: str = 'linear') -> BlendWeights:
    """
    Weights for samples start..n_samples-1, falling from 1 at ``start``.

    ``linear`` reaches 0 at the last sample. ``linear-settle`` and ``cosine``
    reach 0 at the second-to-last sample and stay 0 at the last one, so the
    final segment follows the connecting line.
    """
    if not 0 <= start <= n_samples - 2:
        raise InvalidInputError(f"blend start {start} outside 0..{n_samples - 2}")
    if schedule not in BLEND_SCHEDULES:
        raise InvalidInputError(f"unknown blend schedule '{schedule}'")
    if schedule == 'linear':
        span = n_samples - 1 - start
        return BlendWeights(start, 1.0 - np.arange(span + 1) / span)
    ramp = n_samples - 2 - start
    if ramp == 0:
        return BlendWeights(start, np.array([1.0, 0.0]))
    j = np.arange(ramp + 1) / ramp
    if schedule == 'linear-settle':
        w = 1.0 - j
    else:
        w = 0.5 * (1.0 + np.cos(np.pi * j))
        w[-1] = 0.0
    return BlendWeights(start, np.append(w, 0.0))


@dataclass(frozen=True)
class TransitionResult:
    values: np.ndarray
    reshape_start: int
    line_slope: float
    whole_gap_blend: bool = False


def smooth_transition(predicted, s_end: float, edge_slope: float, threshold: float,
                      h: float = 0.1, schedule: str = 'linear') -> TransitionResult:
    """
    Reconnect a gap prediction to the far-edge value ``s_end``.

    Lines are drawn from ``s_end`` at the final gap sample back to each
    predicted point, nearest first; the first point whose line slope is
    within ``threshold`` of ``edge_slope`` starts the reshape. From there the
    prediction is blended into that line.

    Returns:
        TransitionResult; ``whole_gap_blend`` is set when no point qualified
        and the blend starts at the first gap sample
    """
    predicted = np.asarray(predicted, dtype=float)
    if predicted.ndim != 1 or len(predicted) == 0:
        raise InvalidInputError("prediction over the gap is empty")
    if not (np.all(np.isfinite(predicted)) and np.isfinite(s_end) and np.isfinite(edge_slope)):
        raise InvalidInputError("smooth transition needs finite inputs")
    n = len(predicted)
    if n == 1:
        return TransitionResult(values=np.array([float(s_end)]), reshape_start=0, line_slope=float(edge_slope))

    start, whole_gap = None, False
    for k in range(n - 2, -1, -1):
        slope = (s_end - predicted[k]) / ((n - 1 - k) * h)
        if abs(slope - edge_slope) < threshold:
            start = k
            break
    if start is None:
        start, whole_gap = 0, True
        logger.debug("No reshape point within %.3f m/s of edge slope %.3f; blending the whole gap",
                     threshold, edge_slope)
    slope = (s_end - predicted[start]) / ((n - 1 - start) * h)

    blend = blend_weights(start, n, schedule)
    line = s_end - slope * (n - 1 - np.arange(start, n)) * h
    out = predicted.copy()
    out[start:] = blend.weights * predicted[start:] + (1.0 - blend.weights) * line
    out[-1] = s_end
    return TransitionResult(values=out, reshape_start=start, line_slope=float(slope), whole_gap_blend=whole_gap)


@dataclass
class GapRecord:
    """Diagnostic row for one gap"""
    pair_id: str
    first_idx: int
    last_idx: int
    gap_len_s: float
    method: str
    model: str = ''
    cost: float = float('nan')
    evaluations: int = 0
    reshape_start: int = -1
    whole_gap_blend: bool = False
    note: str = ''

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class GapReconstruction:
    """Filled values for one gap (None when skipped) plus diagnostics"""
    values: Optional[np.ndarray]
    record: GapRecord
    calibrations: List[CalibrationResult] = field(default_factory=list)

    @property
    def filled(self) -> bool:
        return self.values is not None


def _edge_values(series: HeadwaySeries, gap: GapSpec) -> Tuple[float, float, Optional[float], float]:
    first, last = gap.first_missing_idx, gap.last_missing_idx
    anchor = float(series.s[first - 1])
    anchor_prev = float(series.s[first - 2]) if first >= 2 and series.present[first - 2] else None
    s_end = float(series.s[last + 1])
    edge_slope = 0.0
    if last + 2 < len(series) and series.present[last + 2]:
        edge_slope = (float(series.s[last + 2]) - s_end) / series.h
    return anchor, s_end, anchor_prev, edge_slope


def _record(pair: VehiclePair, gap: GapSpec, method: str, **extra) -> GapRecord:
    return GapRecord(pair_id=pair.pair_id, first_idx=gap.first_missing_idx, last_idx=gap.last_missing_idx,
                     gap_len_s=round(gap.duration_s, 9), method=method, **extra)


def reconstruct_gap(pair: VehiclePair, gap: GapSpec, cfg: ReconstructionConfig = None, ga: GaConfig = None,
                    bounds: Dict[str, Dict[str, Tuple[float, float]]] = None,
                    gap_index: Optional[int] = None) -> GapReconstruction:
    """
    Fill one gap of ``pair.headway``.

    Args:
        pair: Pair with the gap hidden in its headway channel
        gap: Gap as returned by detect_gaps
        cfg: Policy and transition settings
        ga: GA settings; ``ga.seed`` is the global seed
        bounds: Per-model parameter bounds, defaults to DEFAULT_BOUNDS
        gap_index: Key mixed into the per-model seed, defaults to the gap start

    Returns:
        GapReconstruction with the values for gap.first..gap.last
    """
    cfg = cfg or ReconstructionConfig()
    ga = ga or GaConfig()
    bounds = bounds or DEFAULT_BOUNDS
    series = pair.headway

    if gap.duration_s < cfg.short_gap_limit - GRID_TOLERANCE:
        if not gap.has_edges:
            return GapReconstruction(None, _record(pair, gap, 'skipped', note='gap touches the series boundary'))
        filled = linear_fill(series, gap, cfg.short_gap_limit)
        return GapReconstruction(filled.s[gap.first_missing_idx:gap.last_missing_idx + 1].copy(),
                                 _record(pair, gap, 'linear'))
    if not gap.reconstructable:
        return GapReconstruction(None, _record(pair, gap, 'skipped', note=gap.reason))

    key = gap.first_missing_idx if gap_index is None else gap_index
    results = []
    for tag in ModelFactory.resolve_models(cfg.model):
        seed = derive_seed(ga.seed, pair.pair_id, key, tag)
        try:
            results.append(ga_calibrate(tag, pair, gap, bounds[tag], ga, seed=seed,
                                        model_options=cfg.model_options(tag)))
        except CalibrationFailedError as e:
            logger.warning("%s", e)
    evaluations = sum(r.evaluations for r in results)

    if not results:
        return GapReconstruction(straight_line(series, gap),
                                 _record(pair, gap, 'linear-fallback', model=cfg.model,
                                         note='calibration failed for every model'))

    best = min(results, key=lambda r: (r.cost, MODEL_TAGS.index(r.model)))
    anchor, s_end, anchor_prev, edge_slope = _edge_values(series, gap)
    model = ModelFactory.create(best.model, best.params, **cfg.model_options(best.model))
    try:
        predicted = predict_headway(model, pair.follower, gap, anchor, anchor_prev)
    except TrajGapError as e:
        logger.warning("Prediction through gap %d..%d failed (%s); using linear fill",
                       gap.first_missing_idx, gap.last_missing_idx, e)
        return GapReconstruction(straight_line(series, gap),
                                 _record(pair, gap, 'linear-fallback', model=best.model, cost=best.cost,
                                         evaluations=evaluations, note=str(e)),
                                 results)

    transition = smooth_transition(predicted, s_end, edge_slope, cfg.slope_threshold, series.h, cfg.blend_schedule)
    record = _record(pair, gap, 'model', model=best.model, cost=best.cost, evaluations=evaluations,
                     reshape_start=gap.first_missing_idx + transition.reshape_start,
                     whole_gap_blend=transition.whole_gap_blend)
    return GapReconstruction(transition.values, record, results)


@dataclass
class PairReconstruction:
    headway: HeadwaySeries
    gaps: List[GapReconstruction]

    @property
    def records(self) -> List[GapRecord]:
        return [g.record for g in self.gaps]


def fill_pair(pair: VehiclePair, headway: HeadwaySeries) -> VehiclePair:
    """Attach a filled headway channel; leader positions follow it wherever the follower is observed"""
    newly = headway.present & ~pair.headway.present & pair.follower.x_present & ~pair.leader.x_present
    leader = pair.leader
    if newly.any():
        x, xp = leader.x.copy(), leader.x_present.copy()
        x[newly] = pair.follower.x[newly] + headway.s[newly] + pair.leader_length
        xp[newly] = True
        v_present = leader.v_present & leader.x_present
        leader = leader.replace(x=x, x_present=xp, v=np.where(v_present, leader.v, np.nan), v_present=v_present)
    return VehiclePair(leader=leader, follower=pair.follower, headway=headway, pair_id=pair.pair_id)


def reconstruct_pair(pair: VehiclePair, cfg: ReconstructionConfig = None, ga: GaConfig = None,
                     bounds: Dict[str, Dict[str, Tuple[float, float]]] = None) -> PairReconstruction:
    """
    Fill every gap of a recorded pair in time order.

    Gaps that cannot be reconstructed stay missing and get a skip record.
    """
    cfg = cfg or ReconstructionConfig()
    series = pair.headway
    outcomes = []
    filled = series
    for gap in detect_gaps(series, cfg.context_length):
        outcome = reconstruct_gap(pair, gap, cfg, ga, bounds)
        outcomes.append(outcome)
        if outcome.filled:
            filled = filled.fill(gap.first_missing_idx, outcome.values)
    logger.info("Pair '%s': %d gaps, %d filled", pair.pair_id, len(outcomes), sum(o.filled for o in outcomes))
    return PairReconstruction(headway=filled, gaps=outcomes)


def reconstruct_headway(series: HeadwaySeries, cfg: ReconstructionConfig = None,
                        series_id: str = '') -> PairReconstruction:
    """
    Fill a headway-only series. Without follower kinematics only short gaps
    can be filled; longer gaps get a skip record.
    """
    cfg = cfg or ReconstructionConfig()
    outcomes = []
    filled = series
    for gap in detect_gaps(series, cfg.context_length):
        record = GapRecord(pair_id=series_id, first_idx=gap.first_missing_idx, last_idx=gap.last_missing_idx,
                           gap_len_s=round(gap.duration_s, 9), method='skipped')
        if gap.duration_s < cfg.short_gap_limit - GRID_TOLERANCE and gap.has_edges:
            record.method = 'linear'
            values = straight_line(series, gap)
            filled = filled.fill(gap.first_missing_idx, values)
            outcomes.append(GapReconstruction(values, record))
            continue
        record.note = gap.reason if not gap.has_edges else 'follower kinematics unavailable'
        outcomes.append(GapReconstruction(None, record))
    return PairReconstruction(headway=filled, gaps=outcomes)
