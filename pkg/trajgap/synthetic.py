#!/usr/bin/env python3
"""
Synthetic leader-follower data and box-target scans for tests and demos.
"""

import math
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from cf_models import CarFollowingModel, FollowerState, GippsModel, GippsParams, simulate_follower
from errors import InvalidInputError
from scan_extract import PointScan
from traj_core import SAMPLE_INTERVAL, HeadwaySeries, Trajectory, VehiclePair

DEFAULT_LEADER_LENGTH = 4.5
BOX_HALF_WIDTH = 0.8
BOX_COLUMNS = 9
BOX_ROWS = (0.6, 1.0, 1.4)
MAX_RANGE_M = 100.0


def perturbed_leader(duration_s: float, v_mean: float = 12.0, amplitude: float = 0.3, period_s: float = 60.0,
                     phase: float = 0.0, x0: float = 100.0, length: float = DEFAULT_LEADER_LENGTH,
                     t0: float = 0.0, vehicle_id: str = 'leader') -> Trajectory:
    """Leader cruising at ``v_mean`` with a sinusoidal speed perturbation"""
    if amplitude >= v_mean:
        raise InvalidInputError("perturbation amplitude must stay below the mean speed")
    n = int(round(duration_s / SAMPLE_INTERVAL)) + 1
    t = np.arange(n) * SAMPLE_INTERVAL
    v = v_mean + amplitude * np.sin(2.0 * math.pi * t / period_s + phase)
    x = x0 + np.concatenate(([0.0], np.cumsum(0.5 * (v[1:] + v[:-1]) * SAMPLE_INTERVAL)))
    return Trajectory(id=vehicle_id, t0=t0, x=x, x_present=np.ones(n, dtype=bool),
                      v=v, v_present=np.ones(n, dtype=bool), vehicle_length=length)


def simulate_pair(model: CarFollowingModel, leader: Trajectory, init: FollowerState,
                  pair_id: str = 'synthetic') -> VehiclePair:
    """Simulate a follower behind ``leader`` over the leader's full length"""
    follower = simulate_follower(model, leader, init, len(leader) - 1)
    return VehiclePair.from_trajectories(leader, follower.replace(id=f"{pair_id}:follower"), pair_id=pair_id)


def gipps_pair(params: GippsParams, duration_s: float = 120.0, seed: int = 0, v_mean: float = 12.0,
               amplitude: float = 0.3, period_s: float = 60.0, pair_id: Optional[str] = None) -> VehiclePair:
    """
    Gipps follower behind a perturbed leader, starting at the steady spacing
    s0 + v * dt_r. ``seed`` picks the perturbation phase.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    leader = perturbed_leader(duration_s, v_mean, amplitude, period_s, phase=float(rng.uniform(0, 2 * math.pi)))
    v_start = float(leader.v[0])
    spacing = params.s0 + v_start * params.dt_r
    init = FollowerState(x=float(leader.x[0]) - leader.vehicle_length - spacing, v=v_start)
    return simulate_pair(GippsModel(params), leader, init, pair_id or f"gipps_{seed}")


def box_scans(headway: Sequence[Optional[float]], noise: float = 0.05, seed: int = 0, first_id: int = 0,
              max_range: float = MAX_RANGE_M, clutter: bool = True) -> List[PointScan]:
    """
    One scan per headway value with a box target whose rear face sits at the
    headway distance. Each target point gets uniform range noise in
    [-noise, noise]. Values that are None or beyond ``max_range`` produce
    scans without a target.
    """
    rng = np.random.Generator(np.random.PCG64(seed))
    xs = np.linspace(-BOX_HALF_WIDTH, BOX_HALF_WIDTH, BOX_COLUMNS)
    grid_x, grid_z = np.meshgrid(xs, BOX_ROWS)
    grid_x, grid_z = grid_x.ravel(), grid_z.ravel()
    scans = []
    for i, s in enumerate(headway):
        parts = []
        if s is not None and np.isfinite(s) and s <= max_range:
            y = s + rng.uniform(-noise, noise, len(grid_x))
            parts.append(np.column_stack((grid_x, y, grid_z)))
        if clutter:
            parts.append(_clutter(rng))
        points = np.vstack(parts) if parts else np.zeros((0, 3))
        scans.append(PointScan(first_id + i, points))
    return scans


def _clutter(rng: np.random.Generator) -> np.ndarray:
    """Points every filter stage removes: ground, overhead, behind and off-lane"""
    ground = np.column_stack((rng.uniform(-1.5, 1.5, 6), rng.uniform(2, 40, 6), rng.uniform(-0.2, 0.1, 6)))
    overhead = np.column_stack((rng.uniform(-1.5, 1.5, 4), rng.uniform(5, 60, 4), rng.uniform(4.0, 6.0, 4)))
    behind = np.column_stack((rng.uniform(-1.0, 1.0, 4), rng.uniform(-15, -3, 4), rng.uniform(0.5, 1.5, 4)))
    side = np.column_stack((rng.choice([-1, 1], 4) * rng.uniform(3, 6, 4), rng.uniform(3, 30, 4),
                            rng.uniform(0.5, 1.5, 4)))
    return np.vstack((ground, overhead, behind, side))


def headway_with_gaps(values: Sequence[float], gaps: Iterable[Tuple[int, int]]) -> List[Optional[float]]:
    """Copy of ``values`` with the inclusive index ranges set to None"""
    out: List[Optional[float]] = [float(v) for v in values]
    for first, last in gaps:
        for i in range(first, last + 1):
            out[i] = None
    return out


def constant_headway(value: float, n: int, t0: float = 0.0) -> HeadwaySeries:
    return HeadwaySeries.from_values(t0, [value] * n)
