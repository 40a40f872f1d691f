"""Newell's lower-order model: the follower replays the leader shifted in time and space"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from traj_core import Trajectory
from .base_model import (CarFollowingModel, FollowerState, ModelParams, check_spacing,
                         follower_trajectory, follower_window, leader_over)


@dataclass(frozen=True)
class NewellParams(ModelParams):
    """
    Attributes:
        tau: Time translation (s)
        d: Distance translation (m)
    """
    tau: float
    d: float

    def __post_init__(self):
        self._require_positive()


def _shifted(times: np.ndarray, x: np.ndarray, v: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Linear interpolation of x at ``query``, extrapolated at constant end speed"""
    out = np.interp(query, times, x)
    before = query < times[0]
    after = query > times[-1]
    out[before] = x[0] + v[0] * (query[before] - times[0])
    out[after] = x[-1] + v[-1] * (query[after] - times[-1])
    return out


class NewellModel(CarFollowingModel):
    """x_f(t + tau) = x_l(t) - d"""

    TAG = 'newell'
    PARAMS = NewellParams

    def simulate(self, leader: Trajectory, init: FollowerState, horizon: int) -> Trajectory:
        """
        Translate the leader trajectory. Before ``tau`` has elapsed the
        follower keeps the initial speed.
        """
        leader = leader_over(leader, horizon)
        p = self.params
        h = leader.h
        rel = np.arange(horizon + 1) * h
        lead_x = leader.x[:horizon + 1]
        lead_v = leader.v[:horizon + 1]
        translated = rel >= p.tau - 1e-12
        x = init.x + init.v * rel
        v = np.full(horizon + 1, init.v)
        x[translated] = np.interp(rel[translated] - p.tau, rel, lead_x) - p.d
        v[translated] = np.interp(rel[translated] - p.tau, rel, lead_v)
        check_spacing(self.get_name(), lead_x - x - (leader.vehicle_length or 0.0))
        return follower_trajectory(leader, x, v)

    def raw_headway(self, follower: Trajectory, first: int, last: int,
                    anchor: float, anchor_prev: Optional[float]) -> np.ndarray:
        p = self.params
        h = follower.h
        pad = int(math.ceil(p.tau / h)) + 1
        x, v, off = follower_window(follower, first, last, pad=pad)
        times = (np.arange(len(x)) - off) * h
        now = np.arange(last - first + 1) * h
        ahead = _shifted(times, x, v, now + p.tau)
        return ahead - x[off:off + len(now)] + p.d
