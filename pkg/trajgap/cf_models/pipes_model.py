"""Pipes' safe-distance model"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from traj_core import Trajectory
from .base_model import (CarFollowingModel, FollowerState, ModelParams, check_spacing,
                         follower_trajectory, leader_over)


@dataclass(frozen=True)
class PipesParams(ModelParams):
    """
    Attributes:
        b_clear: Standstill gap to the leader rear (m)
        T: Time headway (s)
    """
    b_clear: float
    T: float

    def __post_init__(self):
        self._require_positive()


class PipesModel(CarFollowingModel):
    """Spacing grows linearly with follower speed: s = b_clear + T * v"""

    TAG = 'pipes'
    PARAMS = PipesParams

    def simulate(self, leader: Trajectory, init: FollowerState, horizon: int) -> Trajectory:
        """
        Solve the distance law for the follower position each step with the
        follower speed taken as a backward difference; the follower never
        reverses.
        """
        leader = leader_over(leader, horizon)
        p = self.params
        h = leader.h
        length = leader.vehicle_length or 0.0
        ratio = p.T / h
        x = np.empty(horizon + 1)
        v = np.empty(horizon + 1)
        x[0], v[0] = init.x, init.v
        for k in range(horizon):
            target = (leader.x[k + 1] - length - p.b_clear + ratio * x[k]) / (1.0 + ratio)
            if target < x[k]:
                target = x[k]
            x[k + 1] = target
            v[k + 1] = (x[k + 1] - x[k]) / h
        check_spacing(self.get_name(), leader.x[:horizon + 1] - x - length)
        return follower_trajectory(leader, x, v)

    def raw_headway(self, follower: Trajectory, first: int, last: int,
                    anchor: float, anchor_prev: Optional[float]) -> np.ndarray:
        v = follower.v[first:last + 1]
        return self.params.b_clear + self.params.T * v
