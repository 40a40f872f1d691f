"""Gipps' safe-speed car-following model"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import CollisionError, InvalidInputError
from traj_core import Trajectory
from .base_model import CarFollowingModel, ModelParams, follower_window

LEADER_SPEED_MODES = ('follower', 'edge')


@dataclass(frozen=True)
class GippsParams(ModelParams):
    """
    Attributes:
        v0: Desired speed (m/s)
        a: Maximum acceleration (m/s^2)
        b: Comfortable deceleration, positive (m/s^2)
        s0: Minimum spacing (m)
        dt_r: Reaction time used inside the safe speed (s)
    """
    v0: float
    a: float
    b: float
    s0: float
    dt_r: float

    def __post_init__(self):
        self._require_positive()
        if self.v0 > 60:
            raise InvalidInputError(f"GippsParams.v0 must be <= 60 m/s, got {self.v0}")
        if not 0.3 <= self.dt_r <= 3.0:
            raise InvalidInputError(f"GippsParams.dt_r must be in [0.3, 3.0] s, got {self.dt_r}")


def safe_speed(p: GippsParams, s: float, v_l: float) -> float:
    """Safe speed for spacing ``s`` behind a leader at ``v_l``; radicand clamped at 0"""
    bt = p.b * p.dt_r
    radicand = bt * bt + v_l * v_l + 2.0 * p.b * (s - p.s0)
    return -bt + math.sqrt(max(radicand, 0.0))


def gipps_step(p: GippsParams, v: float, s: float, v_l: float, h: float = 0.1) -> float:
    """
    Next follower speed: min(v + a*h, v0, v_safe(s, v_l)), never negative.

    Raises:
        CollisionError: Spacing is zero or negative
    """
    if s <= 0:
        raise CollisionError(f"gipps: spacing {s:.3f} m is not positive")
    return max(0.0, min(v + p.a * h, p.v0, safe_speed(p, s, v_l)))


class GippsModel(CarFollowingModel):
    """
    Gipps' model.

    The predictor inverts the safe-speed law for the spacing that makes the
    observed next speed safe. Samples where the free-flow branch binds carry
    no spacing information and hold the previous prediction.
    """

    TAG = 'gipps'
    PARAMS = GippsParams

    def __init__(self, params: GippsParams, leader_speed: str = 'follower'):
        super().__init__(params)
        if leader_speed not in LEADER_SPEED_MODES:
            raise InvalidInputError(f"unknown leader speed mode '{leader_speed}'")
        self.leader_speed = leader_speed

    def next_speed(self, v: float, s: float, v_l: float, h: float) -> float:
        return gipps_step(self.params, v, s, v_l, h)

    def raw_headway(self, follower: Trajectory, first: int, last: int,
                    anchor: float, anchor_prev: Optional[float]) -> np.ndarray:
        p = self.params
        h = follower.h
        _, v, off = follower_window(follower, first, last, pad=1)
        n = last - first + 1
        v_now = v[off:off + n]
        v_next = v[off + 1:off + n + 1]
        if len(v_next) < n:
            # no observed speed past the range end: assume it holds
            v_next = np.append(v_next, v_now[-1])

        v_lead = v_now
        if self.leader_speed == 'edge' and anchor_prev is not None:
            v_lead = np.maximum(v_now + (anchor - anchor_prev) / h, 0.0)

        bt = p.b * p.dt_r
        candidate = p.s0 + ((v_next + bt) ** 2 - bt * bt - v_lead ** 2) / (2.0 * p.b)
        free_flow = v_next >= np.minimum(v_now + p.a * h, p.v0) - 1e-12
        if free_flow[0]:
            candidate[0] = p.s0 + v_now[0] * p.dt_r
            free_flow[0] = False
        # hold the last identifiable value through free-flow samples
        idx = np.where(free_flow, 0, np.arange(n))
        np.maximum.accumulate(idx, out=idx)
        return candidate[idx]
