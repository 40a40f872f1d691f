"""Intelligent Driver Model"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import CollisionError, InvalidInputError
from traj_core import Trajectory
from .base_model import CarFollowingModel, ModelParams, follower_window

RADICAND_FLOOR = 1e-3


@dataclass(frozen=True)
class IdmParams(ModelParams):
    """
    Attributes:
        v0: Desired speed (m/s)
        T: Desired time gap (s)
        a: Maximum acceleration (m/s^2)
        b: Comfortable deceleration (m/s^2)
        delta: Acceleration exponent
        s0: Minimum spacing (m)
    """
    v0: float
    T: float
    a: float
    b: float
    delta: float
    s0: float

    def __post_init__(self):
        self._require_positive()
        if not 1.0 <= self.delta <= 10.0:
            raise InvalidInputError(f"IdmParams.delta must be in [1, 10], got {self.delta}")


def desired_gap(p: IdmParams, v, dv):
    """s* = s0 + max(0, v*T + v*dv / (2*sqrt(a*b)))"""
    return p.s0 + np.maximum(0.0, v * p.T + v * dv / (2.0 * math.sqrt(p.a * p.b)))


def idm_accel(p: IdmParams, v: float, dv: float, s: float) -> float:
    """
    IDM acceleration a * [1 - (v/v0)^delta - (s*/s)^2].

    Args:
        v: Follower speed
        dv: Approach rate v - v_leader
        s: Spacing

    Raises:
        CollisionError: Spacing is zero or negative
    """
    if s <= 0:
        raise CollisionError(f"idm: spacing {s:.3f} m is not positive")
    s_star = float(desired_gap(p, v, dv))
    return p.a * (1.0 - (v / p.v0) ** p.delta - (s_star / s) ** 2)


class IdmModel(CarFollowingModel):
    """
    IDM with explicit Euler speed integration clamped at zero.

    The predictor solves the acceleration law for the spacing given the
    observed follower acceleration, with zero approach rate.
    """

    TAG = 'idm'
    PARAMS = IdmParams

    def next_speed(self, v: float, s: float, v_l: float, h: float) -> float:
        return max(0.0, v + idm_accel(self.params, v, v - v_l, s) * h)

    def raw_headway(self, follower: Trajectory, first: int, last: int,
                    anchor: float, anchor_prev: Optional[float]) -> np.ndarray:
        p = self.params
        _, v, off = follower_window(follower, first, last, pad=1)
        n = last - first + 1
        accel = np.gradient(v, follower.h) if len(v) > 1 else np.zeros(1)
        v_now = v[off:off + n]
        accel = accel[off:off + n]
        r = 1.0 - (v_now / p.v0) ** p.delta - accel / p.a
        r = np.maximum(r, RADICAND_FLOOR)
        return desired_gap(p, v_now, 0.0) / np.sqrt(r)
