"""
Base class for car-following models.

Every model has two faces: forward simulation of a follower behind an
observed leader, and headway prediction driven only by the follower's own
kinematics (used for calibration and gap filling).
"""

from dataclasses import astuple, dataclass, fields
from typing import Optional, Sequence, Tuple

import numpy as np

from errors import CollisionError, InvalidInputError, PredictionError
from traj_core import GapSpec, Trajectory, ensure_speed

MIN_HEADWAY = 0.01


@dataclass(frozen=True)
class FollowerState:
    """Initial follower state for simulation"""
    x: float
    v: float

    def __post_init__(self):
        if self.v < 0:
            raise InvalidInputError(f"follower speed {self.v} is negative")


class ModelParams:
    """Mixin for the per-model parameter dataclasses"""

    @classmethod
    def names(cls) -> Tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    @classmethod
    def from_vector(cls, vector: Sequence[float]):
        return cls(*(float(v) for v in vector))

    def as_vector(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)

    def as_dict(self) -> dict:
        return dict(zip(self.names(), astuple(self)))

    def _require_positive(self):
        for name, value in self.as_dict().items():
            if not value > 0:
                raise InvalidInputError(f"{type(self).__name__}.{name} must be > 0, got {value}")


class CarFollowingModel:
    """Base class for all car-following models"""

    TAG = ''
    PARAMS = None

    def __init__(self, params):
        """
        Initialize model

        Args:
            params: Parameter dataclass instance of type ``PARAMS``
        """
        if not isinstance(params, self.PARAMS):
            raise InvalidInputError(f"{self.get_name()} expects {self.PARAMS.__name__}, got {type(params).__name__}")
        self.params = params

    def get_name(self) -> str:
        """Get the tag of this model"""
        return self.TAG or self.__class__.__name__.replace('Model', '').lower()

    def next_speed(self, v: float, s: float, v_l: float, h: float) -> float:
        """
        Follower speed after one step of length ``h``.
        Must be implemented by models that integrate speed.
        """
        raise NotImplementedError("Subclasses must implement next_speed() or override simulate()")

    def raw_headway(self, follower: Trajectory, first: int, last: int,
                    anchor: float, anchor_prev: Optional[float]) -> np.ndarray:
        """
        Unanchored headway prediction over [first, last].
        Must be implemented by subclasses.
        """
        raise NotImplementedError("Subclasses must implement raw_headway()")

    def simulate(self, leader: Trajectory, init: FollowerState, horizon: int) -> Trajectory:
        """
        Simulate a follower behind ``leader`` for ``horizon`` steps.

        Speed follows ``next_speed``; position uses the trapezoidal update
        x += h * (v_old + v_new) / 2.

        Returns:
            Follower trajectory with horizon + 1 samples on the leader grid
        """
        leader = leader_over(leader, horizon)
        h = leader.h
        length = leader.vehicle_length or 0.0
        x = np.empty(horizon + 1)
        v = np.empty(horizon + 1)
        x[0], v[0] = init.x, init.v
        for k in range(horizon):
            s = leader.x[k] - x[k] - length
            if s <= 0:
                raise CollisionError(f"{self.get_name()}: collision at step {k} (spacing {s:.3f} m)", step=k)
            try:
                v[k + 1] = self.next_speed(v[k], s, leader.v[k], h)
            except CollisionError as e:
                raise CollisionError(str(e), step=k)
            x[k + 1] = x[k] + h * (v[k] + v[k + 1]) / 2.0
        check_spacing(self.get_name(), leader.x[:horizon + 1] - x - length)
        return follower_trajectory(leader, x, v)

    def predict_range(self, follower: Trajectory, first: int, last: int,
                      anchor: float, anchor_prev: Optional[float] = None) -> np.ndarray:
        """
        Predict headway over [first, last] anchored so the value at ``first``
        equals ``anchor`` exactly.

        Args:
            follower: Follower trajectory with positions over the range
            first, last: Inclusive sample range
            anchor: Observed headway the prediction starts from
            anchor_prev: Observed headway one sample before the anchor, if any
        """
        if last < first:
            raise InvalidInputError(f"empty prediction range {first}..{last}")
        follower = ensure_speed(follower)
        if first < 0 or last >= len(follower) or not follower.x_present[first:last + 1].all():
            raise InvalidInputError(f"follower data missing inside samples {first}..{last}")
        raw = np.asarray(self.raw_headway(follower, first, last, anchor, anchor_prev), dtype=float)
        bad = np.flatnonzero(~np.isfinite(raw))
        if len(bad):
            raise PredictionError(f"{self.get_name()}: non-finite headway at sample {first + bad[0]}",
                                  index=int(first + bad[0]))
        out = raw + (anchor - raw[0])
        out = np.maximum(out, MIN_HEADWAY)
        out[0] = anchor
        return out

    def __repr__(self):
        return f"{self.__class__.__name__}({self.params})"


def simulate_follower(model: CarFollowingModel, leader: Trajectory, init: FollowerState,
                      horizon: int) -> Trajectory:
    """Follower trajectory over ``horizon`` steps behind a fully observed leader"""
    return model.simulate(leader, init, horizon)


def predict_headway(model: CarFollowingModel, follower: Trajectory, gap: GapSpec,
                    anchor: float, anchor_prev: Optional[float] = None) -> np.ndarray:
    """Headway prediction over the samples of ``gap``, starting at the pre-gap edge value"""
    return model.predict_range(follower, gap.first_missing_idx, gap.last_missing_idx, anchor, anchor_prev)


def leader_over(leader: Trajectory, horizon: int) -> Trajectory:
    if horizon < 1:
        raise InvalidInputError("simulation horizon must be at least one step")
    if horizon + 1 > len(leader) or not leader.x_present[:horizon + 1].all():
        raise InvalidInputError(f"leader '{leader.id}' is not fully present over {horizon} steps")
    return ensure_speed(leader)


def check_spacing(name: str, spacing: np.ndarray):
    bad = np.flatnonzero(spacing <= 0)
    if len(bad):
        raise CollisionError(f"{name}: collision at step {bad[0]} (spacing {spacing[bad[0]]:.3f} m)",
                             step=int(bad[0]))


def follower_trajectory(leader: Trajectory, x: np.ndarray, v: np.ndarray) -> Trajectory:
    ones = np.ones(len(x), dtype=bool)
    return Trajectory(id=f"{leader.id}:follower", t0=leader.t0, x=x, x_present=ones,
                      v=np.maximum(v, 0.0), v_present=ones, h=leader.h)


def follower_window(follower: Trajectory, first: int, last: int, pad: int = 1) -> Tuple[np.ndarray, np.ndarray, int]:
    """
    Follower positions and speeds over [first - pad, last + pad], clipped to
    the observed samples around the range.

    Returns:
        (x, v, offset) where index ``first`` maps to ``offset`` in the arrays
    """
    lo = first
    while lo > max(first - pad, 0) and follower.x_present[lo - 1] and follower.v_present[lo - 1]:
        lo -= 1
    hi = last
    while hi < min(last + pad, len(follower) - 1) and follower.x_present[hi + 1] and follower.v_present[hi + 1]:
        hi += 1
    return follower.x[lo:hi + 1], follower.v[lo:hi + 1], first - lo
