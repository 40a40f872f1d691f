"""
Car-following models used to calibrate and fill trajectory gaps.
Each model simulates a follower and predicts headway from follower kinematics.
"""

from .base_model import CarFollowingModel, FollowerState, ModelParams, predict_headway, simulate_follower
from .gipps_model import GippsModel, GippsParams, gipps_step, safe_speed
from .idm_model import IdmModel, IdmParams, idm_accel
from .pipes_model import PipesModel, PipesParams
from .newell_model import NewellModel, NewellParams
from .model_factory import BEST_OF_ALL, DEFAULT_BOUNDS, MODEL_TAGS, ModelFactory

__all__ = [
    'CarFollowingModel',
    'FollowerState',
    'ModelParams',
    'predict_headway',
    'simulate_follower',
    'GippsModel',
    'GippsParams',
    'gipps_step',
    'safe_speed',
    'IdmModel',
    'IdmParams',
    'idm_accel',
    'PipesModel',
    'PipesParams',
    'NewellModel',
    'NewellParams',
    'BEST_OF_ALL',
    'DEFAULT_BOUNDS',
    'MODEL_TAGS',
    'ModelFactory',
]
