"""Factory for creating car-following models from tags and parameter vectors"""
from typing import Dict, List, Sequence, Tuple, Union

from errors import InvalidInputError
from .base_model import CarFollowingModel
from .gipps_model import GippsModel
from .idm_model import IdmModel
from .newell_model import NewellModel
from .pipes_model import PipesModel

MODEL_TAGS = ('gipps', 'idm', 'pipes', 'newell')
BEST_OF_ALL = 'best-of-all'

Bounds = Dict[str, Tuple[float, float]]

DEFAULT_BOUNDS: Dict[str, Bounds] = {
    'gipps': {'v0': (5.0, 40.0), 'a': (0.3, 4.0), 'b': (0.5, 5.0), 's0': (0.5, 10.0), 'dt_r': (0.3, 2.5)},
    'idm': {'v0': (5.0, 40.0), 'T': (0.3, 3.0), 'a': (0.3, 4.0), 'b': (0.5, 5.0), 'delta': (1.0, 6.0),
            's0': (0.5, 10.0)},
    'pipes': {'b_clear': (0.5, 15.0), 'T': (0.3, 3.0)},
    'newell': {'tau': (0.3, 3.0), 'd': (0.5, 15.0)},
}


class ModelFactory:
    """Factory for creating the car-following model named by a tag"""

    _MODELS = {
        'gipps': GippsModel,
        'idm': IdmModel,
        'pipes': PipesModel,
        'newell': NewellModel,
    }

    @staticmethod
    def model_class(tag: str):
        try:
            return ModelFactory._MODELS[tag]
        except KeyError:
            raise InvalidInputError(f"unknown car-following model '{tag}' (expected one of {', '.join(MODEL_TAGS)})")

    @staticmethod
    def create(tag: str, params: Union[Sequence[float], object], **options) -> CarFollowingModel:
        """
        Create a model

        Args:
            tag: Model tag (gipps, idm, pipes, newell)
            params: Parameter dataclass instance or vector in field order
            options: Model-specific keyword options (e.g. leader_speed for gipps)

        Returns:
            CarFollowingModel instance
        """
        cls = ModelFactory.model_class(tag)
        if not isinstance(params, cls.PARAMS):
            params = cls.PARAMS.from_vector(params)
        return cls(params, **options)

    @staticmethod
    def parameter_names(tag: str) -> Tuple[str, ...]:
        return ModelFactory.model_class(tag).PARAMS.names()

    @staticmethod
    def bounds_matrix(tag: str, bounds: Bounds) -> List[Tuple[float, float]]:
        """Bounds in parameter field order; every field must be bounded with low < high"""
        out = []
        for name in ModelFactory.parameter_names(tag):
            if name not in bounds:
                raise InvalidInputError(f"no bounds for {tag}.{name}")
            low, high = (float(v) for v in bounds[name])
            if not low < high:
                raise InvalidInputError(f"bounds for {tag}.{name} need low < high, got ({low}, {high})")
            out.append((low, high))
        return out

    @staticmethod
    def resolve_models(selection: str) -> List[str]:
        """Expand a model selection into the list of tags to calibrate"""
        if selection == BEST_OF_ALL:
            return list(MODEL_TAGS)
        ModelFactory.model_class(selection)
        return [selection]
