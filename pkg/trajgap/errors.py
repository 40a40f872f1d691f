"""
Exception types shared by the gap reconstruction modules.
"""


class TrajGapError(Exception):
    """Base class for all toolkit errors"""


class InvalidInputError(TrajGapError, ValueError):
    """Input data violates a documented precondition"""


class GapPolicyError(TrajGapError, ValueError):
    """A gap was routed to the wrong reconstruction method"""


class CollisionError(TrajGapError, RuntimeError):
    """Spacing between leader and follower reached zero or below"""

    def __init__(self, message: str, step: int = -1):
        super().__init__(message)
        self.step = step


class PredictionError(TrajGapError, RuntimeError):
    """A headway predictor produced a non-finite value"""

    def __init__(self, message: str, index: int = -1):
        super().__init__(message)
        self.index = index


class CalibrationFailedError(TrajGapError, RuntimeError):
    """Every cost evaluation of a calibration run failed"""

    def __init__(self, model: str, message: str = ''):
        super().__init__(message or f"Calibration failed for model '{model}': no parameter vector could be evaluated")
        self.model = model


class GapCapacityError(TrajGapError, ValueError):
    """A series cannot host the requested number of synthetic gaps"""


class ScoringError(TrajGapError, ValueError):
    """A gap has no samples that can be scored"""


class NgsimParseError(TrajGapError, ValueError):
    """A row of an NGSIM trajectory file could not be parsed"""

    def __init__(self, message: str, line_number: int):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number
