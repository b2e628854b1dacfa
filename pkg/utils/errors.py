"""
Error taxonomy for the curvature laboratory.

Library modules raise these; only the dispatcher in app.py turns them into
per-item error records.
"""

from typing import Any, Optional


class CurvatureLabError(Exception):
    """Base class for every error raised by the laboratory."""


# curvature-core

class IndexOutOfRange(CurvatureLabError, ValueError):
    pass


class SymmetryConflict(CurvatureLabError, ValueError):
    pass


class BianchiViolation(CurvatureLabError, ValueError):
    def __init__(self, message: str, residual: float):
        super().__init__(message)
        self.residual = residual


class DegeneratePlane(CurvatureLabError, ValueError):
    pass


class BadFrame(CurvatureLabError, ValueError):
    pass


class RangeViolation(CurvatureLabError, ValueError):
    pass


class WrongDimension(CurvatureLabError, ValueError):
    pass


# conditions

class OptimizerDiverged(CurvatureLabError, RuntimeError):
    pass


class NonpositiveCurvature(CurvatureLabError, ValueError):
    pass


class ConstraintConstructionFailed(CurvatureLabError, RuntimeError):
    pass


# hamilton-ode

class BlowupReached(CurvatureLabError, RuntimeError):
    """
    Raised when the flow approaches its maximal existence time.

    Attributes:
        trajectory: The trajectory up to the last finite state
        blowup_time: Extrapolated blowup time from the 1/|R| fit (None if unavailable)
    """

    def __init__(self, message: str, trajectory: Any = None, blowup_time: Optional[float] = None):
        super().__init__(message)
        self.trajectory = trajectory
        self.blowup_time = blowup_time


class MaxStepsExceeded(CurvatureLabError, RuntimeError):
    def __init__(self, message: str, trajectory: Any = None):
        super().__init__(message)
        self.trajectory = trajectory


class NotInCone(CurvatureLabError, ValueError):
    pass


class HypothesisViolated(CurvatureLabError, ValueError):
    pass


# models

class SpecInvalid(CurvatureLabError, ValueError):
    pass


class BisectionFailed(CurvatureLabError, RuntimeError):
    pass


# experiment-cli

class ParseError(CurvatureLabError, ValueError):
    def __init__(self, message: str, text: str = "", position: int = 0):
        super().__init__(f"{message} at position {position}: {text!r}")
        self.text = text
        self.position = position


class ConfigError(CurvatureLabError, ValueError):
    pass


class InputError(CurvatureLabError, ValueError):
    pass
