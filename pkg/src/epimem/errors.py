"""Exception hierarchy shared by every layer of the engine."""

from __future__ import annotations


class EpimemError(Exception):
    """Base class for all engine errors."""


class FeatureError(EpimemError, ValueError):
    """Invalid schema, vector, or dimension value."""


class OutOfRangeError(FeatureError):
    def __init__(self, dim_name: str, value: float, lo: float, hi: float) -> None:
        super().__init__(f"dimension {dim_name!r}: value {value!r} outside [{lo}, {hi}]")
        self.dim_name = dim_name
        self.value = value


class ArityError(FeatureError):
    """Wrong number of dimensions, bins, radii or participants."""


class ClassMismatchError(FeatureError):
    """Two vectors (or a vector and a schema) belong to different classes."""


class UnknownClassError(EpimemError, KeyError):
    def __str__(self) -> str:
        return f"unknown class {self.args[0]!r}"


class UnknownInstanceError(EpimemError, KeyError):
    def __str__(self) -> str:
        return f"unknown instance {self.args[0]!r}"


class IntervalError(EpimemError):
    """Presence-interval discipline violated (double open, zero length, ...)."""


class TimeRegressionError(EpimemError):
    """A timestamp moved backwards."""


class LogError(EpimemError):
    """Episodic log append rejected (sequence gap, inconsistent op)."""


class CueError(EpimemError, ValueError):
    """Malformed cue, either structurally or in its text form."""


class FormatError(EpimemError):
    """A text input file (schema, world, actions, event log) failed to parse."""

    def __init__(self, message: str, lineno: int | None = None) -> None:
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


class StoreFormatError(EpimemError):
    """The persisted store is corrupt or violates an invariant on load."""
