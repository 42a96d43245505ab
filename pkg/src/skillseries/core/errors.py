"""Exception hierarchy shared by every SkillSeries component.

Each exception carries the process exit code the CLI reports for it:
1 for usage/config errors, 2 for data errors, 3 for numeric failures.
"""

from typing import Any, Optional


class SkillSeriesError(Exception):
    """Base class for all SkillSeries errors."""

    exit_code = 1

    def __init__(self, message: str, **context: Any) -> None:
        super().__init__(message)
        self.message = message
        self.context = context

    def __str__(self) -> str:
        if not self.context:
            return self.message
        details = ", ".join(f"{key}={value}" for key, value in self.context.items())
        return f"{self.message} ({details})"


# Usage / configuration


class ConfigError(SkillSeriesError):
    """Invalid configuration value or CLI flag."""


class BadParam(ConfigError):
    """A numeric parameter is outside its documented range."""


class BadRange(ConfigError):
    """A frame range is empty, reversed or outside the series."""


class WindowTooLarge(ConfigError):
    """Removing the window leaves fewer frames than retained coefficients."""

    def __init__(self, message: str, max_window: Optional[int] = None, **context: Any) -> None:
        super().__init__(message, max_window=max_window, **context)
        self.max_window = max_window


# Data


class DataError(SkillSeriesError):
    """Input data is missing, malformed or inconsistent."""

    exit_code = 2


class MalformedRow(DataError):
    """A kinematics or transcript line cannot be parsed."""

    def __init__(self, message: str, line: int, **context: Any) -> None:
        super().__init__(message, line=line, **context)
        self.line = line


class EmptyFile(DataError):
    """A kinematics file holds fewer than two frames."""


class UnknownGesture(DataError):
    """A transcript names a gesture outside G1..G15."""


class OverlapError(DataError):
    """Transcript segments overlap."""


class TranscriptOutOfRange(DataError):
    """A transcript segment ends past the last frame of its trial."""


class MissingMeta(DataError):
    """The meta file, or a file it references, does not exist."""


class LabelInconsistency(DataError):
    """GRS does not equal the sum of the OSATS criteria, or a score is out of range."""


class DuplicateTrial(DataError):
    """Two trials share the same (surgeon, task, trial index) triple."""


class TooFewFrames(DataError):
    """A series is too short for the requested windowing."""


class SignalTooShort(DataError):
    """A signal is too short for the requested embedding."""


class InsufficientTrials(DataError):
    """A validation scheme cannot be built from the available trials."""


class TooFewSurgeons(DataError):
    """Fewer surgeons than an inner leave-one-user-out split needs."""


class DimMismatch(DataError):
    """A vector does not have the dimensionality a model was fitted on."""


class EmptyModel(DataError):
    """A model was built without any training points."""


class OrderMismatch(DataError):
    """Feature-family order differs from the one a fusion model was fitted with."""


class PipelineFamilyMismatch(DataError):
    """A pipeline trained on one feature family was used for another."""


# Numeric


class NumericError(SkillSeriesError):
    """A numerical routine failed."""

    exit_code = 3


class NoConvergence(NumericError):
    """An iterative solver hit its iteration cap before reaching tolerance."""

    def __init__(self, message: str, iterations: int, gap: float, **context: Any) -> None:
        super().__init__(message, iterations=iterations, gap=gap, **context)
        self.iterations = iterations
        self.gap = gap


class DegenerateInput(NumericError):
    """Input leaves a statistic or model undefined."""
