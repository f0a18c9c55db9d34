from __future__ import annotations

import json

__all__ = [
    "exit_code",
    "error_line",
    "NlcError",
    "ValidationError",
    "NumericalError",
    "ConfigError",
    "DomainError",
    "BallTooSmallError",
    "ResolutionError",
    "WindowError",
    "PrerequisiteError",
    "ProfileError",
    "FormatError",
    "SeriesError",
    "DivergenceError",
    "StepError",
    "NoMaximumError",
    "DegenerateFrameError",
    "FrameError",
]


class NlcError(Exception):
    """Base class for every error raised by nlc-monitor.

    Attributes:
        stage: Pipeline stage the error belongs to. Commands report it in the
            JSON error line so scripts can tell ingestion failures from
            numerical ones.
    """

    stage = "nlc"

    def __init__(self, message: str, *, stage: str | None = None) -> None:
        super().__init__(message)
        if stage is not None:
            self.stage = stage


class ValidationError(NlcError, ValueError):
    """Raised when inputs or configuration are invalid (exit code 2)."""

    stage = "validate"


class NumericalError(NlcError, RuntimeError):
    """Raised when a computation cannot produce a meaningful number (exit code 3)."""

    stage = "numerics"


class ConfigError(ValidationError):
    """Raised when a parameter violates its documented range."""

    stage = "config"


class DomainError(ValidationError):
    """Raised when an argument lies outside an operation's domain."""


class BallTooSmallError(DomainError):
    """Raised when a ball holds fewer grid nodes than an average needs."""


class ResolutionError(DomainError):
    """Raised when a kernel truncation radius is below the grid resolution."""


class WindowError(DomainError):
    """Raised when a symmetrization window does not fit inside the box."""


class PrerequisiteError(ConfigError):
    """Raised when a growth function fails a required condition."""


class ProfileError(ValidationError):
    """Raised when an angular profile cannot produce a consistent field."""


class FormatError(ValidationError):
    """Raised when a snapshot file cannot be decoded.

    Attributes:
        offset: Byte offset at which decoding failed.
    """

    stage = "ingest"

    def __init__(self, message: str, *, offset: int) -> None:
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class SeriesError(ValidationError):
    """Raised when a snapshot series is empty or not ordered in time."""

    stage = "ingest"


class DivergenceError(NumericalError):
    """Raised when an integral diverges or a field stops being finite."""


class StepError(NumericalError):
    """Raised when a time step violates the CFL restriction."""

    stage = "solver"


class NoMaximumError(NumericalError):
    """Raised when a velocity field vanishes identically."""

    stage = "frame"


class DegenerateFrameError(NumericalError):
    """Raised when a frame is requested at a point of zero velocity."""

    stage = "frame"


class FrameError(NumericalError):
    """Raised when the origin of a framed field is not a maximum point."""

    stage = "frame"


def exit_code(error: NlcError) -> int:
    """Process exit code of an error: 2 for validation, 3 for numerics."""
    if isinstance(error, NumericalError):
        return 3
    return 2


def error_line(error: NlcError) -> str:
    """One-line JSON object {"stage", "message"} for standard error."""
    return json.dumps({"stage": error.stage, "message": str(error)})
