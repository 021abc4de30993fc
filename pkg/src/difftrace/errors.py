"""Exception hierarchy shared by all difftrace packages."""

from __future__ import annotations

from enum import StrEnum, auto


class ErrorCategory(StrEnum):
    """Machine-parseable error categories reported by the command line."""

    ARGUMENT = auto()
    SHAPE = auto()
    RANGE = auto()
    NUMERIC = auto()
    DIVERGENCE = auto()
    LOOKUP = auto()
    DEGENERATE = auto()
    STATISTICS = auto()
    SELECTION = auto()
    INPUT = auto()
    INTEGRITY = auto()
    CONFIG = auto()
    IO = auto()


class DifftraceError(Exception):
    """Base class for every error raised by difftrace."""

    category: ErrorCategory = ErrorCategory.ARGUMENT


class ArgumentError(DifftraceError, ValueError):
    category = ErrorCategory.ARGUMENT


class ShapeError(DifftraceError, ValueError):
    category = ErrorCategory.SHAPE


class TimestepRangeError(DifftraceError, ValueError):
    category = ErrorCategory.RANGE

    def __init__(self, t: int, T: int | None = None):
        bound = "[1, inf)" if T is None else f"[1, {T}]"
        super().__init__(f"Timestep {t} outside {bound}")
        self.t = t
        self.T = T


class NumericError(DifftraceError, ArithmeticError):
    """Non-finite value. `where` names the parameter segment or sampler step."""

    category = ErrorCategory.NUMERIC

    def __init__(self, message: str, where: str | None = None):
        super().__init__(message if where is None else f"{message} (at {where})")
        self.where = where


class TrainingDivergenceError(NumericError):
    category = ErrorCategory.DIVERGENCE

    def __init__(self, step: int, loss_ema: float):
        super().__init__(f"Training diverged: loss_ema={loss_ema}", where=f"step {step}")
        self.step = step


class DegenerateGradientError(NumericError):
    category = ErrorCategory.DEGENERATE


class LissaDivergenceError(NumericError):
    category = ErrorCategory.DIVERGENCE


class MissingCheckpointError(DifftraceError, LookupError):
    category = ErrorCategory.LOOKUP


class MissingRecordsError(DifftraceError, LookupError):
    category = ErrorCategory.LOOKUP


class UndefinedCorrelationError(DifftraceError, ValueError):
    category = ErrorCategory.STATISTICS


class EmptySelectionError(DifftraceError, ValueError):
    category = ErrorCategory.SELECTION


class InputError(DifftraceError, ValueError):
    category = ErrorCategory.INPUT


class IntegrityError(DifftraceError, ValueError):
    category = ErrorCategory.INTEGRITY


class ConfigError(DifftraceError, ValueError):
    category = ErrorCategory.CONFIG


class OutputError(DifftraceError, OSError):
    category = ErrorCategory.IO
