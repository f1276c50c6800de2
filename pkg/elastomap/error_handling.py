"""Error hierarchy, exit codes and stage-level error handling."""

import logging
from collections import Counter
from collections.abc import Callable
from enum import IntEnum
from functools import wraps
from typing import Any, ParamSpec, TypeVar

import pydantic

logger = logging.getLogger(__name__)

P = ParamSpec("P")
R = TypeVar("R")


class ExitCode(IntEnum):
    """Process exit codes of the command-line interface."""
    SUCCESS = 0
    USAGE = 1
    NUMERICAL = 2
    IO = 3


# Exception hierarchy for different error types
class ElastomapError(Exception):
    """Base exception for the elastomap toolkit."""
    exit_code = ExitCode.USAGE


class ConfigurationError(ElastomapError):
    """Invalid or incomplete run configuration."""
    pass


class UsageError(ElastomapError):
    """Invalid command-line usage."""
    pass


class InputError(ElastomapError):
    """Inputs violate the preconditions of an operation."""
    pass


class DimensionMismatch(InputError):
    """Operands have inconsistent spatial dimensions or component counts."""
    pass


class UnsupportedDimension(InputError):
    """Operation is not available in the requested dimension."""
    pass


class GridMismatch(InputError):
    """Fields live on different grids."""
    pass


class ZeroMacroStrain(InputError):
    """Macroscopic strain (or its relevant invariant) vanishes."""
    pass


class ZeroFrequency(InputError):
    """Operation undefined at the zero frequency."""
    pass


class MixedMacroStrain(InputError):
    """Macroscopic strain is neither purely spherical nor purely deviatoric."""
    pass


class IncompleteBasis(InputError):
    """Load set does not span the required projector."""
    pass


class NonPositiveModulus(InputError):
    """A modulus is zero or negative."""
    pass


class InvalidContrast(InputError):
    """Contrast outside (0, 1] or producing non-positive moduli."""
    pass


class NumericalError(ElastomapError):
    """Numerical failure of a solver."""
    exit_code = ExitCode.NUMERICAL


class NotConverged(NumericalError):
    """Iterative solver did not reach its tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        super().__init__(message)
        self.iterations = iterations
        self.residual = residual


class FieldIOError(ElastomapError):
    """Reading or writing an artifact failed."""
    exit_code = ExitCode.IO


class BadMagic(FieldIOError):
    """File does not start with the field-file magic."""
    pass


class UnsupportedVersion(FieldIOError):
    """Field-file version is not understood."""
    pass


class TruncatedPayload(FieldIOError):
    """File ends before the declared header or payload."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class StageError(ElastomapError):
    """Failure of a pipeline stage, wrapping the underlying error."""

    def __init__(self, stage: str, error: Exception):
        super().__init__(f"Stage '{stage}' failed: {type(error).__name__}: {error}")
        self.stage = stage
        self.error = error
        self.exit_code = exit_code_for(error)


def exit_code_for(error: BaseException) -> ExitCode:
    """Map an exception to the CLI exit code."""
    if isinstance(error, ElastomapError):
        return error.exit_code
    if isinstance(error, OSError):
        return ExitCode.IO
    if isinstance(error, (ValueError, pydantic.ValidationError)):
        return ExitCode.USAGE
    return ExitCode.NUMERICAL


class ErrorHandler:
    """Centralized error logging with per-operation failure counts."""

    def __init__(self) -> None:
        self.error_stats: Counter[str] = Counter()

    def log_error(
        self, operation: str, error: Exception, context: dict[str, Any] | None = None
    ) -> None:
        """Log error with context information."""
        error_info = {
            "operation": operation,
            "error_type": type(error).__name__,
            "error_message": str(error),
            "exit_code": int(exit_code_for(error)),
        }
        if context:
            error_info.update(context)

        self.error_stats[operation] += 1
        logger.error(f"Operation failed: {operation}", extra=error_info, exc_info=error)

    def error_count(self, operation: str) -> int:
        return self.error_stats[operation]

    def reset(self) -> None:
        self.error_stats.clear()


# Global error handler instance
error_handler = ErrorHandler()


def handle_stage_errors(stage: str) -> Callable[[Callable[P, R]], Callable[P, R]]:
    """Decorator converting failures inside a pipeline stage into StageError."""
    def decorator(func: Callable[P, R]) -> Callable[P, R]:
        @wraps(func)
        def wrapper(*args: P.args, **kwargs: P.kwargs) -> R:
            try:
                return func(*args, **kwargs)
            except StageError:
                raise
            except ElastomapError as e:
                error_handler.log_error(stage, e)
                raise StageError(stage, e) from e
            except pydantic.ValidationError as e:
                wrapped: ElastomapError = ConfigurationError(f"{stage} validation error: {e}")
                error_handler.log_error(stage, wrapped)
                raise StageError(stage, wrapped) from e
            except ValueError as e:
                wrapped = InputError(f"{stage} invalid value: {e}")
                error_handler.log_error(stage, wrapped)
                raise StageError(stage, wrapped) from e
            except OSError as e:
                wrapped = FieldIOError(f"{stage} I/O error: {e}")
                error_handler.log_error(stage, wrapped)
                raise StageError(stage, wrapped) from e

        return wrapper
    return decorator
