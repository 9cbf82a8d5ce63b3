"""
ErrorManager - Structured errors and exception management for the paraspec toolbox.

This module defines the toolbox's exception hierarchy, categorizes exceptions
raised by the numerical modules (and by numpy/scipy underneath them), and
provides consistent reporting, statistics integration and failure logs.

Numerical code raises the typed exceptions below with the structured data a
caller needs (offending grid point, required resolution, residual history).
Orchestration code routes them through ErrorManager, which prints them via
the OutputManager, counts them and writes failure logs.

Classes:
    ToolboxError and subclasses: Typed failures carrying structured data
    ErrorCategory: Enumeration of error types
    ErrorInfo: Data structure for error information
    ErrorManager: Main error handling coordinator
    ExceptionContext: Context manager for stage-specific error handling
"""

import time
import traceback
from dataclasses import dataclass
from enum import Enum
from typing import Any, Callable, Dict, Optional, Sequence


class ToolboxError(Exception):
    """Base class for every failure the toolbox raises on purpose."""

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.details: Dict[str, Any] = details

    def to_dict(self) -> Dict[str, Any]:
        """Structured form used in stage reports and the artifact manifest."""
        payload: Dict[str, Any] = {"type": type(self).__name__, "message": str(self)}
        for key, value in self.details.items():
            payload[key] = _jsonable(value)
        return payload


class ConfigurationError(ToolboxError):
    """Invalid grids, band ranges, config keys or argument combinations."""


class PreconditionError(ToolboxError):
    """A numerically checked precondition failed; `location` names where."""

    def __init__(self, message: str, location: Any = None, **details: Any):
        super().__init__(message, location=location, **details)
        self.location = location


class ResolutionError(ToolboxError):
    """The request cannot be met at the current grid or truncation size."""

    def __init__(self, message: str, required_n: Optional[int] = None, **details: Any):
        super().__init__(message, required_n=required_n, **details)
        self.required_n = required_n


class ConeExitError(ToolboxError):
    """A section left the invariant cone (or the Mobius denominator vanished)."""

    def __init__(self, message: str, grid_index: Any = None, **details: Any):
        super().__init__(message, grid_index=grid_index, **details)
        self.grid_index = grid_index


class ConvergenceError(ToolboxError):
    """An iteration or certification did not converge; carries its history."""

    def __init__(self, message: str, history: Optional[Sequence[float]] = None, **details: Any):
        history = [] if history is None else [float(h) for h in history]
        super().__init__(message, history=history, **details)
        self.history = history


class RiccatiBlowUpError(ToolboxError):
    """Riccati integration exceeded the cone bound at `time`."""

    def __init__(self, message: str, time: Optional[float] = None, **details: Any):
        super().__init__(message, time=time, **details)
        self.time = time


class ArtifactError(ToolboxError):
    """Unreadable or malformed field files, manifests or reports."""


class StageTimeoutError(ToolboxError):
    """The wall-clock budget ran out between pipeline stages."""


def _jsonable(value: Any) -> Any:
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return value.tolist()
    if isinstance(value, float) and value != value:
        return None
    return value


class ErrorCategory(Enum):
    """Categories of errors that can occur during a toolbox run."""
    CONFIGURATION = "configuration" # Config, grid and argument errors
    PRECONDITION = "precondition"   # Failed numerical preconditions
    NUMERICAL = "numerical"         # Non-convergence, cone exit, blow-up, solver failure
    RESOLUTION = "resolution"       # Grid/truncation too coarse for the request
    ARTIFACT = "artifact"           # File and report I/O errors
    TIMEOUT = "timeout"             # Timeout-related errors
    CRITICAL = "critical"           # Critical errors that should terminate execution


@dataclass
class ErrorInfo:
    """Information about an error that occurred."""
    category: ErrorCategory
    stage: Optional[str]
    message: str
    original_exception: BaseException
    is_critical: bool = False
    should_terminate: bool = False


class ErrorManager:
    """
    Exception handling and reporting for the paraspec toolbox.

    This class provides:
    - Categorization of typed toolbox errors and foreign numpy/scipy/OS errors
    - Consistent console reporting through the OutputManager
    - Exception counting through the StatsTracker
    - Timestamped failure logs below <output root>/failures
    """

    def __init__(self, stats_tracker=None, output_manager=None, start_timestamp_str=None,
                 output_root: Optional[str] = None):
        """
        Initialize ErrorManager with optional dependencies.

        Args:
            stats_tracker: StatsTracker instance for counting exceptions
            output_manager: OutputManager instance for error reporting
            start_timestamp_str: Formatted timestamp string for failure log filenames
            output_root: Output root for failure logs (resolved from the environment when None)
        """
        self.stats_tracker = stats_tracker
        self.output_manager = output_manager
        self.start_timestamp_str = start_timestamp_str or "unknown_time"
        self.output_root = output_root
        self.error_handlers: Dict[ErrorCategory, Callable[[ErrorInfo], None]] = {
            ErrorCategory.CONFIGURATION: self._handle_configuration_error,
            ErrorCategory.PRECONDITION: self._handle_precondition_error,
            ErrorCategory.NUMERICAL: self._handle_numerical_error,
            ErrorCategory.RESOLUTION: self._handle_resolution_error,
            ErrorCategory.ARTIFACT: self._handle_artifact_error,
            ErrorCategory.TIMEOUT: self._handle_timeout_error,
            ErrorCategory.CRITICAL: self._handle_critical_error
        }

    def handle_exception(self, exception: BaseException, context: str = "",
                         stage: Optional[str] = None, critical: bool = False) -> ErrorInfo:
        """
        Handle an exception with appropriate categorization and response.

        Args:
            exception: The exception that occurred
            context: Additional context about the operation
            stage: Optional pipeline stage where the error occurred
            critical: Whether this is a critical error that should terminate execution

        Returns:
            ErrorInfo object with details about the handled error
        """
        category = self._categorize_exception(exception)

        error_info = ErrorInfo(
            category=category,
            stage=stage,
            message=self._format_error_message(exception, stage, context),
            original_exception=exception,
            is_critical=critical or category == ErrorCategory.CRITICAL,
            should_terminate=critical or category in [
                ErrorCategory.CRITICAL, ErrorCategory.CONFIGURATION, ErrorCategory.TIMEOUT
            ]
        )

        handler = self.error_handlers.get(category, self._handle_generic_error)
        handler(error_info)

        if self.stats_tracker:
            self.stats_tracker.increment_exceptions()

        return error_info

    def _categorize_exception(self, exception: BaseException) -> ErrorCategory:
        """
        Categorize an exception, typed toolbox errors first, then by type name
        and message keywords for foreign exceptions.
        """
        if isinstance(exception, ConfigurationError):
            return ErrorCategory.CONFIGURATION
        if isinstance(exception, PreconditionError):
            return ErrorCategory.PRECONDITION
        if isinstance(exception, ResolutionError):
            return ErrorCategory.RESOLUTION
        if isinstance(exception, (ConvergenceError, ConeExitError, RiccatiBlowUpError)):
            return ErrorCategory.NUMERICAL
        if isinstance(exception, ArtifactError):
            return ErrorCategory.ARTIFACT
        if isinstance(exception, StageTimeoutError):
            return ErrorCategory.TIMEOUT

        exception_type = type(exception).__name__
        exception_message = str(exception).lower()

        if exception_type in ['SystemExit', 'KeyboardInterrupt', 'MemoryError']:
            return ErrorCategory.CRITICAL

        if exception_type == 'LinAlgError' or any(keyword in exception_message for keyword in [
            'singular matrix', 'did not converge', 'eigenvalue', 'overflow', 'nan'
        ]):
            return ErrorCategory.NUMERICAL

        if exception_type in ['FileNotFoundError', 'PermissionError', 'OSError', 'IsADirectoryError'] \
                or any(keyword in exception_message for keyword in ['no such file', 'permission denied']):
            return ErrorCategory.ARTIFACT

        if 'timeout' in exception_message or exception_type == 'TimeoutError':
            return ErrorCategory.TIMEOUT

        if exception_type in ['ValueError', 'TypeError', 'KeyError']:
            return ErrorCategory.CONFIGURATION

        return ErrorCategory.CRITICAL

    def _format_error_message(self, exception: BaseException, stage: Optional[str], context: str) -> str:
        """Format "context - Stage 'name': message"."""
        base_message = str(exception)

        if stage:
            base_message = f"Stage '{stage}': {base_message}"

        if context:
            base_message = f"{context} - {base_message}"

        return base_message

    def _report(self, prefix: str, error_info: ErrorInfo) -> None:
        if self.output_manager:
            if error_info.stage:
                self.output_manager.print_error(error_info.stage, error_info.original_exception)
            else:
                self.output_manager.print_general_error(f"{prefix}: {error_info.message}")

    def _handle_configuration_error(self, error_info: ErrorInfo) -> None:
        """Handle configuration-related errors."""
        if self.output_manager:
            self.output_manager.print_general_error(f"Configuration error: {error_info.message}")

    def _handle_precondition_error(self, error_info: ErrorInfo) -> None:
        """Handle failed numerical preconditions."""
        self._report("Precondition failed", error_info)
        exc = error_info.original_exception
        location = getattr(exc, "location", None)
        if self.output_manager and location is not None:
            self.output_manager.print_info_pair("  Offending location", str(location))

    def _handle_numerical_error(self, error_info: ErrorInfo) -> None:
        """Handle non-convergence, cone exits and blow-ups."""
        self._report("Numerical failure", error_info)
        history = getattr(error_info.original_exception, "history", None)
        if self.output_manager and history and self.output_manager.get_verbose_level() >= 2:
            tail = ", ".join(f"{h:.3e}" for h in history[-5:])
            self.output_manager.print_info_pair("  Last residuals", tail)

    def _handle_resolution_error(self, error_info: ErrorInfo) -> None:
        """Handle requests the current grid cannot resolve."""
        self._report("Resolution error", error_info)
        required_n = getattr(error_info.original_exception, "required_n", None)
        if self.output_manager and required_n:
            self.output_manager.print_info_pair("  Required grid size", str(required_n))

    def _handle_artifact_error(self, error_info: ErrorInfo) -> None:
        """Handle file and report I/O errors."""
        self._report("Artifact error", error_info)

    def _handle_timeout_error(self, error_info: ErrorInfo) -> None:
        """Handle timeout-related errors."""
        if self.output_manager:
            self.output_manager.print_general_message(f"Timeout: {error_info.message}")

    def _handle_critical_error(self, error_info: ErrorInfo) -> None:
        """Handle critical errors that should terminate execution."""
        if self.output_manager:
            self.output_manager.print_general_error(f"Critical error: {error_info.message}")

        # Print stack trace for critical errors in verbose mode
        if self.output_manager and self.output_manager.get_verbose_level() > 0:
            traceback.print_exception(error_info.original_exception)

    def _handle_generic_error(self, error_info: ErrorInfo) -> None:
        """Handle generic errors that don't fit other categories."""
        self._report("Error", error_info)

    def create_exception_context(self, operation: str, stage: Optional[str] = None):
        """
        Create a context manager for handling exceptions in a specific operation.

        Args:
            operation: Description of the operation being performed
            stage: Optional pipeline stage name

        Returns:
            ExceptionContext instance
        """
        return ExceptionContext(self, operation, stage)

    def get_common_error_solutions(self, error_category: ErrorCategory) -> list[str]:
        """
        Get common solutions for different error categories.

        Args:
            error_category: Category of error

        Returns:
            List of suggested solutions
        """
        solutions = {
            ErrorCategory.CONFIGURATION: [
                "Use a power-of-two grid size (e.g. --grid 256)",
                "Check the config against schema_version 1; unknown keys are rejected",
                "Ensure band ranges lie within [0, log2(N) - 1] and span at least 3 bands"
            ],
            ErrorCategory.PRECONDITION: [
                "Reduce the perturbation amplitude so the cone check passes",
                "Narrow the cone aperture away from characteristic directions",
                "Check that u < 0 < s and s + |u| < r - 1 for rough systems"
            ],
            ErrorCategory.NUMERICAL: [
                "Increase max_iter or loosen --tol",
                "Reduce the Riccati step dt below the reported stability bound",
                "Check that the frames are transverse everywhere"
            ],
            ErrorCategory.RESOLUTION: [
                "Increase the grid size to the reported required N",
                "Increase --trunc to at least the weight's minimum truncation"
            ],
            ErrorCategory.ARTIFACT: [
                "Verify that referenced .pfld and report files exist",
                "Check write permissions on the output root"
            ],
            ErrorCategory.TIMEOUT: [
                "Increase the timeout value using -to option",
                "Use a smaller grid or truncation"
            ]
        }

        return solutions.get(error_category, ["Re-run with -v 3 and inspect the failure log"])

    def create_failure_log_filename(self, operation: str, extension: str = "log") -> str:
        """
        Create a timestamped failure-log path below <output root>/failures.
        """
        try:
            from .common import get_output_file_path
        except ImportError:
            from common import get_output_file_path

        safe_operation = "".join(c for c in operation if c.isalnum() or c in "_-").lower()
        filename = f"paraspec_{safe_operation}_{self.start_timestamp_str}.{extension}"
        return get_output_file_path(filename, self.output_root, "failures")

    def write_failure_log(self, filename: str, content: str, append: bool = True) -> bool:
        """
        Write failure information to a timestamped log file.

        Returns:
            True if successful, False if failed
        """
        try:
            mode = "a" if append else "w"
            with open(filename, mode, encoding="utf-8") as f:
                f.write(content)
                f.write("\n")

            if self.output_manager and self.output_manager.get_verbose_level() >= 2:
                self.output_manager.print_general_message(f"Failure log written to: {filename}")

            return True

        except Exception as e:
            if self.output_manager:
                self.output_manager.print_general_error(f"Failed to write log file {filename}: {e}")
            return False

    def log_critical_failure(self, error_info: ErrorInfo, additional_context: str = "") -> None:
        """
        Log a terminating failure with its structured details and traceback.
        """
        filename = self.create_failure_log_filename("critical_failures")
        timestamp = time.strftime("%Y-%m-%d %H:%M:%S", time.localtime())
        exc = error_info.original_exception
        details = exc.to_dict() if isinstance(exc, ToolboxError) else {}

        log_content = f"""
=== CRITICAL FAILURE LOG ===
Timestamp: {timestamp}
Category: {error_info.category.value}
Stage: {error_info.stage or 'N/A'}
Message: {error_info.message}
Exception Type: {type(exc).__name__}
Exception Details: {str(exc)}
Structured Details: {details}

Additional Context: {additional_context}

Traceback:
{''.join(traceback.format_exception(type(exc), exc, exc.__traceback__))}
=== END CRITICAL FAILURE LOG ===
"""

        self.write_failure_log(filename, log_content)

    def log_stage_failures(self, stage: str, failures: list, summary: str = "") -> None:
        """
        Log the non-terminating failures collected during one stage.
        """
        filename = self.create_failure_log_filename(f"{stage}_failures")
        timestamp = time.strftime("%Y-%m-%d %H:%M:%S", time.localtime())

        log_content = f"""
=== {stage.upper()} FAILURES LOG ===
Timestamp: {timestamp}
Total Failures: {len(failures)}

{summary}

Failure Details:
"""

        for i, failure in enumerate(failures, 1):
            if isinstance(failure, ErrorInfo):
                log_content += f"""
Failure #{i}:
  Stage: {failure.stage or 'N/A'}
  Category: {failure.category.value}
  Message: {failure.message}
  Exception: {type(failure.original_exception).__name__}: {str(failure.original_exception)}
"""
            else:
                log_content += f"""
Failure #{i}: {str(failure)}
"""

        log_content += f"""
=== END {stage.upper()} FAILURES LOG ===
"""

        self.write_failure_log(filename, log_content)


class ExceptionContext:
    """
    Context manager for handling exceptions in specific operations.

    Non-terminating errors (numerical, precondition, resolution, artifact) are
    recorded and suppressed; terminating ones are re-raised after reporting.
    """

    def __init__(self, error_manager: ErrorManager, operation: str, stage: Optional[str] = None):
        self.error_manager = error_manager
        self.operation = operation
        self.stage = stage
        self.error_occurred = False
        self.error_info: Optional[ErrorInfo] = None

    def __enter__(self):
        """Enter the context."""
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """
        Exit the context and handle any exception.

        Returns:
            True to suppress the exception, False to re-raise
        """
        if exc_type is not None:
            self.error_occurred = True
            self.error_info = self.error_manager.handle_exception(
                exc_val,
                context=self.operation,
                stage=self.stage
            )

            return not self.error_info.should_terminate

        return False
