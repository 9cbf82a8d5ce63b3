"""
TimeoutManager - Wall-clock budget for paraspec pipeline runs.

Pipeline stages are long, indivisible numerical computations, so the budget
is enforced between stages: the pipeline asks should_continue_processing()
before starting each stage and stops with partial artifacts marked when the
budget is exhausted. A background timer flips the flag so a callback (for
example a console warning) fires at the deadline.

Classes:
    TimeoutManager: Main timeout coordination and detection
"""

import threading
import time
from typing import Callable, Optional

try:
    from .error_manager import StageTimeoutError
except ImportError:
    from error_manager import StageTimeoutError


class TimeoutManager:
    """
    Manages the run's time budget. timeout_seconds <= 0 disables it.
    """

    def __init__(self, timeout_seconds: int = 0):
        """
        Args:
            timeout_seconds: Maximum execution time in seconds. 0 means no timeout.
        """
        self.timeout_seconds = timeout_seconds
        self.start_time = self._get_current_time()
        self.timeout_reached = False
        self._timer: Optional[threading.Timer] = None

    def is_timeout_reached(self) -> bool:
        """
        Check if timeout has been reached.
        """
        if self.timeout_seconds <= 0:
            return False

        elapsed = self._get_current_time() - self.start_time
        if elapsed >= self.timeout_seconds:
            self.timeout_reached = True

        return self.timeout_reached

    def get_elapsed_time(self) -> float:
        """Elapsed seconds since the manager was created or reset."""
        return self._get_current_time() - self.start_time

    def get_remaining_time(self) -> float:
        """
        Remaining seconds before timeout, or inf if no timeout is set.
        """
        if self.timeout_seconds <= 0:
            return float('inf')

        remaining = self.timeout_seconds - self.get_elapsed_time()
        return max(0.0, remaining)

    def setup_timeout_handler(self, callback: Optional[Callable[[], None]] = None) -> None:
        """
        Start a daemon timer that marks the timeout and runs the callback.
        """
        if self.timeout_seconds <= 0:
            return

        def timeout_handler():
            self.timeout_reached = True
            if callback:
                callback()

        remaining = self.timeout_seconds - self.get_elapsed_time()

        if remaining > 0:
            self._timer = threading.Timer(remaining, timeout_handler)
            self._timer.daemon = True  # Don't prevent program exit
            self._timer.start()

    def cancel_timeout(self) -> None:
        """Cancel the timeout timer if it's active."""
        if self._timer and self._timer.is_alive():
            self._timer.cancel()

    def reset_timer(self) -> None:
        """Reset the budget to start counting from now."""
        self.start_time = self._get_current_time()
        self.timeout_reached = False
        if self._timer:
            self._timer.cancel()

    def should_continue_processing(self) -> bool:
        """True while the budget allows starting another stage."""
        return not self.is_timeout_reached()

    def check_before_stage(self, stage: str) -> None:
        """
        Raise StageTimeoutError if the budget is spent before `stage` starts.
        """
        if self.should_continue_processing():
            return
        raise StageTimeoutError(
            f"time budget of {self.timeout_seconds}s exhausted before stage '{stage}'",
            stage=stage,
            elapsed=round(self.get_elapsed_time(), 3),
        )

    def __enter__(self):
        """Context manager entry."""
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        """Context manager exit - cleanup timer."""
        self.cancel_timeout()

    def _get_current_time(self) -> float:
        """Get current timestamp - can be overridden for testing."""
        return time.time()
