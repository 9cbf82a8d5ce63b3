"""
OutputManager - Centralized output control and verbose logging for the paraspec toolbox.

This module provides output management with support for different verbosity
levels, consistent formatting, colored output and proper stream handling.
Numerical modules never print directly; they accept an optional OutputManager
and report stage progress, iterations and per-band detail through it.

Key Features:
- Multiple verbose levels (0: statistics only, 1: stage status, 2: iteration progress, 3: per-band detail)
- Colored output using colorama for better visual tracking
- Proper stream separation (stdout for normal output, stderr for errors)
- Integration with statistics reporting

Classes:
    OutputLevel: Enumeration of output verbosity levels
    OutputConfig: Configuration data structure for output behavior
    OutputManager: Main output coordination and formatting
"""

import sys
from dataclasses import dataclass
from enum import Enum
from typing import Optional, TextIO

# Import common color constants
try:
    from .common import (
        info_lt_clr, info_dk_clr, section_clr, error_clr, warn_clr, ok_clr, reset_clr,
        SECTION_BAR_WIDTH
    )
except ImportError:
    # Fall back to absolute imports (when run as a script)
    from common import (
        info_lt_clr, info_dk_clr, section_clr, error_clr, warn_clr, ok_clr, reset_clr,
        SECTION_BAR_WIDTH
    )


class OutputLevel(Enum):
    """Output verbosity levels with detailed descriptions."""
    QUIET = -1     # No output at all (quiet mode)
    LEVEL_0 = 0    # Only final statistics
    LEVEL_1 = 1    # Stage start/finish status + statistics
    LEVEL_2 = 2    # Iteration progress + all above
    LEVEL_3 = 3    # Per-band and per-orbit detail + all above


@dataclass
class OutputConfig:
    """Configuration for output behavior."""
    level: OutputLevel = OutputLevel.LEVEL_0
    output_stream: TextIO = sys.stdout
    error_stream: TextIO = sys.stderr


class OutputManager:
    """
    Manages all toolbox output with support for multiple verbose levels and colors.

    - Level 0: Only final statistics
    - Level 1: Stage status + statistics
    - Level 2: Iteration progress + statistics
    - Level 3: Per-band / per-orbit detail + all above
    - Quiet mode suppresses everything except critical errors
    """

    def __init__(self, verbose_level: int = 0, quiet: bool = False,
                 output_stream: TextIO = sys.stdout, error_stream: TextIO = sys.stderr):
        """
        Initialize OutputManager with specified verbose level.

        Args:
            verbose_level: Verbosity level (0-3)
            quiet: Enable quiet mode suppressing all output
            output_stream: Stream for normal output (default: stdout)
            error_stream: Stream for error output (default: stderr)
        """
        # Quiet mode takes precedence over verbose levels
        if quiet:
            self.level = OutputLevel.QUIET
        elif verbose_level >= 3:
            self.level = OutputLevel.LEVEL_3
        elif verbose_level >= 2:
            self.level = OutputLevel.LEVEL_2
        elif verbose_level >= 1:
            self.level = OutputLevel.LEVEL_1
        else:
            self.level = OutputLevel.LEVEL_0

        self.config = OutputConfig(
            level=self.level,
            output_stream=output_stream,
            error_stream=error_stream
        )

        self.current_stage: Optional[str] = None

    def is_quiet(self) -> bool:
        """Check if quiet mode is enabled."""
        return self.config.level == OutputLevel.QUIET

    def get_verbose_level(self) -> int:
        """Get current verbose level as integer."""
        return self.config.level.value

    def print_stage_start(self, stage: str, progress: Optional[tuple] = None) -> None:
        """
        Print a stage start line (Level 1+).

        Args:
            stage: Stage name
            progress: Optional (current, total) counter
        """
        self.current_stage = stage
        if self.config.level.value >= OutputLevel.LEVEL_1.value:
            counter = f" {progress[0]}/{progress[1]}" if progress else ""
            self._write_output(f"{info_lt_clr}→ Stage{counter}: {warn_clr}{stage}")

    def print_stage_complete(self, stage: str, summary: str = "", ok: bool = True) -> None:
        """
        Print a stage completion line (Level 1+).
        """
        if self.config.level.value >= OutputLevel.LEVEL_1.value:
            color = ok_clr if ok else error_clr
            mark = "✓" if ok else "✗"
            tail = f": {summary}" if summary else ""
            self._write_output(f"{color}{mark} Completed {stage}{tail}")
        self.current_stage = None

    def print_iteration(self, label: str, iteration: int, value: float) -> None:
        """
        Print one iteration of a fixed-point or sweep loop (Level 2+).
        """
        if self.config.level.value >= OutputLevel.LEVEL_2.value:
            self._write_output(f"  {info_dk_clr}{label} [{iteration:4d}]: {info_lt_clr}{value:.6e}")

    def print_band_row(self, label: str, j: int, *values: float) -> None:
        """
        Print a per-band or per-orbit detail row (Level 3).
        """
        if self.config.level == OutputLevel.LEVEL_3:
            cols = "  ".join(f"{v: .6e}" for v in values)
            self._write_output(f"    {info_dk_clr}{label} j={j:3d}: {info_lt_clr}{cols}")

    def print_artifact_written(self, path: str, status: str = "complete") -> None:
        """
        Print an artifact-written line (Level 2+).
        """
        if self.config.level.value >= OutputLevel.LEVEL_2.value:
            color = ok_clr if status == "complete" else warn_clr
            self._write_output(f"  {color}WROTE [{status}] {info_lt_clr}{path}")

    def print_error(self, stage: str, error: BaseException) -> None:
        """
        Print error message for a stage (always, even in quiet mode).
        """
        self._write_error(f"{error_clr}ERROR in stage {warn_clr}{stage}{error_clr}: {error}{reset_clr}")

    def print_timeout_warning(self, elapsed_time: float, timeout_seconds: int) -> None:
        """
        Print timeout warning message.
        """
        if self.config.level != OutputLevel.QUIET:
            self._write_output(f"{warn_clr}Timeout reached after {elapsed_time:.1f} seconds "
                               f"(limit: {timeout_seconds} seconds){reset_clr}")

    def print_section(self, title: str) -> None:
        """Print a colored section header (Level 1+)."""
        if self.config.level.value >= OutputLevel.LEVEL_1.value:
            self._write_output(f"\n{section_clr}{'=' * SECTION_BAR_WIDTH}{reset_clr}")
            self._write_output(f"{section_clr}{title}{reset_clr}")
            self._write_output(f"{section_clr}{'=' * SECTION_BAR_WIDTH}{reset_clr}")

    def print_startup_info(self, name: str, grid: int, seed: int, output_root: str, jobs: int) -> None:
        """
        Print startup information about the experiment (Level 3).
        """
        if self.config.level == OutputLevel.LEVEL_3:
            self._write_output("Starting experiment:")
            self.print_info_pair("  Name", name)
            self.print_info_pair("  Grid N", str(grid))
            self.print_info_pair("  Seed", str(seed))
            self.print_info_pair("  Output root", output_root)
            self.print_info_pair("  Jobs", str(jobs))

    def print_completion_message(self, ok: bool = True) -> None:
        """Print run completion message."""
        if self.config.level != OutputLevel.QUIET:
            if ok:
                self._write_output(f"{ok_clr}Run completed{reset_clr}")
            else:
                self._write_output(f"{warn_clr}Run completed with failures; partial artifacts are marked{reset_clr}")

    def print_general_message(self, message: str) -> None:
        """Print general informational message."""
        if self.config.level != OutputLevel.QUIET:
            self._write_output(message)

    def print_general_error(self, message: str) -> None:
        """Print general error message (always, even in quiet mode)."""
        self._write_error(f"{error_clr}{message}{reset_clr}")

    def print_warning(self, message: str) -> None:
        """Print warning message in yellow."""
        if self.config.level != OutputLevel.QUIET:
            self._write_output(f"{warn_clr}{message}{reset_clr}")

    def print_info_pair(self, description: str, value: str) -> None:
        """
        Print description: value pair with light gray description and white value.
        """
        if self.config.level != OutputLevel.QUIET:
            self._write_output(f"{info_dk_clr}{description}: {info_lt_clr}{value}{reset_clr}")

    def _write_output(self, message: str) -> None:
        try:
            print(message, file=self.config.output_stream)
            self.config.output_stream.flush()
        except Exception:
            # Fallback to stderr if stdout fails
            try:
                print(message, file=sys.stderr)
                sys.stderr.flush()
            except Exception:
                pass

    def _write_error(self, message: str) -> None:
        try:
            print(message, file=self.config.error_stream)
            self.config.error_stream.flush()
        except Exception:
            # Fallback to stdout if stderr fails
            try:
                print(message, file=sys.stdout)
                sys.stdout.flush()
            except Exception:
                pass
