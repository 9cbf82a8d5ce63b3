"""
StatsTracker - Run statistics tracking and reporting for the paraspec toolbox.

Tracks pipeline stages run and failed, artifacts written, fixed-point
iterations, eigenpairs computed, exceptions and elapsed time, and prints the
closing report.

Classes:
    StatsTracker: Main statistics tracking and reporting coordinator
"""

# Import common utilities and constants
try:
    from .common import (
        section_clr, reset_clr, SECTION_BAR_WIDTH,
        get_current_timestamp, format_elapsed_time, print_section_bar
    )
except ImportError:
    # Fall back to absolute imports (when run as a script)
    from common import (
        section_clr, reset_clr, SECTION_BAR_WIDTH,
        get_current_timestamp, format_elapsed_time, print_section_bar
    )


class StatsTracker:
    """
    Tracks and reports run statistics.

    The tracker records its start time when created; counters are plain
    attributes incremented by the pipeline and by ErrorManager.
    """

    def __init__(self):
        """Initialize the StatsTracker with zero counters and current timestamp."""
        self.stages_run = 0
        self.stages_failed = 0
        self.artifacts_written = 0
        self.iterations = 0
        self.eigenpairs = 0
        self.exceptions = 0
        self.start_time = get_current_timestamp()

    def increment_stages_run(self) -> None:
        """Increment the count of stages executed."""
        self.stages_run += 1

    def increment_stages_failed(self) -> None:
        """Increment the count of stages that failed."""
        self.stages_failed += 1

    def increment_artifacts_written(self) -> None:
        """Increment the count of artifact files written."""
        self.artifacts_written += 1

    def add_iterations(self, count: int) -> None:
        """Add fixed-point / integration iterations performed by a stage."""
        self.iterations += int(count)

    def add_eigenpairs(self, count: int) -> None:
        """Add eigenpairs computed by a resonance stage."""
        self.eigenpairs += int(count)

    def increment_exceptions(self) -> None:
        """Increment the count of exceptions encountered."""
        self.exceptions += 1

    def get_elapsed_time(self) -> float:
        """
        Get the elapsed time since tracking started.

        Returns:
            Elapsed time in seconds as a float with high precision
        """
        return format_elapsed_time(self.start_time)

    def print_report(self, quiet: bool = False, output_manager=None) -> None:
        """
        Print a formatted statistics report with colored headers.

        Args:
            quiet: If True, suppress all output including statistics
            output_manager: OutputManager instance for colored formatting (optional)
        """
        if quiet:
            return

        elapsed_time = self.get_elapsed_time()

        print()
        print_section_bar(SECTION_BAR_WIDTH)
        print(f"{section_clr}RUN STATISTICS{reset_clr}")
        print_section_bar(SECTION_BAR_WIDTH)

        rows = [
            ("Stages run", f"{self.stages_run:,}"),
            ("Stages failed", f"{self.stages_failed:,}"),
            ("Artifacts written", f"{self.artifacts_written:,}"),
            ("Iterations", f"{self.iterations:,}"),
            ("Eigenpairs computed", f"{self.eigenpairs:,}"),
            ("Exceptions encountered", f"{self.exceptions:,}"),
            ("Total execution time", f"{elapsed_time:.2f} seconds"),
        ]
        for label, value in rows:
            if output_manager:
                output_manager.print_info_pair(label, value)
            else:
                print(f"{label}: {value}")

        print_section_bar(SECTION_BAR_WIDTH)

    def get_summary_stats(self) -> dict:
        """
        Get summary statistics as a dictionary.
        """
        return {
            'stages_run': self.stages_run,
            'stages_failed': self.stages_failed,
            'artifacts_written': self.artifacts_written,
            'iterations': self.iterations,
            'eigenpairs': self.eigenpairs,
            'exceptions': self.exceptions,
            'elapsed_time': self.get_elapsed_time()
        }

    def reset_counters(self) -> None:
        """Reset all counters to zero and restart the timer."""
        self.stages_run = 0
        self.stages_failed = 0
        self.artifacts_written = 0
        self.iterations = 0
        self.eigenpairs = 0
        self.exceptions = 0
        self.start_time = get_current_timestamp()

    def has_errors(self) -> bool:
        """True if any exceptions or stage failures were recorded."""
        return self.exceptions > 0 or self.stages_failed > 0
