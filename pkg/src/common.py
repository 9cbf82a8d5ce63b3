"""
Common utilities and constants for the paraspec toolbox.

This module provides shared color definitions, constants, lattice helpers,
output-root resolution and the seeded random generator used across the
numerical and orchestration modules.
"""

import math
import os
import sys
import time
from typing import Optional

import numpy as np

# Import colorama for terminal color support
try:
    from colorama import init, Fore, Style
    init(autoreset=True)  # Automatically reset color constants after each print
    COLORAMA_AVAILABLE = True
except ImportError:
    # Fallback if colorama is not available
    COLORAMA_AVAILABLE = False
    class _MockColor:
        def __getattr__(self, name): return ""
    Fore = Back = Style = _MockColor()

# Common color constants
if COLORAMA_AVAILABLE:
    info_lt_clr = Fore.WHITE + Style.BRIGHT      # info_lt_clr: bright white for light info (values)
    info_dk_clr = Fore.LIGHTBLACK_EX             # info_dk_clr: light gray for dark info (descriptions)
    section_clr = Fore.LIGHTCYAN_EX              # section_clr: light cyan for section headers
    error_clr = Fore.RED + Style.BRIGHT          # error_clr: red for errors
    warn_clr = Fore.YELLOW + Style.BRIGHT        # warn_clr: yellow for warnings
    ok_clr = Fore.GREEN                          # ok_clr: green for converged/passed status
    reset_clr = Style.RESET_ALL                  # reset_clr: reset color formatting
else:
    # Empty strings when colorama is not available
    info_lt_clr = ""
    info_dk_clr = ""
    section_clr = ""
    error_clr = ""
    warn_clr = ""
    ok_clr = ""
    reset_clr = ""

# Common constants used across modules
TOOLBOX_VERSION = "1.0.0"
SCHEMA_VERSION = 1
DEFAULT_TIMEOUT_SECONDS = 0  # No timeout by default
DEFAULT_SEED = 20240101
CHUNK_SIZE = 4096  # Lattice points evaluated per chunk in dense symbol checks

# Environment variable overriding the output root (and nothing else)
OUTPUT_ROOT_ENV = "PARASPEC_OUTPUT_ROOT"
DEFAULT_OUTPUT_ROOT = "output"

# Exit codes
EXIT_SUCCESS = 0
EXIT_ERROR = 1
EXIT_INTERRUPTED = 2

# Common formatting constants
SECTION_BAR_WIDTH = 50

# Fields with every block norm below this are spectrally trivial
SPECTRAL_FLOOR = 1e-300


def get_current_timestamp() -> float:
    """
    Get current timestamp with high precision.

    Returns:
        Current time as float timestamp
    """
    return time.time()


def format_elapsed_time(start_time: float) -> float:
    """
    Calculate elapsed time from a start timestamp.

    Args:
        start_time: Starting timestamp

    Returns:
        Elapsed time in seconds as float
    """
    return time.time() - start_time


def format_timestamp_for_filename(timestamp: Optional[float] = None) -> str:
    """
    Format a timestamp for use in failure-log filenames (YYYYMMDD_HHMMSS).
    """
    if timestamp is None:
        timestamp = time.time()
    time_struct = time.localtime(timestamp)
    return time.strftime("%Y%m%d_%H%M%S", time_struct)


def get_execution_start_timestamp() -> tuple[float, str]:
    """
    Get the current timestamp and its formatted filename version.

    Returns:
        Tuple of (timestamp_float, formatted_filename_string)
    """
    timestamp = get_current_timestamp()
    formatted = format_timestamp_for_filename(timestamp)
    return timestamp, formatted


def resolve_output_root(explicit: Optional[str] = None) -> str:
    """
    Resolve the output root: explicit argument, then the environment
    override, then ./output.
    """
    if explicit:
        return explicit
    return os.environ.get(OUTPUT_ROOT_ENV) or DEFAULT_OUTPUT_ROOT


def ensure_output_directory(root: Optional[str] = None, *parts: str) -> str:
    """
    Ensure an output directory (optionally nested below the root) exists.

    Args:
        root: Output root; resolved through resolve_output_root when None
        parts: Optional subdirectory components

    Returns:
        Path to the directory
    """
    output_dir = os.path.join(resolve_output_root(root), *parts)
    os.makedirs(output_dir, exist_ok=True)
    return output_dir


def get_output_file_path(filename: str, root: Optional[str] = None, *parts: str) -> str:
    """
    Get the full path for an output file below the output root.
    """
    output_dir = ensure_output_directory(root, *parts)
    return os.path.join(output_dir, filename)


def setup_module_path() -> None:
    """
    Add this directory to sys.path so sibling modules import when run as a script.
    """
    current_dir = os.path.dirname(os.path.abspath(__file__))
    if current_dir not in sys.path:
        sys.path.insert(0, current_dir)


def print_section_bar(width: int = SECTION_BAR_WIDTH) -> None:
    """
    Print a colored section separator bar.

    Args:
        width: Width of the bar (default: 50)
    """
    print(f"{section_clr}{'=' * width}{reset_clr}")


def safe_exit(exit_code: int, message: Optional[str] = None) -> None:
    """
    Safely exit the application with proper error handling.

    Args:
        exit_code: Exit code to use (EXIT_SUCCESS, EXIT_ERROR, or EXIT_INTERRUPTED)
        message: Optional message to print before exiting
    """
    if message:
        if exit_code == EXIT_ERROR:
            print(f"{error_clr}{message}{reset_clr}", file=sys.stderr)
        elif exit_code == EXIT_INTERRUPTED:
            print(f"{warn_clr}{message}{reset_clr}", file=sys.stderr)
        else:
            print(message)

    sys.exit(exit_code)


def is_power_of_two(n: int) -> bool:
    """True for positive integral powers of two (1, 2, 4, ...)."""
    return isinstance(n, (int, np.integer)) and n > 0 and (int(n) & (int(n) - 1)) == 0


def log2_int(n: int) -> int:
    """Exact base-2 logarithm of a power of two."""
    return int(round(math.log2(n)))


def make_rng(seed: Optional[int]) -> np.random.Generator:
    """
    Build the single seeded generator threaded through an experiment.
    """
    return np.random.default_rng(DEFAULT_SEED if seed is None else seed)


def spawn_rng(rng: np.random.Generator, label: str) -> np.random.Generator:
    """
    Derive a stage-local generator deterministically from the parent and a label.

    Draws from the parent are not consumed, so adding or reordering stages
    leaves other stages' streams unchanged. The label bytes, prefixed by
    their length, extend the parent's spawn key, so distinct labels and
    nested spawns never share a stream.
    """
    seq = getattr(rng.bit_generator, "seed_seq", None)
    entropy = DEFAULT_SEED if seq is None else seq.entropy
    parent_key = () if seq is None else tuple(seq.spawn_key)
    data = label.encode("utf-8")
    key = parent_key + (len(data),) + tuple(data)
    return np.random.default_rng(np.random.SeedSequence(entropy, spawn_key=key))
