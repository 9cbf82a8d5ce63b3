#!/usr/bin/env python3
"""
Test suite for common utilities and constants.

Covers timestamps, output-root resolution, exit handling, lattice helpers
and the seeded generators shared by every module.
"""

import os
import sys
import tempfile
import unittest
from unittest.mock import patch

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from src import common
from src.common import (
    DEFAULT_OUTPUT_ROOT, DEFAULT_SEED, EXIT_ERROR, EXIT_INTERRUPTED, EXIT_SUCCESS, OUTPUT_ROOT_ENV,
    ensure_output_directory, format_elapsed_time, format_timestamp_for_filename, get_current_timestamp,
    get_execution_start_timestamp, get_output_file_path, is_power_of_two, log2_int, make_rng,
    print_section_bar, resolve_output_root, safe_exit, setup_module_path, spawn_rng,
)


class TestTimestampUtilities(unittest.TestCase):
    """Timestamp and elapsed-time helpers."""

    def test_get_current_timestamp(self):
        first = get_current_timestamp()
        self.assertIsInstance(first, float)
        self.assertGreaterEqual(get_current_timestamp(), first)

    def test_format_elapsed_time(self):
        self.assertGreaterEqual(format_elapsed_time(get_current_timestamp() - 1.0), 1.0)

    def test_filename_timestamp_format(self):
        text = format_timestamp_for_filename(0.0)
        self.assertRegex(text, r"^\d{8}_\d{6}$")
        ts, formatted = get_execution_start_timestamp()
        self.assertEqual(formatted, format_timestamp_for_filename(ts))


class TestOutputRoot(unittest.TestCase):
    """--out, then the environment variable, then ./output."""

    def test_explicit_wins(self):
        with patch.dict(os.environ, {OUTPUT_ROOT_ENV: "/env/root"}):
            self.assertEqual(resolve_output_root("results"), "results")

    def test_environment_variable(self):
        with patch.dict(os.environ, {OUTPUT_ROOT_ENV: "/env/root"}):
            self.assertEqual(resolve_output_root(None), "/env/root")

    def test_default(self):
        env = {k: v for k, v in os.environ.items() if k != OUTPUT_ROOT_ENV}
        with patch.dict(os.environ, env, clear=True):
            self.assertEqual(resolve_output_root(), DEFAULT_OUTPUT_ROOT)

    def test_ensure_output_directory_nested(self):
        with tempfile.TemporaryDirectory() as root:
            path = ensure_output_directory(root, "bundle", "frames")
            self.assertTrue(os.path.isdir(path))
            self.assertEqual(get_output_file_path("x.json", root, "bundle"),
                             os.path.join(root, "bundle", "x.json"))


class TestExitAndPaths(unittest.TestCase):

    @patch('sys.exit')
    @patch('builtins.print')
    def test_safe_exit_error_message_to_stderr(self, mock_print, mock_exit):
        safe_exit(EXIT_ERROR, "broken")
        mock_exit.assert_called_once_with(EXIT_ERROR)
        self.assertIs(mock_print.call_args.kwargs.get("file"), sys.stderr)

    @patch('sys.exit')
    @patch('builtins.print')
    def test_safe_exit_success_no_message(self, mock_print, mock_exit):
        safe_exit(EXIT_SUCCESS)
        mock_print.assert_not_called()
        mock_exit.assert_called_once_with(EXIT_SUCCESS)

    def test_setup_module_path(self):
        src_dir = os.path.dirname(os.path.abspath(common.__file__))
        with patch.object(sys, "path", [p for p in sys.path if p != src_dir]):
            setup_module_path()
            self.assertEqual(sys.path[0], src_dir)

    @patch('builtins.print')
    def test_print_section_bar(self, mock_print):
        print_section_bar(10)
        self.assertIn("=" * 10, mock_print.call_args.args[0])

    def test_exit_codes(self):
        self.assertEqual((EXIT_SUCCESS, EXIT_ERROR, EXIT_INTERRUPTED), (0, 1, 2))


class TestLatticeHelpers(unittest.TestCase):

    def test_is_power_of_two(self):
        for n in (1, 2, 64, 1024, np.int64(256)):
            self.assertTrue(is_power_of_two(n))
        for n in (0, -4, 3, 96, 64.0, "64"):
            self.assertFalse(is_power_of_two(n))

    def test_log2_int(self):
        self.assertEqual(log2_int(1), 0)
        self.assertEqual(log2_int(256), 8)


class TestGenerators(unittest.TestCase):
    """One seeded generator per experiment, stage streams spawned by label."""

    def test_make_rng_reproducible(self):
        self.assertEqual(make_rng(7).random(), make_rng(7).random())
        self.assertEqual(make_rng(None).random(), make_rng(DEFAULT_SEED).random())

    def test_spawn_rng_depends_on_label_only(self):
        parent = make_rng(7)
        a = spawn_rng(parent, "thresholds").random(3)
        parent.random(100)
        b = spawn_rng(parent, "thresholds").random(3)
        np.testing.assert_array_equal(a, b)
        c = spawn_rng(parent, "resonances").random(3)
        self.assertFalse(np.array_equal(a, c))

    def test_spawn_rng_distinct_labels_distinct_streams(self):
        parent = make_rng(7)
        # same character-weighted sum
        self.assertFalse(np.array_equal(spawn_rng(parent, "ab").random(4), spawn_rng(parent, "ca").random(4)))
        self.assertFalse(np.array_equal(spawn_rng(parent, "ba").random(4), spawn_rng(parent, "ab").random(4)))
        child = spawn_rng(parent, "resonances")
        self.assertFalse(np.array_equal(spawn_rng(child, "potential").random(4),
                                        spawn_rng(parent, "potential").random(4)))
        np.testing.assert_array_equal(spawn_rng(child, "potential").random(4),
                                      spawn_rng(spawn_rng(make_rng(7), "resonances"), "potential").random(4))

    def test_spawn_rng_depends_on_seed(self):
        a = spawn_rng(make_rng(1), "system").random()
        b = spawn_rng(make_rng(2), "system").random()
        self.assertNotEqual(a, b)


def run_common_tests():
    """Run all common utility tests."""
    print("Running common utility tests...\n")
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for case in (TestTimestampUtilities, TestOutputRoot, TestExitAndPaths, TestLatticeHelpers, TestGenerators):
        suite.addTests(loader.loadTestsFromTestCase(case))
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_common_tests())
