"""
Unit tests for TimeoutManager class - the between-stage time budget.
"""

import os
import sys
import threading
import time
import unittest
from unittest.mock import Mock

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))

from src.error_manager import StageTimeoutError
from src.timeout_manager import TimeoutManager


class TestTimeoutManager(unittest.TestCase):
    """Test cases for TimeoutManager class."""

    def test_no_timeout_initialization(self):
        tm = TimeoutManager(0)
        self.assertEqual(tm.timeout_seconds, 0)
        self.assertFalse(tm.timeout_reached)
        self.assertIsNone(tm._timer)

    def test_no_timeout_behavior(self):
        """A zero budget never expires."""
        tm = TimeoutManager(0)
        self.assertFalse(tm.is_timeout_reached())
        self.assertEqual(tm.get_remaining_time(), float('inf'))
        self.assertTrue(tm.should_continue_processing())
        tm.check_before_stage("bundle")

    def test_timeout_reached_with_mocked_clock(self):
        tm = TimeoutManager(5)
        tm._get_current_time = Mock(return_value=tm.start_time + 6.0)
        self.assertTrue(tm.is_timeout_reached())
        self.assertEqual(tm.get_remaining_time(), 0.0)
        self.assertFalse(tm.should_continue_processing())

    def test_timeout_not_reached_with_mocked_clock(self):
        tm = TimeoutManager(5)
        tm._get_current_time = Mock(return_value=tm.start_time + 2.0)
        self.assertFalse(tm.is_timeout_reached())
        self.assertAlmostEqual(tm.get_remaining_time(), 3.0)

    def test_check_before_stage_raises_structured_error(self):
        tm = TimeoutManager(1)
        tm._get_current_time = Mock(return_value=tm.start_time + 1.5)
        with self.assertRaises(StageTimeoutError) as ctx:
            tm.check_before_stage("resonances")
        details = ctx.exception.to_dict()
        self.assertEqual(details["type"], "StageTimeoutError")
        self.assertEqual(details["stage"], "resonances")
        self.assertIn("resonances", details["message"])

    def test_timer_callback_fires(self):
        """The background timer marks the timeout and runs the callback."""
        fired = threading.Event()
        tm = TimeoutManager(1)
        tm.setup_timeout_handler(fired.set)
        self.assertTrue(fired.wait(3.0))
        self.assertTrue(tm.timeout_reached)
        tm.cancel_timeout()

    def test_cancel_timeout(self):
        callback = Mock()
        tm = TimeoutManager(2)
        tm.setup_timeout_handler(callback)
        tm.cancel_timeout()
        time.sleep(0.1)
        callback.assert_not_called()

    def test_no_timer_without_budget(self):
        tm = TimeoutManager(0)
        tm.setup_timeout_handler(Mock())
        self.assertIsNone(tm._timer)

    def test_reset_timer(self):
        tm = TimeoutManager(5)
        tm.timeout_reached = True
        tm.reset_timer()
        self.assertFalse(tm.timeout_reached)
        self.assertTrue(tm.should_continue_processing())

    def test_context_manager_cancels(self):
        callback = Mock()
        with TimeoutManager(2) as tm:
            tm.setup_timeout_handler(callback)
            self.assertIsNotNone(tm._timer)
        time.sleep(0.1)
        self.assertFalse(tm._timer.is_alive())
        callback.assert_not_called()


def run_timeout_manager_tests():
    """Run all TimeoutManager tests."""
    print("Running TimeoutManager tests...\n")
    suite = unittest.TestLoader().loadTestsFromTestCase(TestTimeoutManager)
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_timeout_manager_tests())
