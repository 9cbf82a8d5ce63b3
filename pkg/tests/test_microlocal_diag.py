#!/usr/bin/env python3
"""
Unit tests for microlocal_diag - cone energies, wavefront proxies and thresholds.
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))
from src.dynamics import RateReport, make_system
from src.error_manager import ConfigurationError, PreconditionError
from src.microlocal_diag import (
    bunching_margin, cone_decay_contrast, cone_energy, cone_mask, dual_directions, location_margins,
    rigidity_thresholds, threshold_sign_report, threshold_sweep, wavefront_test,
)
from src.spectral_core import PeriodicField, grid_points, synthesize_field

CAT = [[2, 1], [1, 1]]
CAT_RATE = math.log((3 + math.sqrt(5)) / 2)


def _kink(N=512):
    """|sin(pi x1)|: a crease along x1 = 0 whose spectrum lies on the k1 axis."""
    x1, _ = grid_points(N, 2)
    return PeriodicField(np.abs(np.sin(np.pi * x1)), 2)


class TestConeEnergy(unittest.TestCase):

    def test_white_noise_fraction(self):
        """A two-sided 15 degree cone holds 2 * 15/180 of isotropic energy."""
        u = PeriodicField(np.random.default_rng(0).standard_normal((256, 256)), 2)
        profile = cone_energy(u, (1.0, 2.0), math.radians(15))
        for j, inside, outside in profile.per_band[5:8]:
            self.assertAlmostEqual(inside / (inside + outside), 2 * 15 / 180, delta=0.02, msg=f"band {j}")

    def test_profile_layout(self):
        u = PeriodicField(np.random.default_rng(1).standard_normal((32, 32)), 2)
        profile = cone_energy(u, (1.0, 0.0))
        self.assertEqual(len(profile.per_band), u.J + 2)
        self.assertAlmostEqual(profile.to_dict()["aperture_deg"], 15.0)

    def test_cone_mask_includes_origin(self):
        mask = cone_mask(16, 2, (1.0, 0.0), math.radians(10))
        self.assertTrue(mask[0, 0])
        self.assertTrue(mask[5, 0])
        self.assertTrue(mask[-5, 0])
        self.assertFalse(mask[0, 5])
        with self.assertRaises(ConfigurationError):
            cone_mask(16, 2, (1.0, 0.0), 0.0)


class TestWavefront(unittest.TestCase):

    def test_crease_direction_in_wavefront(self):
        result = wavefront_test(_kink(), (1.0, 0.0), 2.0)
        self.assertEqual(result.status, "in_wf")
        self.assertAlmostEqual(result.exponent, 1.5, delta=0.15)
        self.assertEqual(set(result.sensitivity), {"10", "20"})

    def test_transverse_direction_is_trivial(self):
        self.assertEqual(wavefront_test(_kink(), (0.0, 1.0), 2.0).status, "trivial")

    def test_smooth_field_not_in_wavefront(self):
        u = synthesize_field(512, 2, 3.0 + 1.0, np.random.default_rng(2))
        result = wavefront_test(u, (1.0, 1.0), 1.5)
        self.assertEqual(result.status, "not_in_wf")
        self.assertIsNotNone(result.to_dict()["exponent"])

    def test_beyond_resolution(self):
        self.assertEqual(wavefront_test(_kink(), (1.0, 0.0), 60.0).status, "beyond_resolution")

    def test_decay_contrast(self):
        u = _kink() + synthesize_field(512, 2, 5.0, np.random.default_rng(3))
        contrast = cone_decay_contrast(u, (1.0, 0.0))
        self.assertGreater(contrast["contrast"], 1.0)
        self.assertEqual(contrast["bands"], [3, 7])

    def test_dual_directions_annihilate_bundles(self):
        sys_ = make_system(CAT)
        eu_star, es_star = dual_directions(sys_)
        split = sys_.linear_splitting()
        self.assertAlmostEqual(float(eu_star @ split.e_u), 0.0, places=12)
        self.assertAlmostEqual(float(es_star @ split.e_s), 0.0, places=12)


class TestThresholds(unittest.TestCase):

    def test_cat_map_thresholds(self):
        rates = RateReport(CAT_RATE, CAT_RATE, CAT_RATE, CAT_RATE)
        t = rigidity_thresholds(rates)
        self.assertAlmostEqual(t.rigidity_threshold, 2.0, delta=0.01)
        self.assertAlmostEqual(t.regularity_lower_bound, 2.0, delta=0.01)
        self.assertIsNone(t.contact_threshold)
        self.assertEqual(rigidity_thresholds(rates, dim=3, volume_preserving=True).contact_threshold, 2.0)

    def test_unconverged_rates_refused(self):
        with self.assertRaises(PreconditionError):
            rigidity_thresholds(RateReport(1.0, 1.1, 1.0, 1.1, relative_change=0.2, converged=False))

    def test_bunching_margin(self):
        self.assertAlmostEqual(bunching_margin(RateReport(1.0, 1.0, 1.0, 1.0), 2.0, 1.0), 0.0)
        self.assertGreater(bunching_margin(RateReport(1.0, 1.0, 1.0, 1.0), 3.0, 1.0), 0.0)

    def test_location_margins(self):
        I = np.array([1.0])
        self.assertAlmostEqual(float(location_margins("sink_Eu_star", 2.0, I, I)[0]), 0.0)
        self.assertLess(float(location_margins("source_Es_star", 2.0, I, I)[0]), 0.0)
        self.assertAlmostEqual(float(location_margins("reversed_source_Eu_star", 2.0, I, I)[0]), 0.0)
        with self.assertRaises(ConfigurationError):
            location_margins("saddle", 2.0, I, I)

    def test_margin_changes_sign_at_two(self):
        sys_ = make_system(CAT)
        below = threshold_sign_report(sys_, 1.9, T=16, samples=32, rng=np.random.default_rng(4))
        above = threshold_sign_report(sys_, 2.1, T=16, samples=32, rng=np.random.default_rng(4))
        self.assertTrue(below.certified)
        self.assertFalse(above.certified)
        self.assertAlmostEqual(below.max_margin, -0.1 * CAT_RATE, delta=1e-3)

    def test_sweep(self):
        sweep = threshold_sweep(make_system(CAT), [1.9, 2.1], T=16, samples=16, rng=np.random.default_rng(5))
        self.assertLess(sweep[0][1], 0.0)
        self.assertGreater(sweep[1][1], 0.0)


def run_microlocal_diag_tests():
    """Run all microlocal_diag tests."""
    print("Running microlocal_diag tests...\n")
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for case in (TestConeEnergy, TestWavefront, TestThresholds):
        suite.addTests(loader.loadTestsFromTestCase(case))
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_microlocal_diag_tests())
