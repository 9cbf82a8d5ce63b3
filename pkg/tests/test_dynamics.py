#!/usr/bin/env python3
"""
Unit tests for dynamics - test systems, orbits, rates and frames.
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))
from src.error_manager import ConfigurationError, PreconditionError
from src.dynamics import (
    SystemKind, axes_frames, build_frames, eigen_frames, flow_point, frame_orientation, jacobian_cocycle,
    lyapunov_rates, make_system, matrix_power_field, pullback, riccati_coefficients, sample_points,
    single_mode_perturbation, synthesize_perturbation, system_from_manifest, transfer_matrices,
    verify_cone_condition,
)
from src.spectral_core import PeriodicField, grid_points, spectral_gradient

CAT = [[2, 1], [1, 1]]
CAT_RATE = math.log((3 + math.sqrt(5)) / 2)
NEG_CAT = [[-2, -1], [-1, -1]]


def _wrap(d):
    return np.mod(d + 0.5, 1.0) - 0.5


def _perturbed(amplitude=0.1):
    return make_system(CAT, single_mode_perturbation(amplitude))


class TestConstruction(unittest.TestCase):

    def test_cat_map_splitting(self):
        split = make_system(CAT).linear_splitting()
        self.assertAlmostEqual(split.lambda_u, (3 + math.sqrt(5)) / 2, places=12)
        self.assertAlmostEqual(split.log_rate, CAT_RATE, places=12)
        self.assertGreater(split.e_u[0], 0)
        self.assertAlmostEqual(float(split.e_u @ split.e_s), 0.0, places=12)

    def test_matrix_validation(self):
        with self.assertRaises(PreconditionError):
            make_system([[2, 0], [0, 1]])
        with self.assertRaises(PreconditionError):
            make_system([[1, 1], [0, 1]])
        with self.assertRaises(ConfigurationError):
            make_system([[2.5, 1], [1, 1]])
        with self.assertRaises(ConfigurationError):
            make_system([[2, 1, 0], [1, 1, 0]])

    def test_roof_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            make_system(CAT, roof=0.0)

    def test_perturbation_shape_checked(self):
        with self.assertRaises(ConfigurationError):
            make_system(CAT, PeriodicField(np.zeros(16), 1))

    def test_manifest_keys(self):
        with self.assertRaises(ConfigurationError):
            system_from_manifest({"matrix": CAT, "colour": "red"})
        with self.assertRaises(ConfigurationError):
            system_from_manifest({"matrix": CAT, "perturbation_file": "p.pfld", "synth": {"amplitude": 0.1}})
        with self.assertRaises(ConfigurationError):
            system_from_manifest({"matrix": CAT, "synth": {"kind": "fractal", "amplitude": 0.1}})
        with self.assertRaises(ConfigurationError):
            system_from_manifest({"roof": 1.0})

    def test_manifest_builds_suspension(self):
        sys_ = system_from_manifest({"matrix": CAT, "roof": 2.0, "synth": {"kind": "single_mode", "amplitude": 0.05}})
        self.assertEqual(sys_.kind, SystemKind.SUSPENSION)
        self.assertEqual(sys_.period, 2.0)
        self.assertFalse(sys_.is_linear)

    def test_zero_amplitude_is_linear(self):
        self.assertTrue(system_from_manifest({"matrix": CAT, "synth": {"amplitude": 0.0}}).is_linear)

    def test_cone_condition_counts_points(self):
        self.assertEqual(verify_cone_condition(_perturbed(), samples=32, steps=5), 32 * 5)


class TestPerturbations(unittest.TestCase):

    def test_single_mode_derivative_bound(self):
        p = single_mode_perturbation(0.2, N=64)
        dp = spectral_gradient(p.component(0)).values[:, 0]
        self.assertAlmostEqual(float(np.max(np.abs(dp))), 0.2, places=10)

    def test_synthesized_derivative_bound(self):
        p = synthesize_perturbation(0.3, 2.0, 16, np.random.default_rng(5))
        for c in range(2):
            dp = spectral_gradient(p.component(c)).values[:, 0]
            self.assertLessEqual(float(np.max(np.abs(dp))), 0.3 * (1 + 1e-9))

    def test_synthesis_reproducible(self):
        a = synthesize_perturbation(0.1, 3.0, 8, np.random.default_rng(1))
        b = synthesize_perturbation(0.1, 3.0, 8, np.random.default_rng(1))
        np.testing.assert_array_equal(a.values, b.values)
        with self.assertRaises(ConfigurationError):
            synthesize_perturbation(0.1, 3.0, 0, np.random.default_rng(1))


class TestOrbits(unittest.TestCase):

    def test_inverse_undoes_forward(self):
        sys_ = _perturbed()
        x = sample_points(64, np.random.default_rng(0))
        np.testing.assert_allclose(_wrap(sys_.inverse(sys_.forward(x)) - x), 0.0, atol=1e-12)
        inv = sys_.inverse_system()
        np.testing.assert_allclose(_wrap(inv.forward(x) - sys_.inverse(x)), 0.0, atol=1e-12)

    def test_area_preserving(self):
        x = sample_points(64, np.random.default_rng(1))
        np.testing.assert_allclose(np.linalg.det(_perturbed(0.3).jacobian(x)), 1.0, atol=1e-12)

    def test_jacobian_matches_finite_differences(self):
        sys_ = _perturbed(0.3)
        x = sample_points(8, np.random.default_rng(2))
        h = 1e-6
        J = sys_.jacobian(x)
        for d in range(2):
            e = np.zeros(2)
            e[d] = h
            fd = _wrap(sys_.forward(x + e) - sys_.forward(x - e)) / (2 * h)
            np.testing.assert_allclose(fd, J[:, :, d], atol=1e-6)

    def test_flow_point_crosses_roof(self):
        sys_ = make_system(CAT, roof=2.0)
        x = np.array([0.1, 0.3])
        p, tau = flow_point(sys_, x, 0.5, 3.0)
        np.testing.assert_allclose(p, np.mod(np.array(CAT) @ x, 1.0), atol=1e-14)
        self.assertAlmostEqual(tau, 1.5)
        p, tau = flow_point(sys_, x, 0.5, -1.0)
        np.testing.assert_allclose(_wrap(np.array(CAT) @ p - x), 0.0, atol=1e-14)
        self.assertAlmostEqual(tau, 1.5)

    def test_jacobian_cocycle_linear(self):
        sys_ = make_system(CAT)
        A = np.array(CAT, dtype=float)
        np.testing.assert_allclose(jacobian_cocycle(sys_, [0.2, 0.7], 3), np.linalg.matrix_power(A, 3), atol=1e-10)
        np.testing.assert_allclose(jacobian_cocycle(sys_, [0.2, 0.7], -2),
                                   np.linalg.matrix_power(np.linalg.inv(A), 2), atol=1e-10)
        with self.assertRaises(ConfigurationError):
            jacobian_cocycle(sys_, [0.2, 0.7], 1.5)

    def test_suspension_cocycle_keeps_flow_direction(self):
        sys_ = make_system(CAT, roof=1.0)
        D = jacobian_cocycle(sys_, [0.2, 0.7], 2.5)
        self.assertEqual(D.shape, (3, 3))
        self.assertEqual(D[2, 2], 1.0)


class TestPullback(unittest.TestCase):

    def test_linear_pullback_is_a_permutation(self):
        N = 32
        x1, x2 = grid_points(N, 2)
        u = PeriodicField(np.cos(2 * np.pi * x1) + np.sin(2 * np.pi * 3 * x2), 2)
        pts = np.stack([x1, x2], axis=-1).reshape(-1, 2)
        pre = make_system(CAT).inverse(pts)
        expected = np.cos(2 * np.pi * pre[:, 0]) + np.sin(2 * np.pi * 3 * pre[:, 1])
        np.testing.assert_allclose(pullback(make_system(CAT), u).values.reshape(-1), expected, atol=1e-10)

    def test_perturbed_pullback(self):
        N = 64
        sys_ = _perturbed(0.1)
        x1, x2 = grid_points(N, 2)
        u = PeriodicField(np.cos(2 * np.pi * (x1 + x2)), 2)
        pre = sys_.inverse(np.stack([x1, x2], axis=-1).reshape(-1, 2))
        expected = np.cos(2 * np.pi * (pre[:, 0] + pre[:, 1]))
        np.testing.assert_allclose(pullback(sys_, u).values.reshape(-1), expected, atol=1e-8)

    def test_inverse_pullback_undoes_pullback(self):
        N = 32
        x1, x2 = grid_points(N, 2)
        u = PeriodicField(np.sin(2 * np.pi * x1) * np.cos(2 * np.pi * x2), 2)
        sys_ = make_system(CAT)
        back = pullback(sys_.inverse_system(), pullback(sys_, u))
        np.testing.assert_allclose(back.values, u.values, atol=1e-12)

    def test_pullback_needs_torus_field(self):
        with self.assertRaises(ConfigurationError):
            pullback(make_system(CAT), PeriodicField(np.zeros(16), 1))


class TestRates(unittest.TestCase):

    def test_cat_map_rates(self):
        report = lyapunov_rates(make_system(CAT), T=32, samples=64, rng=np.random.default_rng(3))
        for value in (report.nu_u_min, report.nu_u_max, abs(report.nu_s_min), abs(report.nu_s_max)):
            self.assertAlmostEqual(value, CAT_RATE, delta=1e-3)
        self.assertTrue(report.converged)
        self.assertEqual(report.lambda_u, report.nu_u_min)

    def test_suspension_rates_per_unit_time(self):
        report = lyapunov_rates(make_system(CAT, roof=2.0), T=32, samples=32, rng=np.random.default_rng(4))
        self.assertAlmostEqual(report.nu_u_min, CAT_RATE / 2.0, delta=1e-3)
        self.assertAlmostEqual(report.T_used, 32.0)

    def test_perturbed_rates_stay_hyperbolic(self):
        report = lyapunov_rates(_perturbed(0.1), T=32, samples=64, rng=np.random.default_rng(5))
        self.assertGreater(report.nu_u_min, 0.5)
        self.assertLessEqual(report.nu_u_min, report.nu_u_max)


class TestFrames(unittest.TestCase):

    def test_linear_frames_are_exact(self):
        frames = build_frames(make_system(CAT), 0.05, 16)
        self.assertTrue(frames.constant)
        self.assertLess(frames.unstable_error, 1e-10)
        self.assertAlmostEqual(frames.transversality(), 1.0, places=10)

    def test_perturbed_frames_within_eps(self):
        frames = build_frames(_perturbed(0.05), 0.05, 32)
        self.assertLess(frames.unstable_error, 0.05)
        self.assertLess(frames.stable_error, 0.05)
        self.assertFalse(frames.constant)
        self.assertEqual(set(frames.to_dict()), {"label", "N", "unstable_error", "stable_error",
                                                  "stable_holder_error", "cutoffs", "transversality"})

    def test_eps_must_be_positive(self):
        with self.assertRaises(ConfigurationError):
            build_frames(make_system(CAT), 0.0, 16)

    def test_transfer_matrices(self):
        sys_ = make_system(CAT)
        M = transfer_matrices(sys_, axes_frames(8))
        np.testing.assert_allclose(M, np.broadcast_to(np.array(CAT, dtype=float), M.shape), atol=1e-12)
        split = sys_.linear_splitting()
        D = transfer_matrices(sys_, eigen_frames(sys_, 8))
        np.testing.assert_allclose(D[..., 0, 0], split.lambda_u, atol=1e-12)
        np.testing.assert_allclose(D[..., 1, 1], split.lambda_s, atol=1e-12)
        np.testing.assert_allclose(D[..., 0, 1], 0.0, atol=1e-12)

    def test_matrix_power_field(self):
        M = np.broadcast_to(np.diag([4.0, 0.25]), (3, 3, 2, 2))
        np.testing.assert_allclose(matrix_power_field(M, 0.5)[0, 0], np.diag([2.0, 0.5]), atol=1e-12)
        with self.assertRaises(PreconditionError):
            matrix_power_field(np.broadcast_to(np.diag([-1.0, 2.0]), (2, 2, 2, 2)), 0.5)

    def test_riccati_coefficients_for_eigen_frames(self):
        sys_ = make_system(CAT, roof=1.0)
        coeffs = riccati_coefficients(sys_, eigen_frames(sys_, 8))
        np.testing.assert_allclose(coeffs.b.values, -2 * CAT_RATE, atol=1e-6)
        self.assertLess(coeffs.smallness, 1e-6)
        self.assertLess(coeffs.gluing_defect, 1e-10)

    def test_riccati_coefficients_for_negative_trace(self):
        """-A has the slope dynamics of A; its frames follow the positive matrix A."""
        sys_ = make_system(NEG_CAT, roof=1.0)
        coeffs = riccati_coefficients(sys_, axes_frames(8))
        np.testing.assert_array_equal(coeffs.sign, -1.0)
        self.assertLess(coeffs.gluing_defect, 1e-10)
        self.assertEqual(coeffs.to_dict()["flipped_points"], 64)
        eigen = riccati_coefficients(sys_, eigen_frames(sys_, 8))
        np.testing.assert_allclose(eigen.b.values, -2 * CAT_RATE, atol=1e-6)
        positive = riccati_coefficients(make_system(CAT, roof=1.0), axes_frames(8))
        np.testing.assert_allclose(coeffs.b.values, positive.b.values, atol=1e-12)
        np.testing.assert_array_equal(positive.sign, 1.0)

    def test_frame_orientation(self):
        M = np.array([[[2.0, 1.0], [1.0, 1.0]], [[-2.0, -1.0], [-1.0, -1.0]]])
        np.testing.assert_array_equal(frame_orientation(M), [1.0, -1.0])


def run_dynamics_tests():
    """Run all dynamics tests."""
    print("Running dynamics tests...\n")
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for case in (TestConstruction, TestPerturbations, TestOrbits, TestPullback, TestRates, TestFrames):
        suite.addTests(loader.loadTestsFromTestCase(case))
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_dynamics_tests())
