#!/usr/bin/env python3
"""
Unit tests for spectral_core - fields, dyadic blocks, norms and regularity fits.
"""

import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))
from src.error_manager import ConfigurationError
from src.spectral_core import (
    PeriodicField, constant_field, dyadic_multipliers, estimate_regularity, fourier_interpolate,
    fourier_shift, grid_points, holder_norm, l2_norm, low_pass, lp_decompose, resample, single_mode,
    sobolev_norm, spectral_gradient, sup_norm, synthesize_field, validate_band_range, weierstrass_field,
)


def _random_field(N=64, n=2, seed=3, complex_valued=False):
    rng = np.random.default_rng(seed)
    shape = (N,) * n
    values = rng.standard_normal(shape)
    if complex_valued:
        values = values + 1j * rng.standard_normal(shape)
    return PeriodicField(values, n)


class TestPeriodicField(unittest.TestCase):
    """Grid validation and basic accessors."""

    def test_non_power_of_two_rejected(self):
        with self.assertRaises(ConfigurationError):
            PeriodicField(np.zeros(48), 1)

    def test_anisotropic_grid_rejected(self):
        with self.assertRaises(ConfigurationError):
            PeriodicField(np.zeros((32, 64)), 2)

    def test_domain_dimension_rejected(self):
        with self.assertRaises(ConfigurationError):
            PeriodicField(np.zeros((4, 4, 4, 4)), 4)

    def test_vector_field_shapes(self):
        u = PeriodicField(np.zeros((16, 16, 2, 2)), 2)
        self.assertEqual(u.N, 16)
        self.assertEqual(u.dims, (16, 16))
        self.assertEqual(u.value_shape, (2, 2))
        self.assertEqual(u.J, 3)
        self.assertEqual(u.component(0, 1).value_shape, ())

    def test_grid_mismatch_on_add(self):
        with self.assertRaises(ConfigurationError):
            _ = constant_field(1.0, 16, 2) + constant_field(1.0, 32, 2)

    def test_single_mode_coefficient_is_one(self):
        coeffs = single_mode(16, (3, -2)).coefficients()
        self.assertAlmostEqual(abs(coeffs[3, -2]), 1.0, places=12)
        self.assertAlmostEqual(float(np.sum(np.abs(coeffs) ** 2)), 1.0, places=12)


class TestDyadicDecomposition(unittest.TestCase):

    def test_partition_of_unity(self):
        total = dyadic_multipliers(64, 2).sum(axis=0)
        np.testing.assert_allclose(total, 1.0, atol=1e-14)

    def test_constant_lives_in_low_block(self):
        u = constant_field(2.5, 32, 2)
        blocks = lp_decompose(u)
        np.testing.assert_allclose(blocks.block(-1).values, u.values, atol=1e-14)
        for j in range(0, blocks.J + 1):
            self.assertLess(sup_norm(blocks.block(j)), 1e-14)

    def test_single_mode_energy_location(self):
        """e^{2 pi i 4x} on N = 64 has all its energy in blocks 1..3."""
        u = single_mode(64, (4,))
        blocks = lp_decompose(u)
        energy = {j: l2_norm(blocks.block(j)) ** 2 for j in blocks.indices}
        inside = sum(energy[j] for j in (1, 2, 3))
        self.assertAlmostEqual(inside, 1.0, places=12)
        self.assertLess(max(abs(u.values - blocks.reconstruct().values)), 1e-14)

    def test_exact_reconstruction(self):
        u = _random_field(complex_valued=True)
        rebuilt = lp_decompose(u).reconstruct()
        self.assertLessEqual(sup_norm(u - rebuilt), 1e-12 * sup_norm(u))

    def test_real_fields_give_real_blocks(self):
        blocks = lp_decompose(_random_field())
        self.assertTrue(all(b.is_real for b in blocks.blocks))

    def test_partial_sums_are_cumulative(self):
        blocks = lp_decompose(_random_field(N=32))
        sums = blocks.partial_sums()
        self.assertEqual(len(sums), blocks.J + 2)
        np.testing.assert_allclose(sums[2].values, blocks.partial_sum(1).values, atol=1e-13)
        np.testing.assert_allclose(sums[-1].values, blocks.reconstruct().values, atol=1e-13)
        self.assertEqual(sup_norm(blocks.partial_sum(-2)), 0.0)

    def test_almost_orthogonality(self):
        """sum_j ||Delta_j u||^2 lies between half and all of ||u||^2."""
        u = _random_field(N=128)
        blocks = lp_decompose(u)
        total = float(np.sum(blocks.l2_norms() ** 2))
        self.assertGreaterEqual(total, 0.5 * l2_norm(u) ** 2)
        self.assertLessEqual(total, l2_norm(u) ** 2 * (1 + 1e-12))


class TestNorms(unittest.TestCase):

    def test_sobolev_single_mode(self):
        """|k|^2 = 25, s = 1 gives (1 + 25)^(1/2)."""
        u = single_mode(32, (3, 4))
        self.assertAlmostEqual(sobolev_norm(u, 1.0), np.sqrt(26.0), places=10)

    def test_sobolev_constant(self):
        for s in (-1.0, 0.0, 2.5):
            self.assertAlmostEqual(sobolev_norm(constant_field(-3.0, 16, 2), s), 3.0, places=12)

    def test_plancherel(self):
        u = _random_field(complex_valued=True)
        self.assertAlmostEqual(sobolev_norm(u, 0.0) / l2_norm(u), 1.0, places=12)

    def test_sobolev_monotone_in_s(self):
        u = _random_field(N=32)
        norms = [sobolev_norm(u, s) for s in (-1.0, 0.0, 0.5, 1.0, 2.0)]
        self.assertEqual(norms, sorted(norms))

    def test_sobolev_matches_lattice_sum(self):
        """u_hat = <k>^-t gives the lattice sum of <k>^(2(s - t))."""
        N, t, s = 64, 3.0, 0.5
        k = np.fft.fftfreq(N, 1.0 / N)
        kx, ky = np.meshgrid(k, k, indexing="ij")
        bracket = np.sqrt(1 + kx ** 2 + ky ** 2)
        u = PeriodicField(np.fft.ifftn(bracket ** (-t)) * N ** 2, 2)
        expected = np.sqrt(np.sum(bracket ** (2 * (s - t))))
        self.assertAlmostEqual(sobolev_norm(u, s) / expected, 1.0, places=10)

    def test_holder_norm_of_weierstrass(self):
        u = weierstrass_field(256, 0.5)
        # every block is one cosine of amplitude 2^(-alpha j)
        self.assertAlmostEqual(holder_norm(u, 0.5), 1.0, places=10)


class TestRegularity(unittest.TestCase):

    def test_sobolev_estimate_of_synthesized_field(self):
        u = synthesize_field(512, 2, 1.5 + 1.0, np.random.default_rng(11))
        est = estimate_regularity(u, "sobolev")
        self.assertGreaterEqual(est.exponent, 1.35)
        self.assertLessEqual(est.exponent, 1.65)
        self.assertEqual(est.bands, [3, 4, 5, 6])
        self.assertFalse(est.trivial)

    def test_holder_estimate_of_weierstrass(self):
        est = estimate_regularity(weierstrass_field(1024, 0.7), "holder")
        self.assertGreaterEqual(est.exponent, 0.6)
        self.assertLessEqual(est.exponent, 0.8)
        self.assertLess(est.residual, 1e-8)

    def test_constant_is_trivial(self):
        est = estimate_regularity(constant_field(1.0, 64, 2), "sobolev")
        self.assertTrue(est.trivial)
        self.assertIsNone(est.to_dict()["exponent"])

    def test_band_range_validation(self):
        with self.assertRaises(ConfigurationError):
            validate_band_range(7, (2, 3))
        with self.assertRaises(ConfigurationError):
            validate_band_range(7, (5, 9))
        self.assertEqual(validate_band_range(9, None), (3, 7))

    def test_unknown_scale(self):
        with self.assertRaises(ConfigurationError):
            estimate_regularity(constant_field(1.0, 64, 1), "besov")


class TestInterpolation(unittest.TestCase):

    def test_gradient_of_sine(self):
        x, = grid_points(64, 1)
        grad = spectral_gradient(PeriodicField(np.sin(2 * np.pi * x), 1))
        np.testing.assert_allclose(grad.values[:, 0], 2 * np.pi * np.cos(2 * np.pi * x), atol=1e-11)

    def test_shift_by_one_cell(self):
        u = _random_field(N=32, n=1)
        shifted = fourier_shift(u, (1.0 / 32,))
        np.testing.assert_allclose(shifted.values, np.roll(u.values, -1), atol=1e-12)

    def test_interpolate_at_grid_points(self):
        u = _random_field(N=16)
        x, y = grid_points(16, 2)
        pts = np.stack([x.ravel(), y.ravel()], axis=1)
        np.testing.assert_allclose(fourier_interpolate(u, pts, chunk=37), u.values.ravel(), atol=1e-12)

    def test_resample_band_limited(self):
        u = single_mode(16, (3, 1))
        fine = resample(u, 64)
        np.testing.assert_allclose(fine.values, single_mode(64, (3, 1)).values, atol=1e-12)
        np.testing.assert_allclose(resample(fine, 16).values, u.values, atol=1e-12)

    def test_resample_real_field_up_and_down(self):
        x, y = grid_points(8, 2)
        u = PeriodicField(np.cos(2 * np.pi * x) + 0.5 * np.sin(2 * np.pi * (x + 2 * y)), 2)
        up = resample(u, 32)
        self.assertTrue(up.is_real)
        X, Y = grid_points(32, 2)
        expected = np.cos(2 * np.pi * X) + 0.5 * np.sin(2 * np.pi * (X + 2 * Y))
        np.testing.assert_allclose(up.values, expected, atol=1e-12)
        np.testing.assert_allclose(resample(up, 8).values, u.values, atol=1e-12)
        np.testing.assert_allclose(resample(constant_field(1.0, 8, 2), 16).values, 1.0, atol=1e-14)

    def test_resample_down_drops_high_modes(self):
        u = single_mode(32, (1, 0)) + single_mode(32, (6, 0))
        coarse = resample(u, 8)
        np.testing.assert_allclose(coarse.values, single_mode(8, (1, 0)).values, atol=1e-12)
        with self.assertRaises(ConfigurationError):
            resample(u, 12)

    def test_low_pass_keeps_low_modes(self):
        u = single_mode(64, (2, 0)) + single_mode(64, (20, 0))
        filtered = low_pass(u, 16.0)
        np.testing.assert_allclose(filtered.values, single_mode(64, (2, 0)).values, atol=1e-12)

    def test_synthesis_is_reproducible(self):
        a = synthesize_field(32, 2, 2.0, np.random.default_rng(5))
        b = synthesize_field(32, 2, 2.0, np.random.default_rng(5))
        np.testing.assert_array_equal(a.values, b.values)
        self.assertTrue(a.is_real)


def run_spectral_core_tests():
    """Run all spectral_core tests."""
    print("Running spectral_core tests...\n")
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for case in (TestPeriodicField, TestDyadicDecomposition, TestNorms, TestRegularity, TestInterpolation):
        suite.addTests(loader.loadTestsFromTestCase(case))
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_spectral_core_tests())
