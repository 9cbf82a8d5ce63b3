#!/usr/bin/env python3
"""
Unit tests for parax - paraproducts, symbols, quantization and parametrices.
"""

import math
import os
import sys
import unittest

import numpy as np

sys.path.insert(0, os.path.join(os.path.dirname(os.path.abspath(__file__)), '..'))
from src.error_manager import ConfigurationError, PreconditionError
from src.parax import (
    SymbolGrid, adjoint_symbol, bony_remainder, compose_symbols, cone_angle, differential_symbol,
    elliptic_parametrix_apply, garding_margin, make_symbol, multiplier_from_expression, paraproduct,
    quantize, regularize_symbol, remainder_gain,
)
from src.spectral_core import (
    PeriodicField, constant_field, dyadic_multipliers, estimate_regularity, grid_points, low_pass,
    lp_decompose, single_mode, spectral_gradient, sup_norm, synthesize_field,
)


def _random(N=64, n=2, seed=0):
    return PeriodicField(np.random.default_rng(seed).standard_normal((N,) * n), n)


def _trig(N, expr):
    x, = grid_points(N, 1)
    return PeriodicField(expr(2 * np.pi * x), 1)


class TestParaproduct(unittest.TestCase):

    def test_constant_left_factor(self):
        """T_c b = c (b - Delta_{-1} b)."""
        b = _random()
        low = lp_decompose(b).block(-1).values
        np.testing.assert_allclose(paraproduct(constant_field(3.0, 64, 2), b).values, 3.0 * (b.values - low),
                                   atol=1e-12)

    def test_constant_right_factor(self):
        self.assertLess(sup_norm(paraproduct(_random(), constant_field(2.0, 64, 2))), 1e-13)

    def test_brute_force_double_sum(self):
        a, b = _random(seed=1), _random(seed=2)
        A, B = lp_decompose(a), lp_decompose(b)
        expected = np.zeros_like(a.values)
        for k in range(0, B.J + 1):
            for j in range(-1, k):
                expected += A.block(j).values * B.block(k).values
        np.testing.assert_allclose(paraproduct(a, b).values, expected, atol=1e-12)

    def test_bony_identity(self):
        a, b = _random(seed=3), _random(seed=4)
        total = paraproduct(a, b).values + paraproduct(b, a).values + bony_remainder(a, b).values
        product = a.values * b.values
        self.assertLessEqual(np.max(np.abs(product - total)), 1e-12 * np.max(np.abs(product)))

    def test_bony_identity_over_random_pairs(self):
        rng = np.random.default_rng(128)
        for _ in range(100):
            a = PeriodicField(rng.standard_normal((128, 128)), 2)
            b = PeriodicField(rng.standard_normal((128, 128)), 2)
            total = paraproduct(a, b).values + paraproduct(b, a).values + bony_remainder(a, b).values
            product = a.values * b.values
            self.assertLessEqual(np.max(np.abs(product - total)), 1e-12 * np.max(np.abs(product)))

    def test_single_mode_remainder(self):
        """For a = b = e_k the remainder is (sum_j psi_j(k)^2) e_2k."""
        N, k = 64, (5, 3)
        mode = single_mode(N, k)
        weight = float(np.sum(dyadic_multipliers(N, 2)[:, k[0], k[1]] ** 2))
        self.assertGreater(weight, 0.0)
        self.assertLess(weight, 1.0)
        expected = weight * single_mode(N, (2 * k[0], 2 * k[1])).values
        np.testing.assert_allclose(bony_remainder(mode, mode).values, expected, atol=1e-12)

    def test_remainder_symmetric_bit_for_bit(self):
        a, b = _random(seed=5), _random(seed=6)
        np.testing.assert_array_equal(bony_remainder(a, b).values, bony_remainder(b, a).values)

    def test_remainder_with_constant(self):
        b = _random(seed=7)
        expected = 2.0 * lp_decompose(b).block(-1).values
        np.testing.assert_allclose(bony_remainder(constant_field(2.0, 64, 2), b).values, expected, atol=1e-12)

    def test_bilinearity(self):
        a, b, c = _random(seed=8), _random(seed=9), _random(seed=10)
        lhs = paraproduct(a.scale(2.0) + c, b).values
        rhs = 2.0 * paraproduct(a, b).values + paraproduct(c, b).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_grid_mismatch(self):
        with self.assertRaises(ConfigurationError):
            paraproduct(_random(N=32), _random(N=64))

    def test_remainder_gains_regularity(self):
        """C^0.6 times H^1.0 leaves a remainder in H^1.45 or better."""
        rng = np.random.default_rng(21)
        a = synthesize_field(512, 2, 0.6 + 1.0, rng)
        b = synthesize_field(512, 2, 1.0 + 1.0, rng)
        gain = remainder_gain(a, b)
        self.assertGreaterEqual(gain["sobolev_remainder"], 1.45)
        self.assertEqual(set(gain), {"holder_a", "sobolev_b", "sobolev_remainder", "target"})


class TestQuantization(unittest.TestCase):

    def test_identity_symbol(self):
        u = _random(N=32)
        a = make_symbol(32, 2, [(1.0, "identity")], 0.0)
        np.testing.assert_allclose(quantize(a, u).values, u.values, atol=1e-13)
        self.assertTrue(a.is_differential)

    def test_first_order_differential_operator(self):
        """v(x) (i k_1) quantizes to v d/dx_1 / 2 pi."""
        u = low_pass(_random(N=32, seed=12), 8.0)
        v = PeriodicField(2.0 + np.cos(2 * np.pi * grid_points(32, 2)[1]), 2)
        a = differential_symbol({(1, 0): v})
        expected = v.values * spectral_gradient(u).values[..., 0] / (2 * np.pi)
        np.testing.assert_allclose(quantize(a, u).values, expected, atol=1e-10)
        self.assertEqual(a.m_order, 1.0)

    def test_bracket_on_single_mode(self):
        u = single_mode(32, (2, 0))
        a = make_symbol(32, 2, [(1.0, "japanese_bracket_pow 0.5")], 0.5)
        np.testing.assert_allclose(quantize(a, u).values, 5.0 ** 0.25 * u.values, atol=1e-12)

    def test_linearity_in_u(self):
        a = make_symbol(16, 2, [(_random(N=16, seed=1), "monomial 0,1"), (1.0, "japanese_bracket_pow 1")], 1.0)
        u, w = _random(N=16, seed=2), _random(N=16, seed=3)
        lhs = quantize(a, u.scale(3.0) + w).values
        rhs = 3.0 * quantize(a, u).values + quantize(a, w).values
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)

    def test_real_symbols_preserve_real_fields(self):
        a = make_symbol(16, 2, [(1.0, "japanese_bracket_pow 1")], 1.0)
        self.assertTrue(quantize(a, _random(N=16)).is_real)

    def test_unknown_expression(self):
        with self.assertRaises(ConfigurationError):
            multiplier_from_expression("laplacian 2", 16, 2)
        with self.assertRaises(ConfigurationError):
            multiplier_from_expression("band 9", 16, 2)

    def test_empty_symbol_rejected(self):
        with self.assertRaises(ConfigurationError):
            SymbolGrid([], 0.0)

    def test_cone_angle_on_axis(self):
        ang = cone_angle(16, 2, (1.0, 0.0))
        self.assertEqual(ang[3, 0], 0.0)
        self.assertAlmostEqual(ang[0, 3], math.pi / 2)
        self.assertAlmostEqual(ang[-3, 0], 0.0)


class TestRegularization(unittest.TestCase):

    def test_split_is_exact(self):
        coeff = synthesize_field(64, 2, 1.8, np.random.default_rng(4))
        p = make_symbol(64, 2, [(coeff, "monomial 1,0"), (1.0, "identity")], 1.0, regularity_tag=0.8)
        sharp, flat = regularize_symbol(p)
        u = _random(N=64, seed=9)
        np.testing.assert_allclose(quantize(sharp, u).values + quantize(flat, u).values, quantize(p, u).values,
                                   atol=1e-12)
        self.assertAlmostEqual(flat.m_order, 0.2)

    def test_x_independent_symbol_has_no_flat_part(self):
        p = make_symbol(32, 2, [(2.0, "japanese_bracket_pow 1")], 1.0)
        sharp, flat = regularize_symbol(p)
        u = _random(N=32, seed=2)
        self.assertLess(sup_norm(quantize(flat, u)), 1e-12)
        np.testing.assert_allclose(quantize(sharp, u).values, quantize(p, u).values, atol=1e-12)

    def test_single_x_mode_cutoff(self):
        """a = cos(2 pi 8x): the sharp part vanishes below |k| = 16 and is all of a above 128."""
        N = 512
        a = _trig(N, lambda t: np.cos(8 * t))
        sharp, _ = regularize_symbol(make_symbol(N, 1, [(a, "identity")], 0.0))
        for k in (5, 12):
            self.assertLess(sup_norm(quantize(sharp, single_mode(N, (k,)))), 1e-12)
        for k in (130, 200):
            mode = single_mode(N, (k,))
            np.testing.assert_allclose(quantize(sharp, mode).values, a.values * mode.values, atol=1e-12)

    def test_flat_part_gains_derivatives(self):
        """C^0.8 coefficient, order one: Op(p_flat) takes H^0.5 into H^0.3."""
        rng = np.random.default_rng(8)
        N = 2048
        coeff = synthesize_field(N, 1, 0.8 + 0.5, rng)
        u = synthesize_field(N, 1, 0.5 + 0.5, rng)
        p = differential_symbol({(1,): coeff}, regularity_tag=0.8)
        flat = regularize_symbol(p)[1]
        flat_est = estimate_regularity(quantize(flat, u), "sobolev").exponent
        full_est = estimate_regularity(quantize(p, u), "sobolev").exponent
        self.assertGreaterEqual(flat_est, 0.5 - flat.m_order - 0.15)
        self.assertGreater(flat_est - full_est, 0.5)


class TestCompositionAndAdjoint(unittest.TestCase):

    def test_composition_of_first_order_operators(self):
        N = 32
        v = _trig(N, lambda t: 1.5 + np.sin(t))
        w = _trig(N, lambda t: 2.0 + np.cos(t))
        u = _trig(N, lambda t: np.sin(3 * t))
        p, q = differential_symbol({(1,): v}), differential_symbol({(1,): w})
        composed = compose_symbols(p, q)
        self.assertEqual(composed.m_order, 2.0)
        np.testing.assert_allclose(quantize(composed, u).values, quantize(p, quantize(q, u)).values, atol=1e-10)

    def test_adjoint_identity(self):
        N = 32
        a = _trig(N, lambda t: 2.0 + np.cos(t))
        u = _trig(N, lambda t: np.sin(2 * t) + np.cos(3 * t))
        v = _trig(N, lambda t: np.cos(5 * t))
        p = differential_symbol({(1,): a})
        lhs = np.mean(quantize(p, u).values * np.conj(v.values))
        rhs = np.mean(u.values * np.conj(quantize(adjoint_symbol(p), v).values))
        self.assertAlmostEqual(complex(lhs), complex(rhs), places=10)

    def test_regularized_composition_remainder(self):
        """C^1.5 coefficients: Op(p#)Op(q#) - Op((pq)#) loses at most 1.5 of the two orders."""
        rng = np.random.default_rng(15)
        N, r, s = 2048, 1.5, 1.0
        v = synthesize_field(N, 1, r + 0.5, rng)
        w = synthesize_field(N, 1, r + 0.5, rng)
        u = synthesize_field(N, 1, s + 0.5, rng)
        p = differential_symbol({(1,): v}, regularity_tag=r)
        q = differential_symbol({(1,): w}, regularity_tag=r)
        composed_sharp = regularize_symbol(compose_symbols(p, q, order=math.ceil(r)))[0]
        p_sharp, q_sharp = regularize_symbol(p)[0], regularize_symbol(q)[0]
        remainder = quantize(p_sharp, quantize(q_sharp, u)) - quantize(composed_sharp, u)
        est = estimate_regularity(remainder, "sobolev")
        self.assertFalse(est.trivial)
        self.assertGreaterEqual(est.exponent, s - 2.0 + (r - 1.0) - 0.15)

    def test_composition_needs_differential_form(self):
        p = make_symbol(16, 1, [(1.0, "japanese_bracket_pow 1")], 1.0)
        with self.assertRaises(ConfigurationError):
            compose_symbols(p, p)


class TestGardingAndParametrix(unittest.TestCase):

    def test_multiplication_operator_is_nonnegative(self):
        a = make_symbol(32, 2, [(PeriodicField(1 + np.cos(2 * np.pi * grid_points(32, 2)[0]), 2), "identity")], 0.0)
        report = garding_margin(a, 200, np.random.default_rng(1))
        self.assertEqual(report.exact_subcase, "multiplication")
        self.assertTrue(report.hard_nonnegative)
        self.assertGreaterEqual(report.raw_min, -1e-12)

    def test_nonnegative_multiplier(self):
        a = make_symbol(32, 2, [(1.0, "norm_pow 2 * japanese_bracket_pow -2")], 0.0)
        report = garding_margin(a, 200, np.random.default_rng(2))
        self.assertEqual(report.exact_subcase, "fourier_multiplier")
        self.assertTrue(report.hard_nonnegative)

    def test_mixed_symbol_margin(self):
        coeff = PeriodicField(1 + np.cos(2 * np.pi * grid_points(64, 2)[0]), 2)
        a = make_symbol(64, 2, [(coeff, "norm_pow 1 * japanese_bracket_pow -1")], 0.0)
        report = garding_margin(a, 200, np.random.default_rng(3))
        self.assertEqual(report.trials, 200)
        self.assertEqual(len(report.ratios), 200)
        self.assertTrue(math.isfinite(report.fitted_C))
        self.assertGreaterEqual(report.margin_at_unit_C, 0.0)
        self.assertLessEqual(report.fitted_C, 1.0)
        self.assertIsNone(report.exact_subcase)
        self.assertIsNone(report.to_dict()["hard_nonnegative"])

    def test_sign_violation_rejected(self):
        coeff = PeriodicField(np.cos(2 * np.pi * grid_points(16, 2)[0]), 2)
        with self.assertRaises(PreconditionError) as ctx:
            garding_margin(make_symbol(16, 2, [(coeff, "identity")], 0.0), 5, np.random.default_rng(0))
        self.assertIn("x", ctx.exception.location)

    def test_elliptic_multiplier_inverts_exactly(self):
        a = make_symbol(64, 2, [(1.0, "japanese_bracket_pow 1")], 1.0)
        result = elliptic_parametrix_apply(a, (1.0, 0.0), math.radians(20), _random(seed=3))
        self.assertLessEqual(result.relative_error, 1e-10)

    def test_variable_coefficient_parametrix_gains_one_order(self):
        N = 512
        x, _ = grid_points(N, 2)
        coeff = PeriodicField(2.0 + np.sin(2 * np.pi * x), 2)
        a = make_symbol(N, 2, [(coeff, "monomial 1,0")], 1.0)
        f = synthesize_field(N, 2, 2.0, np.random.default_rng(20))
        result = elliptic_parametrix_apply(a, (1.0, 0.0), math.radians(20), f, band_range=(4, 6))
        self.assertGreaterEqual(result.gain, 0.85)

    def test_characteristic_cone_rejected(self):
        a = make_symbol(64, 2, [(1.0, "monomial 1,0")], 1.0)
        with self.assertRaises(PreconditionError):
            elliptic_parametrix_apply(a, (0.0, 1.0), math.radians(10), _random(seed=4))


def run_parax_tests():
    """Run all parax tests."""
    print("Running parax tests...\n")
    suite = unittest.TestSuite()
    loader = unittest.TestLoader()
    for case in (TestParaproduct, TestQuantization, TestRegularization, TestCompositionAndAdjoint,
                 TestGardingAndParametrix):
        suite.addTests(loader.loadTestsFromTestCase(case))
    result = unittest.TextTestRunner(verbosity=2).run(suite)
    return 0 if result.wasSuccessful() else 1


if __name__ == "__main__":
    sys.exit(run_parax_tests())
