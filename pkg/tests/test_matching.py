import unittest

import numpy as np
from numpy.testing import assert_allclose

from jetreg.image import AnalyticField, fit_interpolant, synthetic
from jetreg.jet_state import init_grid, symmetrize_last_pair
from jetreg.matching import (MIN_QUAD_RES, MatchConfig, gauss_legendre_nodes, match_endpoint_gradient,
                             match_value, oracle_integral, precompute_fixed)
from jetreg.reg_types import InvalidArgumentError, OrderMismatchError, Rectangle

UNIT = Rectangle.unit_square()


def perturbed_grid(seed: int, n_per_axis: int = 3):
    rng = np.random.default_rng(seed)
    state = init_grid(UNIT, n_per_axis, 2)
    n = state.n_particles
    state.q[...] += 0.03 * rng.normal(size=(n, 2))
    state.q1[...] += 0.1 * rng.normal(size=(n, 2, 2))
    state.q2[...] = symmetrize_last_pair(0.2 * rng.normal(size=(n, 2, 2, 2)))
    return state


class TestMatchValue(unittest.TestCase):

    def test_linear_image_single_sample_is_exact(self):
        state = init_grid(UNIT, 1, 2)
        samples = precompute_fixed(AnalyticField("linear"), state.q)
        cfg = MatchConfig.for_grid(UNIT, 1, 2, sigma_match=1.0)
        self.assertAlmostEqual(match_value(samples, AnalyticField("zero"), state, cfg), 7.0 / 6.0, places=13)

    def test_linear_image_exact_at_every_spacing(self):
        oracle = oracle_integral(AnalyticField("linear"), AnalyticField("zero"))
        self.assertAlmostEqual(oracle, 7.0 / 6.0, places=12)
        for n in (2, 4, 8, 16):
            state = init_grid(UNIT, n, 2)
            samples = precompute_fixed(AnalyticField("linear"), state.q)
            value = match_value(samples, AnalyticField("zero"), state, MatchConfig.for_grid(UNIT, n, 2, 1.0))
            self.assertLess(abs(value - oracle) / oracle, 1e-10)

    def test_zero_order_is_riemann_sum(self):
        state = init_grid(UNIT, 2, 0)
        samples = precompute_fixed(AnalyticField("linear"), state.q)
        value = match_value(samples, AnalyticField("zero"), state, MatchConfig.for_grid(UNIT, 2, 0, 1.0))
        expected = 0.25 * sum((x + y) ** 2 for x, y in state.q)
        self.assertAlmostEqual(value, expected, places=13)

    def test_identical_images_match_exactly(self):
        field = AnalyticField("trig")
        state = init_grid(UNIT, 4, 2)
        samples = precompute_fixed(field, state.q)
        for order in (0, 1, 2):
            self.assertEqual(match_value(samples, field, state, MatchConfig.for_grid(UNIT, 4, order)), 0.0)

    def test_momentum_blocks_do_not_change_the_value(self):
        state = perturbed_grid(41)
        samples = precompute_fixed(AnalyticField("trig"), init_grid(UNIT, 3, 2).q)
        cfg = MatchConfig.for_grid(UNIT, 3, 2)
        reference = match_value(samples, AnalyticField("quadratic"), state, cfg)
        rng = np.random.default_rng(42)
        state.p[...] = rng.normal(size=state.p.shape)
        state.mu1[...] = rng.normal(size=state.mu1.shape)
        state.mu2[...] = symmetrize_last_pair(rng.normal(size=state.mu2.shape))
        self.assertEqual(match_value(samples, AnalyticField("quadratic"), state, cfg), reference)

    def test_match_order_above_jet_order(self):
        state = init_grid(UNIT, 2, 0)
        samples = precompute_fixed(AnalyticField("linear"), state.q)
        with self.assertRaisesRegex(OrderMismatchError, "match order exceeds jet order"):
            match_value(samples, AnalyticField("zero"), state, MatchConfig.for_grid(UNIT, 2, 2))

    def test_invalid_config(self):
        with self.assertRaises(InvalidArgumentError):
            MatchConfig(match_order=3, spacing=(0.5, 0.5))
        with self.assertRaises(InvalidArgumentError):
            MatchConfig(match_order=0, spacing=(0.5, 0.5), sigma_match=0.0)


class TestEndpointGradient(unittest.TestCase):

    def check_gradient(self, fixed_field, moving_field, order, seed):
        state = perturbed_grid(seed)
        samples = precompute_fixed(fixed_field, init_grid(UNIT, 3, 2).q)
        cfg = MatchConfig.for_grid(UNIT, 3, order)
        lam = match_endpoint_gradient(samples, moving_field, state, cfg)
        rng = np.random.default_rng(seed + 1)
        direction = state.zeros_like()
        direction.q[...] = rng.normal(size=state.q.shape)
        direction.q1[...] = rng.normal(size=state.q1.shape)
        direction.q2[...] = symmetrize_last_pair(rng.normal(size=state.q2.shape))
        eps = 1e-6
        fd = (match_value(samples, moving_field, state + eps * direction, cfg)
              - match_value(samples, moving_field, state - eps * direction, cfg)) / (2 * eps)
        exact = lam.dot(direction)
        self.assertAlmostEqual(fd, exact, delta=1e-6 * max(abs(exact), 1.0), msg=f"match order {order}")

    def test_analytic_fields(self):
        for order in (0, 1, 2):
            self.check_gradient(AnalyticField("quadratic"), AnalyticField("trig"), order, 10 + order)

    def test_spline_fields(self):
        fixed = fit_interpolant(synthetic("blob", 32))
        moving = fit_interpolant(synthetic("blob", 32, {"center": (0.55, 0.45)}))
        for order in (0, 1, 2):
            self.check_gradient(fixed, moving, order, 20 + order)

    def test_momentum_blocks_are_zero(self):
        state = perturbed_grid(30)
        samples = precompute_fixed(AnalyticField("linear"), state.q)
        lam = match_endpoint_gradient(samples, AnalyticField("trig"), state, MatchConfig.for_grid(UNIT, 3, 2))
        self.assertFalse(np.any(lam.p) or np.any(lam.mu1) or np.any(lam.mu2))

    def test_scales_with_inverse_sigma_match(self):
        state = perturbed_grid(31)
        samples = precompute_fixed(AnalyticField("quadratic"), state.q)
        base = match_endpoint_gradient(samples, AnalyticField("trig"), state, MatchConfig.for_grid(UNIT, 3, 2, 0.1))
        scaled = match_endpoint_gradient(samples, AnalyticField("trig"), state, MatchConfig.for_grid(UNIT, 3, 2, 0.4))
        assert_allclose(scaled.q, base.q / 4.0, rtol=1e-12)
        assert_allclose(scaled.q2, base.q2 / 4.0, rtol=1e-12, atol=1e-300)


class TestOracle(unittest.TestCase):

    def test_gauss_legendre_integrates_cubics(self):
        nodes, weights = gauss_legendre_nodes(0.0, 2.0, 3)
        self.assertAlmostEqual(float(np.sum(weights * nodes ** 3)), 4.0, places=13)

    def test_translated_pairing(self):
        field = AnalyticField("linear")
        shifted = AnalyticField("linear", shift=(0.05, 0.03))
        # (x + y) - (x + y - 0.08) is constant
        self.assertAlmostEqual(oracle_integral(field, shifted), 0.08 ** 2, places=12)

    def test_minimum_resolution(self):
        with self.assertRaises(InvalidArgumentError):
            oracle_integral(AnalyticField("linear"), AnalyticField("zero"), quad_res=MIN_QUAD_RES // 2)


if __name__ == '__main__':
    unittest.main()
