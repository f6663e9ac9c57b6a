import unittest

import numpy as np
from numpy.testing import assert_allclose

from jetreg.config import ConfigurationError, RegistrationConfig
from jetreg.factory import PRESETS, RegistrationProblemFactory
from jetreg.image import ScalarImage, synthetic
from jetreg.reg_types import InvalidArgumentError, OrderMismatchError, Rectangle


class TestRegistrationProblemFactory(unittest.TestCase):

    def test_presets(self):
        self.assertEqual(len(PRESETS), 9)
        for name in PRESETS:
            state = RegistrationProblemFactory.create_preset_state(name, 0.25)
            self.assertEqual((state.order, state.n_particles), (2, 1))
            assert_allclose(state.q1[0], np.eye(2))
        none = RegistrationProblemFactory.create_preset_state("none", 0.25)
        self.assertFalse(np.any(none.p) or np.any(none.mu1) or np.any(none.mu2))
        bend = RegistrationProblemFactory.create_preset_state("bend_xy", 0.25)
        assert_allclose(bend.mu2, bend.symmetrized().mu2)

    def test_unknown_preset(self):
        with self.assertRaises(InvalidArgumentError):
            RegistrationProblemFactory.create_preset_state("twist", 0.25)

    def test_problem_wiring(self):
        config = RegistrationConfig(grid=3, jet_order=1, match_order=1, steps=7, sigma=0.2, smooth=0.0)
        problem = RegistrationProblemFactory.create_synthetic_problem(
            synthetic("blob", 24), synthetic("bar", 24), config)
        self.assertEqual(problem.initial.n_particles, 9)
        self.assertEqual(problem.jet_order, 1)
        self.assertEqual(problem.steps, 7)
        self.assertEqual(problem.spec.sigma, 0.2)
        self.assertEqual(problem.match.match_order, 1)

    def test_region_limits_particles(self):
        config = RegistrationConfig(grid=2, smooth=0.0).merged({"region": "0.25,0.25,0.75,0.75"})
        problem = RegistrationProblemFactory.create_synthetic_problem(
            synthetic("blob", 24), synthetic("blob", 24), config)
        self.assertTrue(np.all(problem.initial.q >= 0.25) and np.all(problem.initial.q <= 0.75))

    def test_region_outside_domain(self):
        config = RegistrationConfig(grid=2, smooth=0.0).merged({"region": "0.5,0.5,1.5,1.0"})
        with self.assertRaises(InvalidArgumentError):
            RegistrationProblemFactory.create_synthetic_problem(
                synthetic("blob", 24), synthetic("blob", 24), config)

    def test_images_required(self):
        with self.assertRaises(ConfigurationError):
            RegistrationProblemFactory.create_problem(RegistrationConfig())

    def test_match_order_above_jet_order(self):
        config = RegistrationConfig(grid=2, jet_order=0, match_order=2, smooth=0.0)
        with self.assertRaises(OrderMismatchError):
            RegistrationProblemFactory.create_synthetic_problem(
                synthetic("blob", 24), synthetic("blob", 24), config)

    def test_test_problem_is_deterministic(self):
        a = RegistrationProblemFactory.create_test_problem(seed=5)
        b = RegistrationProblemFactory.create_test_problem(seed=5)
        assert_allclose(a.samples.values, b.samples.values, rtol=0, atol=0)
        c = RegistrationProblemFactory.create_test_problem(seed=6)
        self.assertEqual(a.momentum_size, c.momentum_size)

    def test_domains_must_agree(self):
        fixed = synthetic("blob", 24)
        moving = ScalarImage(pixels=fixed.pixels, domain=Rectangle(0.0, 0.0, 2.0, 2.0))
        with self.assertRaises(InvalidArgumentError):
            RegistrationProblemFactory.create_synthetic_problem(fixed, moving, RegistrationConfig(smooth=0.0))


if __name__ == '__main__':
    unittest.main()
