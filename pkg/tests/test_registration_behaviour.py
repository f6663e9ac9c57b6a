"""
End-to-end registration behaviour; set JETREG_SLOW_TESTS=1 to run
"""

import unittest
from dataclasses import replace

import numpy as np

from jetreg.config import RegistrationConfig
from jetreg.factory import RegistrationProblemFactory
from jetreg.flowmap import raster_points, warp_image
from jetreg.image import synthetic
from jetreg.matching import match_value
from jetreg.optimize import energy_and_gradient, register

from .support import SLOW_TESTS

RESOLUTION = 48
# Four particles at (0.4, 0.4) ... (0.6, 0.6), on top of the test shapes
REGION = "0.3,0.3,0.7,0.7"


def solve(fixed, moving, jet_order, match_order, **overrides):
    config = RegistrationConfig(jet_order=jet_order, match_order=match_order, grid=2, region=REGION,
                                sigma=0.3, steps=20, smooth=2.0, maxiter=200).merged(overrides)
    problem = RegistrationProblemFactory.create_synthetic_problem(fixed, moving, config)
    identity, _ = energy_and_gradient(np.zeros(problem.momentum_size), problem)
    return problem, register(problem), identity


def region_mse(a: np.ndarray, b: np.ndarray) -> float:
    nodes = np.linspace(0.0, 1.0, RESOLUTION)
    inside = (nodes >= 0.3) & (nodes <= 0.7)
    window = np.ix_(inside, inside)
    return float(np.mean((a[window] - b[window]) ** 2))


@unittest.skipUnless(SLOW_TESTS, "set JETREG_SLOW_TESTS=1 to run end-to-end registrations")
class TestRegistrationBehaviour(unittest.TestCase):

    def test_translation_is_matched_at_every_order(self):
        fixed = synthetic("blob", RESOLUTION)
        moving = synthetic("blob", RESOLUTION, {"center": (0.6, 0.5)})
        displacements = []
        for order in (0, 2):
            problem, result, identity = solve(fixed, moving, order, order, sigma=0.5, smooth=1.0)
            self.assertLess(result.final_F, 0.1 * identity, msg=f"order {order}")
            displacements.append(result.trajectory.final.q - result.trajectory.initial.q)
            mean_shift = np.mean(displacements[-1], axis=0)
            self.assertAlmostEqual(mean_shift[0], 0.1, delta=0.02, msg=f"order {order}")
        h = problem.match.spacing[0]
        discrepancy = np.mean(np.linalg.norm(displacements[0] - displacements[1], axis=1))
        self.assertLess(discrepancy, 0.1 * h)

    def test_higher_match_order_improves_the_match(self):
        fixed = synthetic("square", RESOLUTION)
        moving = synthetic("bar", RESOLUTION)
        residuals = []
        for match_order in (0, 1, 2):
            problem, result, _ = solve(fixed, moving, 2, match_order)
            # Every run is scored with the same second-order functional
            common = replace(problem.match, match_order=2)
            residuals.append(match_value(problem.samples, problem.moving, result.trajectory.final, common))
        self.assertLess(residuals[1], residuals[0])
        self.assertLess(residuals[2], residuals[1])

        identity = match_value(problem.samples, problem.moving, problem.initial, common)
        self.assertLess(residuals[2], identity)
        warped = warp_image(result.trajectory, problem.moving, RESOLUTION, domain=problem.fixed.domain)
        nodes = raster_points(problem.fixed.domain, RESOLUTION, RESOLUTION)
        unwarped = np.clip(problem.moving.values(nodes), 0.0, 1.0).reshape(RESOLUTION, RESOLUTION)
        before = region_mse(unwarped, problem.fixed.pixels)
        self.assertLess(region_mse(warped.pixels, problem.fixed.pixels), before)


if __name__ == '__main__':
    unittest.main()
