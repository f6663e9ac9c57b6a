import unittest

import numpy as np
from numpy.testing import assert_allclose

from jetreg.dynamics import state_derivative
from jetreg.kernel import KernelSpec
from jetreg.reg_types import ShapeMismatchError
from jetreg.variations import adjoint_apply, tangent_apply

from .support import random_direction, random_state

SPEC = KernelSpec(0.3)


class TestTangent(unittest.TestCase):

    def test_matches_finite_difference_of_rhs(self):
        eps = 1e-6
        for order in (0, 1, 2):
            state = random_state(100 + order, order, n=3)
            delta = random_direction(200 + order, order, n=3)
            exact = tangent_apply(state, delta, SPEC)
            plus = state_derivative(state + eps * delta, SPEC)
            minus = state_derivative(state - eps * delta, SPEC)
            fd = (plus - minus) * (0.5 / eps)
            for name, value in exact.blocks():
                scale = np.max(np.abs(value)) + 1e-3
                assert_allclose(getattr(fd, name), value, rtol=0, atol=1e-6 * scale,
                                err_msg=f"order {order} block {name}")

    def test_linear_in_delta(self):
        state = random_state(110, 2)
        a, b = random_direction(111, 2), random_direction(112, 2)
        combined = tangent_apply(state, 2.0 * a + b, SPEC)
        separate = 2.0 * tangent_apply(state, a, SPEC) + tangent_apply(state, b, SPEC)
        for name, value in combined.blocks():
            assert_allclose(value, getattr(separate, name), rtol=1e-10, atol=1e-12)

    def test_incompatible_variation(self):
        with self.assertRaises(ShapeMismatchError):
            tangent_apply(random_state(113, 2), random_direction(114, 1), SPEC)


class TestAdjoint(unittest.TestCase):

    def test_transpose_identity_on_random_pairs(self):
        for trial in range(100):
            order = trial % 3
            n = 1 + trial % 4
            state = random_state(300 + trial, order, n=n)
            delta = random_direction(400 + trial, order, n=n)
            lam = random_direction(500 + trial, order, n=n)
            forward = lam.dot(tangent_apply(state, delta, SPEC))
            backward = adjoint_apply(state, lam, SPEC).dot(delta)
            scale = max(abs(forward), 1e-12)
            self.assertLess(abs(forward + backward) / scale, 1e-10, msg=f"trial {trial}, order {order}")

    def test_result_is_symmetric(self):
        state = random_state(600, 2)
        bar = adjoint_apply(state, random_direction(601, 2), SPEC)
        assert_allclose(bar.q2, np.swapaxes(bar.q2, -1, -2), rtol=0, atol=1e-14)
        assert_allclose(bar.mu2, np.swapaxes(bar.mu2, -1, -2), rtol=0, atol=1e-14)


if __name__ == '__main__':
    unittest.main()
