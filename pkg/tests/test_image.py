import tempfile
import unittest
from pathlib import Path

import numpy as np
from numpy.testing import assert_allclose

from jetreg.image import (AnalyticField, ScalarImage, default_domain, eval2, eval3, fit_interpolant,
                          gaussian_smooth, load_image, parse_image_source, save_image, synthetic)
from jetreg.reg_types import ImageFormatError, InvalidArgumentError, Rectangle


def cubic_image(n: int = 16) -> ScalarImage:
    nodes = np.linspace(0.0, 1.0, n)
    gx, gy = np.meshgrid(nodes, nodes)
    return ScalarImage(pixels=cubic(gx, gy), domain=Rectangle.unit_square(), normalized=False)


def cubic(x, y):
    return x ** 3 - 2.0 * x * y ** 2 + y + 0.3


class TestScalarImage(unittest.TestCase):

    def test_default_domain_longer_side_is_one(self):
        domain = default_domain(11, 6)
        self.assertAlmostEqual(domain.x1, 1.0)
        self.assertAlmostEqual(domain.y1, 0.5)

    def test_too_small(self):
        with self.assertRaises(InvalidArgumentError):
            ScalarImage(pixels=np.zeros((3, 8)), domain=Rectangle.unit_square())

    def test_normalized_range(self):
        with self.assertRaises(InvalidArgumentError):
            ScalarImage(pixels=np.full((8, 8), 1.5), domain=Rectangle.unit_square())

    def test_not_grayscale(self):
        with self.assertRaises(ImageFormatError):
            ScalarImage(pixels=np.zeros((8, 8, 3)), domain=Rectangle.unit_square())


class TestImageFiles(unittest.TestCase):

    def test_pgm_round_trip(self):
        img = synthetic("blob", 32)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "blob.pgm"
            save_image(img, path)
            back = load_image(path)
        self.assertEqual(back.pixels.shape, (32, 32))
        assert_allclose(back.pixels, img.pixels, rtol=0, atol=0.5 / 255.0 + 1e-12)

    def test_sixteen_bit_png(self):
        img = synthetic("square", 20)
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "square.png"
            save_image(img, path, bit_depth=16)
            back = load_image(path)
        assert_allclose(back.pixels, img.pixels, rtol=0, atol=0.5 / 65535.0 + 1e-12)

    def test_unsupported_suffix(self):
        with self.assertRaises(ImageFormatError):
            load_image("image.jpg")

    def test_missing_file(self):
        with self.assertRaises(ImageFormatError):
            load_image("/nonexistent/fixed.pgm")

    def test_bad_bit_depth(self):
        with tempfile.TemporaryDirectory() as tmp:
            with self.assertRaises(InvalidArgumentError):
                save_image(synthetic("bar", 16), Path(tmp) / "bar.pgm", bit_depth=12)


class TestSmoothing(unittest.TestCase):

    def test_zero_sigma_is_identity(self):
        img = synthetic("bar", 24)
        self.assertIs(gaussian_smooth(img, 0.0), img)

    def test_constant_image_unchanged(self):
        img = ScalarImage(pixels=np.full((16, 16), 0.4), domain=Rectangle.unit_square())
        assert_allclose(gaussian_smooth(img, 2.0).pixels, 0.4)

    def test_negative_sigma(self):
        with self.assertRaises(InvalidArgumentError):
            gaussian_smooth(synthetic("bar", 16), -1.0)


class TestInterpolant(unittest.TestCase):

    def test_reproduces_cubic_polynomial_and_derivatives(self):
        intp = fit_interpolant(cubic_image())
        rng = np.random.default_rng(0)
        for x, y in rng.uniform(0.05, 0.95, size=(10, 2)):
            value, grad, hess, third = eval3(intp, (x, y))
            self.assertAlmostEqual(value, cubic(x, y), places=10)
            assert_allclose(grad, [3 * x ** 2 - 2 * y ** 2, -4 * x * y + 1], rtol=0, atol=1e-9)
            assert_allclose(hess, [[6 * x, -4 * y], [-4 * y, -4 * x]], rtol=0, atol=1e-8)
            self.assertAlmostEqual(third[0, 0, 0], 6.0, places=6)
            self.assertAlmostEqual(third[0, 1, 1], -4.0, places=6)
            self.assertAlmostEqual(third[1, 1, 1], 0.0, places=6)

    def test_interpolates_pixel_nodes(self):
        img = synthetic("blob", 20)
        intp = fit_interpolant(img)
        xs, ys = img.node_coordinates()
        value, _, _ = eval2(intp, (xs[7], ys[11]))
        self.assertAlmostEqual(value, img.pixels[11, 7], places=10)

    def test_out_of_domain_points_are_clamped_and_counted(self):
        intp = fit_interpolant(synthetic("blob", 20))
        inside = intp.values(np.array([[1.0, 0.5]]))
        outside = intp.values(np.array([[1.3, 0.5], [0.5, 0.5]]))
        self.assertEqual(intp.clamped_count, 1)
        assert_allclose(outside[0], inside[0])

    def test_derivatives_vanish_along_clamped_axes(self):
        intp = fit_interpolant(cubic_image())
        _, grad, hess = eval2(intp, (1.4, 0.3))
        _, edge_grad, edge_hess = eval2(intp, (1.0, 0.3))
        self.assertEqual(grad[0], 0.0)
        self.assertAlmostEqual(grad[1], edge_grad[1], places=12)
        self.assertEqual(hess[0, 0], 0.0)
        self.assertEqual(hess[0, 1], 0.0)
        self.assertAlmostEqual(hess[1, 1], edge_hess[1, 1], places=12)
        _, corner_grad, corner_hess = eval2(intp, (-0.2, 1.5))
        assert_allclose(corner_grad, 0.0, atol=0)
        assert_allclose(corner_hess, 0.0, atol=0)

    def test_jet_order_limit(self):
        with self.assertRaises(InvalidArgumentError):
            fit_interpolant(synthetic("blob", 20)).jets(np.zeros((1, 2)), 4)


class TestAnalyticAndSynthetic(unittest.TestCase):

    def test_trig_derivatives(self):
        field = AnalyticField("trig")
        point = np.array([0.31, 0.7])
        value, grad, hess, third = field.eval3(point)
        eps = 1e-6
        step = np.array([eps, 0.0])
        v_plus, g_plus, h_plus = field.eval2(point + step)
        v_minus, g_minus, h_minus = field.eval2(point - step)
        self.assertAlmostEqual((v_plus - v_minus) / (2 * eps), grad[0], places=6)
        self.assertAlmostEqual((h_plus[0, 0] - h_minus[0, 0]) / (2 * eps), third[0, 0, 0], delta=1e-3)
        self.assertEqual(grad[1], 0.0)

    def test_shift_translates_the_field(self):
        shifted = AnalyticField("quadratic", shift=(0.1, 0.2))
        plain = AnalyticField("quadratic")
        self.assertAlmostEqual(shifted.values(np.array([[0.5, 0.6]]))[0],
                               plain.values(np.array([[0.4, 0.4]]))[0])

    def test_shapes_are_normalized(self):
        for kind in ("blob", "bar", "square", "rotated_bar"):
            img = synthetic(kind, 32)
            self.assertAlmostEqual(img.pixels.min(), 0.0)
            self.assertAlmostEqual(img.pixels.max(), 1.0)

    def test_closed_form_kinds_keep_values(self):
        img = synthetic("linear", 16)
        self.assertFalse(img.normalized)
        self.assertAlmostEqual(img.pixels[-1, -1], 2.0)

    def test_rotated_bar_differs_from_bar(self):
        self.assertGreater(np.abs(synthetic("bar", 32).pixels - synthetic("rotated_bar", 32).pixels).max(), 0.5)

    def test_invalid_synthetic_requests(self):
        with self.assertRaises(InvalidArgumentError):
            synthetic("circle", 32)
        with self.assertRaises(InvalidArgumentError):
            synthetic("blob", 8)

    def test_parse_image_source(self):
        img = parse_image_source("synthetic:square", 24)
        self.assertEqual(img.pixels.shape, (24, 24))


if __name__ == '__main__':
    unittest.main()
