"""
Grayscale images, smoothing and cubic-spline interpolation
Single Responsibility: Image I/O, pre-smoothing and analytic image jets up to third order
"""

import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import cv2
import numpy as np
from scipy.interpolate import NdBSpline, make_interp_spline
from scipy.ndimage import gaussian_filter

from .reg_types import ImageFormatError, InvalidArgumentError, Rectangle

logger = logging.getLogger(__name__)

SUPPORTED_SUFFIXES = (".pgm", ".png")
MIN_IMAGE_SIZE = 4
MIN_SYNTHETIC_RESOLUTION = 16
MAX_JET_ORDER = 3

ANALYTIC_KINDS = ("linear", "quadratic", "trig", "zero")
SHAPE_KINDS = ("blob", "bar", "square", "rotated_bar")
SYNTHETIC_KINDS = ("linear", "quadratic", "trig", "blob", "bar", "square", "rotated_bar")


@dataclass(frozen=True)
class ScalarImage:
    """
    Grayscale raster mapped onto a world rectangle.

    pixels[r, c] is the intensity at x = x0 + c * (x1 - x0) / (W - 1),
    y = y0 + r * (y1 - y0) / (H - 1); nodes include the domain boundary.
    Images with normalized=False (closed-form convergence fields) may leave [0, 1].
    """
    pixels: np.ndarray
    domain: Rectangle
    normalized: bool = True

    def __post_init__(self):
        if self.pixels.ndim != 2:
            raise ImageFormatError(f"expected a 2-D grayscale raster, got shape {self.pixels.shape}")
        if min(self.pixels.shape) < MIN_IMAGE_SIZE:
            raise InvalidArgumentError(f"images must be at least {MIN_IMAGE_SIZE}x{MIN_IMAGE_SIZE} pixels")
        if not np.all(np.isfinite(self.pixels)):
            raise InvalidArgumentError("image intensities must be finite")
        if self.normalized and (self.pixels.min() < 0.0 or self.pixels.max() > 1.0):
            raise InvalidArgumentError("normalized image intensities must lie in [0, 1]")

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def node_coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        """World x of every column and world y of every row"""
        xs = np.linspace(self.domain.x0, self.domain.x1, self.width)
        ys = np.linspace(self.domain.y0, self.domain.y1, self.height)
        return xs, ys

    def with_pixels(self, pixels: np.ndarray) -> 'ScalarImage':
        return ScalarImage(pixels=pixels, domain=self.domain, normalized=self.normalized)


def default_domain(width: int, height: int) -> Rectangle:
    """Square pixels with the longer side spanning [0, 1]"""
    spacing = 1.0 / (max(width, height) - 1)
    return Rectangle(0.0, 0.0, (width - 1) * spacing, (height - 1) * spacing)


# ---------------------------------------------------------------------------
# File I/O
# ---------------------------------------------------------------------------

def _check_suffix(path: Path):
    if path.suffix.lower() not in SUPPORTED_SUFFIXES:
        raise ImageFormatError(f"unsupported image format '{path.suffix}', expected one of {SUPPORTED_SUFFIXES}")


def load_image(path) -> ScalarImage:
    """Read an 8- or 16-bit grayscale PGM/PNG and scale intensities to [0, 1]"""
    path = Path(path)
    _check_suffix(path)
    if not path.is_file():
        raise ImageFormatError(f"image file not found: {path}")

    raw = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if raw is None:
        raise ImageFormatError(f"could not decode image: {path}")
    if raw.ndim != 2:
        raise ImageFormatError(f"expected a single-channel grayscale image: {path}")
    if raw.dtype == np.uint8:
        scale = 255.0
    elif raw.dtype == np.uint16:
        scale = 65535.0
    else:
        raise ImageFormatError(f"unsupported pixel type {raw.dtype}: {path}")

    height, width = raw.shape
    logger.info(f"Loaded {width}x{height} {raw.dtype} image from {path}")
    return ScalarImage(pixels=raw.astype(float) / scale, domain=default_domain(width, height))


def save_image(img: ScalarImage, path, bit_depth: int = 8):
    """Write intensities clipped to [0, 1] as an 8- or 16-bit grayscale PGM/PNG"""
    path = Path(path)
    _check_suffix(path)
    if bit_depth == 8:
        dtype, scale = np.uint8, 255.0
    elif bit_depth == 16:
        dtype, scale = np.uint16, 65535.0
    else:
        raise InvalidArgumentError(f"bit depth must be 8 or 16, got {bit_depth}")

    raw = np.rint(np.clip(img.pixels, 0.0, 1.0) * scale).astype(dtype)
    path.parent.mkdir(parents=True, exist_ok=True)
    if not cv2.imwrite(str(path), raw):
        raise ImageFormatError(f"could not write image: {path}")
    logger.debug(f"Wrote {bit_depth}-bit image {path}")


# ---------------------------------------------------------------------------
# Smoothing
# ---------------------------------------------------------------------------

def gaussian_smooth(img: ScalarImage, sigma_px: float) -> ScalarImage:
    """Separable Gaussian filter with reflect boundary; sigma_px = 0 is a no-op"""
    if sigma_px < 0 or not np.isfinite(sigma_px):
        raise InvalidArgumentError(f"smoothing sigma must be >= 0, got {sigma_px}")
    if sigma_px == 0:
        return img
    return img.with_pixels(gaussian_filter(img.pixels, sigma=sigma_px, mode="reflect"))


# ---------------------------------------------------------------------------
# Image fields
# ---------------------------------------------------------------------------

class ImageField(ABC):
    """Scalar field with analytic derivatives up to third order"""

    @abstractmethod
    def jets(self, points: np.ndarray, max_order: int = 2) -> List[np.ndarray]:
        """
        Value and derivative tensors at points of shape (P, 2).

        Entry m has shape (P,) + (2,) * m, so jets[1] is the gradient and
        jets[2] the (symmetric) Hessian.
        """
        pass

    def values(self, points: np.ndarray) -> np.ndarray:
        return self.jets(points, 0)[0]

    def eval2(self, point) -> Tuple[float, np.ndarray, np.ndarray]:
        value, grad, hess = self.jets(np.atleast_2d(point), 2)
        return float(value[0]), grad[0], hess[0]

    def eval3(self, point) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
        value, grad, hess, third = self.jets(np.atleast_2d(point), 3)
        return float(value[0]), grad[0], hess[0], third[0]


def _check_jet_order(max_order: int):
    if not 0 <= max_order <= MAX_JET_ORDER:
        raise InvalidArgumentError(f"image jets are available up to order {MAX_JET_ORDER}, got {max_order}")


def _derivative_orders(m: int):
    """(n_y, n_x) derivative counts for every index tuple of length m over (x, y)"""
    for flat in range(2 ** m):
        axes = [(flat >> (m - 1 - pos)) & 1 for pos in range(m)]
        yield tuple(axes), (sum(axes), m - sum(axes))


class Interpolant(ImageField):
    """
    Tensor-product not-a-knot cubic spline through every pixel node.

    Reproduces cubic polynomials exactly. Points outside the domain are
    clamped to the boundary and counted in `clamped_count`; the field is
    constant across the boundary there, so derivatives along a clamped axis vanish.
    """

    def __init__(self, img: ScalarImage):
        xs, ys = img.node_coordinates()
        # Interpolate every row along x, then the row coefficients along y.
        along_x = make_interp_spline(xs, img.pixels.T, k=3)
        along_y = make_interp_spline(ys, along_x.c.T, k=3)
        self.domain = img.domain
        self._spline = NdBSpline((along_y.t, along_x.t), along_y.c, 3)
        self._lock = threading.Lock()
        self._clamped = 0

    @property
    def clamped_count(self) -> int:
        return self._clamped

    def _clamp(self, points: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Clamped points and a (P, 2) mask of the axes that were clamped"""
        d = self.domain
        clamped = np.column_stack([np.clip(points[:, 0], d.x0, d.x1), np.clip(points[:, 1], d.y0, d.y1)])
        moved = clamped != points
        outside = int(np.count_nonzero(np.any(moved, axis=1)))
        if outside:
            with self._lock:
                self._clamped += outside
        return clamped, moved

    def jets(self, points: np.ndarray, max_order: int = 2) -> List[np.ndarray]:
        _check_jet_order(max_order)
        points, moved = self._clamp(np.asarray(points, dtype=float).reshape(-1, 2))
        yx = points[:, ::-1]
        cache: Dict[Tuple[int, int], np.ndarray] = {}
        result = []
        for m in range(max_order + 1):
            tensor = np.empty((points.shape[0],) + (2,) * m)
            for idx, nu in _derivative_orders(m):
                if nu not in cache:
                    cache[nu] = self._spline(yx, nu=nu)
                    cache[nu][np.any(moved[:, list(set(idx))], axis=1)] = 0.0
                tensor[(slice(None),) + idx] = cache[nu]
            result.append(tensor)
        return result


def fit_interpolant(img: ScalarImage) -> Interpolant:
    return Interpolant(img)


def eval2(intp: ImageField, point) -> Tuple[float, np.ndarray, np.ndarray]:
    """Value, gradient and Hessian of an image field at one point"""
    return intp.eval2(point)


def eval3(intp: ImageField, point) -> Tuple[float, np.ndarray, np.ndarray, np.ndarray]:
    return intp.eval3(point)


class AnalyticField(ImageField):
    """
    Closed-form convergence-study fields, optionally translated by `shift`.

    linear: x + y, quadratic: (x + y)^2, trig: sin(6 pi x) + x^2, zero: 0.
    """

    def __init__(self, kind: str, shift=(0.0, 0.0)):
        if kind not in ANALYTIC_KINDS:
            raise InvalidArgumentError(f"unknown analytic field '{kind}', expected one of {ANALYTIC_KINDS}")
        self.kind = kind
        self.shift = np.asarray(shift, dtype=float)
        self.clamped_count = 0

    def jets(self, points: np.ndarray, max_order: int = 2) -> List[np.ndarray]:
        _check_jet_order(max_order)
        pts = np.asarray(points, dtype=float).reshape(-1, 2) - self.shift
        x, y = pts[:, 0], pts[:, 1]
        n = pts.shape[0]
        result = [np.zeros((n,) + (2,) * m) for m in range(max_order + 1)]

        if self.kind == "linear":
            result[0] = x + y
            if max_order >= 1:
                result[1][:] = 1.0
        elif self.kind == "quadratic":
            s = x + y
            result[0] = s * s
            if max_order >= 1:
                result[1][:] = (2.0 * s)[:, None]
            if max_order >= 2:
                result[2][:] = 2.0
        elif self.kind == "trig":
            w = 6.0 * np.pi
            result[0] = np.sin(w * x) + x * x
            if max_order >= 1:
                result[1][:, 0] = w * np.cos(w * x) + 2.0 * x
            if max_order >= 2:
                result[2][:, 0, 0] = -w * w * np.sin(w * x) + 2.0
            if max_order >= 3:
                result[3][:, 0, 0, 0] = -w ** 3 * np.cos(w * x)
        return result


# ---------------------------------------------------------------------------
# Synthetic images
# ---------------------------------------------------------------------------

SHAPE_DEFAULTS: Dict[str, Dict[str, Any]] = {
    "blob": {"center": (0.5, 0.5), "width": 0.15},
    "bar": {"center": (0.5, 0.5), "half_size": (0.3, 0.08), "angle": 0.0, "edge": 0.01},
    "square": {"center": (0.5, 0.5), "half_size": (0.155, 0.155), "angle": 0.0, "edge": 0.01},
    "rotated_bar": {"center": (0.5, 0.5), "half_size": (0.3, 0.08), "angle": np.pi / 6.0, "edge": 0.01},
}


def _soft_step(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(z))


def _shape_values(kind: str, x: np.ndarray, y: np.ndarray, params: Dict[str, Any]) -> np.ndarray:
    cx, cy = params["center"]
    if kind == "blob":
        return np.exp(-((x - cx) ** 2 + (y - cy) ** 2) / (2.0 * params["width"] ** 2))
    c, s = np.cos(params["angle"]), np.sin(params["angle"])
    u = c * (x - cx) + s * (y - cy)
    v = -s * (x - cx) + c * (y - cy)
    hu, hv = params["half_size"]
    edge = params["edge"]
    return _soft_step((hu - np.abs(u)) / edge) * _soft_step((hv - np.abs(v)) / edge)


def synthetic(kind: str, resolution: int, params: Optional[Dict[str, Any]] = None) -> ScalarImage:
    """
    Sample a test image on a resolution x resolution raster of the unit square.

    Shape kinds (blob, bar, square, rotated_bar) are min-max normalized to
    [0, 1]; linear, quadratic and trig keep their closed-form values.
    """
    if kind not in SYNTHETIC_KINDS:
        raise InvalidArgumentError(f"unknown synthetic kind '{kind}', expected one of {SYNTHETIC_KINDS}")
    if resolution < MIN_SYNTHETIC_RESOLUTION:
        raise InvalidArgumentError(f"synthetic resolution must be >= {MIN_SYNTHETIC_RESOLUTION}, got {resolution}")

    domain = Rectangle.unit_square()
    nodes = np.linspace(0.0, 1.0, resolution)
    gx, gy = np.meshgrid(nodes, nodes)

    if kind in ANALYTIC_KINDS:
        shift = (params or {}).get("shift", (0.0, 0.0))
        analytic = AnalyticField(kind, shift)
        pixels = analytic.values(np.column_stack([gx.ravel(), gy.ravel()])).reshape(gx.shape)
        return ScalarImage(pixels=pixels, domain=domain, normalized=False)

    merged = {**SHAPE_DEFAULTS[kind], **(params or {})}
    pixels = _shape_values(kind, gx, gy, merged)
    low, high = pixels.min(), pixels.max()
    pixels = (pixels - low) / (high - low)
    return ScalarImage(pixels=pixels, domain=domain)


def parse_image_source(source: str, resolution: int = 64) -> ScalarImage:
    """File path, or 'synthetic:<kind>' for a generated image"""
    if source.startswith("synthetic:"):
        return synthetic(source.split(":", 1)[1], resolution)
    return load_image(source)
