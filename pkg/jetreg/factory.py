"""
Factory for creating configured registration problems
Dependency Inversion: Handles image loading, smoothing and problem wiring
"""

import logging
from typing import Dict, Optional

import numpy as np

from .config import ConfigurationError, RegistrationConfig
from .image import ScalarImage, fit_interpolant, gaussian_smooth, parse_image_source, synthetic
from .jet_state import JetState, init_grid, zeros
from .kernel import KernelSpec
from .matching import MatchConfig, precompute_fixed
from .optimize import LbfgsOptions, RegistrationProblem
from .reg_types import InvalidArgumentError, Rectangle

logger = logging.getLogger(__name__)

PRESETS = ("none", "translation", "expansion", "rotation", "stretch", "shear",
           "bend_xx", "bend_yy", "bend_xy")


class RegistrationProblemFactory:
    """Factory for creating fully configured registration problems"""

    @staticmethod
    def create_problem(config: RegistrationConfig) -> RegistrationProblem:
        """Load, smooth and interpolate the configured images and place the particle lattice"""
        if not config.fixed or not config.moving:
            raise ConfigurationError("both fixed and moving images are required")
        try:
            fixed = parse_image_source(config.fixed, config.resolution)
            moving = parse_image_source(config.moving, config.resolution)
        except Exception as e:
            logger.error(f"Image loading failed: {str(e)}")
            raise
        logger.info(f"Loaded fixed image {config.fixed} and moving image {config.moving}")
        return RegistrationProblemFactory.create_synthetic_problem(fixed, moving, config)

    @staticmethod
    def create_synthetic_problem(fixed_img: ScalarImage, moving_img: ScalarImage,
                                 config: RegistrationConfig) -> RegistrationProblem:
        """Build a problem from in-memory images"""
        if not np.allclose(fixed_img.domain.as_list(), moving_img.domain.as_list()):
            raise InvalidArgumentError(
                f"fixed and moving images cover different domains: {fixed_img.domain} vs {moving_img.domain}")

        # Create components
        fixed = gaussian_smooth(fixed_img, config.smooth)
        moving = gaussian_smooth(moving_img, config.smooth)
        domain = RegistrationProblemFactory._particle_domain(fixed.domain, config.region_rectangle())
        initial = init_grid(domain, config.grid, config.jet_order)
        samples = precompute_fixed(fit_interpolant(fixed), initial.q)
        match = MatchConfig.for_grid(domain, config.grid, config.match_order, config.sigma_match)

        problem = RegistrationProblem(
            samples=samples,
            moving=fit_interpolant(moving),
            spec=KernelSpec(config.sigma),
            match=match,
            initial=initial,
            steps=config.steps,
            options=LbfgsOptions(maxiter=config.maxiter, tol=config.tol),
            fixed=fixed,
            n_per_axis=config.grid,
        )
        logger.info(f"Created problem with {initial.n_particles} particles on {domain}")
        return problem

    @staticmethod
    def create_test_problem(seed: int = 0, n_per_axis: int = 2, jet_order: int = 2,
                            match_order: int = 2, steps: int = 20) -> RegistrationProblem:
        """Small randomized blob-matching problem for gradient checks"""
        rng = np.random.default_rng(seed)
        offset = rng.uniform(-0.08, 0.08, size=2)
        fixed = synthetic("blob", 32, {"width": 0.2})
        moving = synthetic("blob", 32, {"width": 0.2, "center": tuple(0.5 + offset)})
        config = RegistrationConfig(jet_order=jet_order, match_order=match_order, grid=n_per_axis,
                                    sigma=0.3, sigma_match=0.1, steps=steps, smooth=0.0, seed=seed)
        config._validate()
        return RegistrationProblemFactory.create_synthetic_problem(fixed, moving, config)

    @staticmethod
    def create_preset_state(name: str, sigma: float, center=(0.5, 0.5)) -> JetState:
        """Single second-order jet-particle carrying one momentum pattern"""
        if name not in PRESETS:
            raise InvalidArgumentError(f"unknown preset '{name}', expected one of {PRESETS}")
        state = zeros(2, 1)
        state.q[0] = center
        state.q1[0] = np.eye(2)

        # Scaled so the particle's own velocity jets are of order one
        a = 0.5 * sigma ** 2
        b = 0.1 * sigma ** 4
        patterns: Dict[str, Optional[np.ndarray]] = {
            "expansion": a * np.eye(2),
            "rotation": a * np.array([[0.0, -1.0], [1.0, 0.0]]),
            "stretch": a * np.diag([1.0, -1.0]),
            "shear": a * np.array([[0.0, 1.0], [0.0, 0.0]]),
        }
        if name == "translation":
            state.p[0] = (0.3, 0.0)
        elif name in patterns:
            state.mu1[0] = patterns[name]
        elif name == "bend_xx":
            state.mu2[0, 1, 0, 0] = b
        elif name == "bend_yy":
            state.mu2[0, 0, 1, 1] = b
        elif name == "bend_xy":
            state.mu2[0, 0, 0, 1] = state.mu2[0, 0, 1, 0] = b
        return state

    @staticmethod
    def _particle_domain(image_domain: Rectangle, region: Optional[Rectangle]) -> Rectangle:
        if region is None:
            return image_domain
        inside = (region.x0 >= image_domain.x0 and region.y0 >= image_domain.y0
                  and region.x1 <= image_domain.x1 and region.y1 <= image_domain.y1)
        if not inside:
            raise InvalidArgumentError(f"region {region} is not inside the image domain {image_domain}")
        return region
