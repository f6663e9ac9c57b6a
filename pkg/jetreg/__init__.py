"""
Jet-particle image registration toolkit
Geodesic shooting of particles carrying position, Jacobian and Hessian data
"""

from .app import JetRegApp
from .arguments import ArgumentProcessor
from .commands import (CommandHandler, CommandRegistry, ConvergenceCommand, GradCheckCommand,
                       RegisterCommand, ShootCommand)
from .config import ConfigurationError, RegistrationConfig
from .dynamics import hamiltonian, state_derivative, velocity_jets, xi_from_state
from .factory import PRESETS, RegistrationProblemFactory
from .flowmap import advect_points, grid_figure, warp_image
from .image import AnalyticField, ScalarImage, fit_interpolant, gaussian_smooth, load_image, save_image, synthetic
from .jet_state import JetState, flatten, init_grid, unflatten
from .kernel import KernelSpec, kernel_deriv, kernel_scalar, pair_table
from .matching import MatchConfig, match_endpoint_gradient, match_value, oracle_integral, precompute_fixed
from .ode import Trajectory, integrate_adjoint_backward, integrate_forward, integrate_tangent_forward
from .optimize import RegistrationProblem, RegistrationResult, energy_and_gradient, lbfgs_minimize, register
from .output_writer import ResultWriter
from .reg_types import BlowUpError, CommandResult, ErrorType, JetRegError, Rectangle
from .variations import adjoint_apply, tangent_apply

__version__ = "1.0.0"
__author__ = "jetreg developers"
__description__ = "Jet-particle LDDMM image registration with higher-order matching"

__all__ = [
    # Core types
    'JetState',
    'KernelSpec',
    'Trajectory',
    'ScalarImage',
    'Rectangle',

    # Dynamics and variations
    'kernel_scalar',
    'kernel_deriv',
    'pair_table',
    'hamiltonian',
    'velocity_jets',
    'xi_from_state',
    'state_derivative',
    'tangent_apply',
    'adjoint_apply',

    # Integration
    'integrate_forward',
    'integrate_tangent_forward',
    'integrate_adjoint_backward',

    # Images and matching
    'load_image',
    'save_image',
    'gaussian_smooth',
    'fit_interpolant',
    'synthetic',
    'AnalyticField',
    'MatchConfig',
    'precompute_fixed',
    'match_value',
    'match_endpoint_gradient',
    'oracle_integral',

    # Flow map
    'advect_points',
    'warp_image',
    'grid_figure',

    # Optimization
    'RegistrationProblem',
    'RegistrationResult',
    'energy_and_gradient',
    'lbfgs_minimize',
    'register',

    # State packing
    'flatten',
    'unflatten',
    'init_grid',

    # Commands and utilities
    'JetRegApp',
    'ArgumentProcessor',
    'CommandHandler',
    'CommandRegistry',
    'RegisterCommand',
    'ShootCommand',
    'ConvergenceCommand',
    'GradCheckCommand',
    'RegistrationConfig',
    'RegistrationProblemFactory',
    'PRESETS',
    'ResultWriter',
    'CommandResult',
    'ErrorType',

    # Exceptions
    'JetRegError',
    'BlowUpError',
    'ConfigurationError',
]

# Package-level configuration
import logging

logger = logging.getLogger(__name__)
logger.addHandler(logging.NullHandler())
