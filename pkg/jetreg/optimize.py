"""
Geodesic shooting energy, adjoint gradient and quasi-Newton registration
Single Responsibility: Minimize kinetic plus matching energy over initial momenta
"""

import logging
import warnings
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
from scipy.optimize import line_search

from .dynamics import hamiltonian, velocity_jets
from .image import ImageField, ScalarImage
from .jet_state import JetState, flatten, flatten_covector, momentum_offset, symmetrize_last_pair, with_momenta
from .kernel import KernelSpec
from .matching import FixedSamples, MatchConfig, match_endpoint_gradient, match_value
from .ode import DEFAULT_STEPS, Trajectory, integrate_adjoint_backward, integrate_forward
from .reg_types import BlowUpError, OptimizerError, OrderMismatchError

logger = logging.getLogger(__name__)

Objective = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class OptimizerStatus(Enum):
    """Why the quasi-Newton loop stopped"""
    GRADIENT_TOLERANCE = "gradient_tolerance"
    ENERGY_STALLED = "energy_stalled"
    MAX_ITERATIONS = "max_iterations"
    LINE_SEARCH_FAILED = "line_search_failed"


@dataclass
class LbfgsOptions:
    maxiter: int = 200
    tol: float = 1e-6
    memory: int = 10
    c1: float = 1e-4
    c2: float = 0.9
    rel_decrease: float = 1e-12


@dataclass
class LbfgsReport:
    x: np.ndarray
    value: float
    grad: np.ndarray
    status: OptimizerStatus
    iterations: int
    evaluations: int
    trace: List[float] = field(default_factory=list)

    @property
    def grad_norm(self) -> float:
        return float(np.max(np.abs(self.grad))) if self.grad.size else 0.0


class _CachedObjective:
    """Serves value and gradient from one evaluation per point"""

    def __init__(self, objective: Objective):
        self.objective = objective
        self.evaluations = 0
        self._key = None
        self._value = None
        self._grad = None

    def __call__(self, x: np.ndarray) -> Tuple[float, np.ndarray]:
        key = x.tobytes()
        if key != self._key:
            self._value, self._grad = self.objective(x)
            self._key = key
            self.evaluations += 1
        return self._value, self._grad

    def value(self, x: np.ndarray) -> float:
        return self(x)[0]

    def grad(self, x: np.ndarray) -> np.ndarray:
        return self(x)[1]


def _two_loop(grad: np.ndarray, history: deque) -> np.ndarray:
    """L-BFGS inverse-Hessian product applied to -grad"""
    q = grad.copy()
    alphas = []
    for s, y, rho in reversed(history):
        alpha = rho * np.dot(s, q)
        q -= alpha * y
        alphas.append(alpha)
    if history:
        s, y, _ = history[-1]
        q *= np.dot(s, y) / np.dot(y, y)
    for (s, y, rho), alpha in zip(history, reversed(alphas)):
        beta = rho * np.dot(y, q)
        q += (alpha - beta) * s
    return -q


def lbfgs_minimize(objective: Objective, x0: np.ndarray, opts: Optional[LbfgsOptions] = None,
                   callback: Optional[Callable[[int, float, float], None]] = None) -> LbfgsReport:
    """
    Limited-memory BFGS with a strong Wolfe line search.

    Stops when the max-norm of the gradient reaches opts.tol, when the relative
    energy decrease falls below opts.rel_decrease, or at opts.maxiter. A failed
    line search is retried once along steepest descent and then reported with
    the best iterate.
    """
    opts = opts or LbfgsOptions()
    fun = _CachedObjective(objective)
    x = np.array(x0, dtype=float)
    value, grad = fun(x)
    if not np.isfinite(value) or not np.all(np.isfinite(grad)):
        raise OptimizerError("objective is not finite at the starting point")

    history: deque = deque(maxlen=opts.memory)
    trace = [value]
    previous_value = None
    status = OptimizerStatus.MAX_ITERATIONS
    iteration = 0

    while iteration < opts.maxiter:
        if np.max(np.abs(grad), initial=0.0) <= opts.tol:
            status = OptimizerStatus.GRADIENT_TOLERANCE
            break

        direction = _two_loop(grad, history)
        old_old = value + np.linalg.norm(grad) / 2.0 if previous_value is None else None
        with warnings.catch_warnings():
            # Rejected trial steps (infinite energies) are expected here.
            warnings.simplefilter("ignore")
            step = line_search(fun.value, fun.grad, x, direction, grad, value, old_old,
                               c1=opts.c1, c2=opts.c2)[0]
            if step is None and history:
                logger.debug("Line search failed, restarting from steepest descent")
                history.clear()
                direction = -grad
                step = line_search(fun.value, fun.grad, x, direction, grad, value,
                                   value + np.linalg.norm(grad) / 2.0, c1=opts.c1, c2=opts.c2)[0]
        if step is None:
            status = OptimizerStatus.LINE_SEARCH_FAILED
            logger.info(f"Line search failed at iteration {iteration}, keeping best iterate")
            break

        x_new = x + step * direction
        value_new, grad_new = fun(x_new)
        s, y = x_new - x, grad_new - grad
        sy = np.dot(s, y)
        if sy > 1e-12 * np.dot(y, y):
            history.append((s, y, 1.0 / sy))

        previous_value, value = value, value_new
        x, grad = x_new, grad_new
        iteration += 1
        trace.append(value)
        if callback is not None:
            callback(iteration, value, float(np.max(np.abs(grad), initial=0.0)))

        if previous_value - value < opts.rel_decrease * max(abs(previous_value), 1e-300):
            status = OptimizerStatus.ENERGY_STALLED
            break

    return LbfgsReport(x=x, value=value, grad=grad, status=status, iterations=iteration,
                       evaluations=fun.evaluations, trace=trace)


# ---------------------------------------------------------------------------
# Registration
# ---------------------------------------------------------------------------

@dataclass
class RegistrationProblem:
    """
    Shooting problem: particles start on `initial` (q on the lattice, q1 = I,
    q2 = 0) and only the momentum blocks are optimized.
    """
    samples: FixedSamples
    moving: ImageField
    spec: KernelSpec
    match: MatchConfig
    initial: JetState
    steps: int = DEFAULT_STEPS
    options: LbfgsOptions = field(default_factory=LbfgsOptions)
    fixed: Optional[ScalarImage] = None
    n_per_axis: Optional[int] = None

    def __post_init__(self):
        if self.match.match_order > self.initial.order:
            raise OrderMismatchError(
                f"match order exceeds jet order ({self.match.match_order} > {self.initial.order})")

    @property
    def jet_order(self) -> int:
        return self.initial.order

    @property
    def momentum_size(self) -> int:
        return flatten(self.initial).size - momentum_offset(
            self.initial.order, self.initial.n_particles, self.initial.dim)

    def initial_state(self, momenta: np.ndarray) -> JetState:
        return with_momenta(self.initial, momenta)


@dataclass
class RegistrationResult:
    """Optimal initial state, its flow and the optimizer's diagnostics"""
    initial_state: JetState
    trajectory: Trajectory
    final_H: float
    final_F: float
    grad_norm: float
    trace: List[float]
    status: OptimizerStatus
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def energy(self) -> float:
        return self.final_H + self.final_F


def hamiltonian_momentum_gradient(state: JetState, spec: KernelSpec) -> JetState:
    """dH/dp = v0 and dH/dmu = velocity jets, as a full-tensor covector"""
    jets = velocity_jets(state, spec, max_jet=state.order)
    grad = state.zeros_like()
    grad.p[...] = jets[0]
    if state.order >= 1:
        grad.mu1[...] = jets[1]
    if state.order == 2:
        grad.mu2[...] = symmetrize_last_pair(jets[2])
    return grad


def energy_and_gradient(z0_momenta: np.ndarray, prob: RegistrationProblem) -> Tuple[float, np.ndarray]:
    """
    Shooting energy H(z0) + F_h(z(1)) and its gradient in flat momentum coordinates.

    The kinetic term uses conservation of H along the geodesic; the matching
    term's gradient is pulled back to t = 0 by the adjoint flow. A non-finite
    forward flow returns an infinite energy so the line search rejects it.
    """
    state0 = prob.initial_state(np.asarray(z0_momenta, dtype=float))
    offset = momentum_offset(state0.order, state0.n_particles, state0.dim)
    try:
        traj = integrate_forward(state0, prob.steps, prob.spec)
        end = traj.final
        energy = hamiltonian(state0, prob.spec) + match_value(prob.samples, prob.moving, end, prob.match)
        lam1 = match_endpoint_gradient(prob.samples, prob.moving, end, prob.match)
        lam0 = integrate_adjoint_backward(traj, lam1)
    except BlowUpError as e:
        logger.info(f"Rejecting momenta with a divergent flow: {e}")
        return float("inf"), np.zeros(prob.momentum_size)

    covector = lam0 + hamiltonian_momentum_gradient(state0, prob.spec)
    return float(energy), flatten_covector(covector)[offset:]


def register(prob: RegistrationProblem) -> RegistrationResult:
    """Optimize the initial momenta from zero and report the resulting flow"""
    logger.info(f"Registering with {prob.initial.n_particles} order-{prob.jet_order} particles, "
                f"match order {prob.match.match_order}, {prob.momentum_size} unknowns")

    def log_iteration(iteration: int, value: float, grad_norm: float):
        logger.info(f"Iteration {iteration}: energy={value:.6e} |grad|={grad_norm:.3e}")

    report = lbfgs_minimize(lambda x: energy_and_gradient(x, prob), np.zeros(prob.momentum_size),
                            prob.options, callback=log_iteration)

    state0 = prob.initial_state(report.x)
    traj = integrate_forward(state0, prob.steps, prob.spec)
    final_H = hamiltonian(state0, prob.spec)
    final_F = match_value(prob.samples, prob.moving, traj.final, prob.match)
    logger.info(f"Registration finished ({report.status.value}) after {report.iterations} iterations: "
                f"H={final_H:.6e} F={final_F:.6e}")

    return RegistrationResult(
        initial_state=state0,
        trajectory=traj,
        final_H=final_H,
        final_F=final_F,
        grad_norm=report.grad_norm,
        trace=report.trace,
        status=report.status,
        diagnostics={
            "iterations": report.iterations,
            "evaluations": report.evaluations,
            "clamped_samples": int(getattr(prob.moving, "clamped_count", 0)),
            "energy_drift": float(np.ptp(traj.energies())),
        },
    )
