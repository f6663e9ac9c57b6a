"""
Fixed-step integrators for the forward flow, its first variation and its adjoint
Single Responsibility: RK4 time stepping with dense trajectory storage
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline

from .dynamics import hamiltonian, state_derivative
from .jet_state import AdjointState, JetState, TangentState, flatten, unflatten
from .kernel import KernelSpec
from .reg_types import BlowUpError, InvalidArgumentError, ShapeMismatchError
from .variations import adjoint_apply, tangent_apply

logger = logging.getLogger(__name__)

DEFAULT_STEPS = 100


@dataclass
class Trajectory:
    """States and state rates at uniformly spaced time nodes on [0, 1]"""
    times: np.ndarray
    states: List[JetState]
    rates: List[JetState]
    spec: KernelSpec
    _spline: Optional[CubicHermiteSpline] = field(default=None, repr=False, compare=False)

    @property
    def steps(self) -> int:
        return len(self.times) - 1

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def initial(self) -> JetState:
        return self.states[0]

    @property
    def final(self) -> JetState:
        return self.states[-1]

    def state_at(self, t: float) -> JetState:
        """Piecewise cubic Hermite interpolation of the stored nodes"""
        if not 0.0 <= t <= 1.0:
            raise InvalidArgumentError(f"time {t} outside [0, 1]")
        if self._spline is None:
            values = np.stack([flatten(s) for s in self.states])
            slopes = np.stack([flatten(r) for r in self.rates])
            self._spline = CubicHermiteSpline(self.times, values, slopes, axis=0)
        first = self.initial
        return unflatten(self._spline(t), first.order, first.n_particles, first.dim)

    def energies(self) -> np.ndarray:
        return np.array([hamiltonian(s, self.spec) for s in self.states])


def _check_steps(steps: int):
    if steps < 1:
        raise InvalidArgumentError(f"step count must be >= 1, got {steps}")


def _check_finite(state: JetState, node: int, t: float, what: str):
    if not state.is_finite():
        logger.error(f"{what} produced a non-finite state at node {node}")
        raise BlowUpError(f"{what} produced a non-finite state", node, t)


def integrate_forward(state0: JetState, steps: int, spec: KernelSpec) -> Trajectory:
    """Classical RK4 on Hamilton's equations from t = 0 to t = 1"""
    _check_steps(steps)
    _check_finite(state0, 0, 0.0, "forward integration")
    dt = 1.0 / steps
    times = np.linspace(0.0, 1.0, steps + 1)

    states = [state0.copy()]
    rates = []
    x = states[0]
    for n in range(steps):
        k1 = state_derivative(x, spec)
        k2 = state_derivative(x + (0.5 * dt) * k1, spec)
        k3 = state_derivative(x + (0.5 * dt) * k2, spec)
        k4 = state_derivative(x + dt * k3, spec)
        x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(x, n + 1, times[n + 1], "forward integration")
        rates.append(k1)
        states.append(x)
    rates.append(state_derivative(x, spec))

    logger.debug(f"Forward flow of {state0.n_particles} order-{state0.order} particles in {steps} steps")
    return Trajectory(times=times, states=states, rates=rates, spec=spec)


def _check_against(traj: Trajectory, other: JetState, what: str):
    ref = traj.initial
    if other.order != ref.order or other.q.shape != ref.q.shape:
        raise ShapeMismatchError(f"{what} does not match the trajectory state layout")


def rk4_stage_states(traj: Trajectory, node: int) -> List[JetState]:
    """The four RK4 stage states of the step leaving `node`, rebuilt from the stored node and rate"""
    spec, dt = traj.spec, traj.dt
    x, k1 = traj.states[node], traj.rates[node]
    y2 = x + (0.5 * dt) * k1
    y3 = x + (0.5 * dt) * state_derivative(y2, spec)
    y4 = x + dt * state_derivative(y3, spec)
    return [x, y2, y3, y4]


def integrate_tangent_forward(traj: Trajectory, delta0: TangentState) -> List[TangentState]:
    """
    Linearization of the discrete RK4 flow along a stored trajectory.

    Returns the variation at every time node. Each step is the exact
    derivative of the corresponding forward step, so the result agrees with
    finite differences of integrate_forward up to round-off.
    """
    _check_against(traj, delta0, "tangent")
    spec, dt = traj.spec, traj.dt
    path = [delta0.symmetrized()]
    d = path[0]
    for n in range(traj.steps):
        y1, y2, y3, y4 = rk4_stage_states(traj, n)
        k1 = tangent_apply(y1, d, spec)
        k2 = tangent_apply(y2, d + (0.5 * dt) * k1, spec)
        k3 = tangent_apply(y3, d + (0.5 * dt) * k2, spec)
        k4 = tangent_apply(y4, d + dt * k3, spec)
        d = d + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        _check_finite(d, n + 1, traj.times[n + 1], "tangent integration")
        path.append(d)
    return path


def _transpose_apply(state: JetState, weight: AdjointState, spec: KernelSpec) -> AdjointState:
    # adjoint_apply returns -M^T w
    return -adjoint_apply(state, weight, spec)


def integrate_adjoint_backward(traj: Trajectory, lam1: AdjointState, return_path: bool = False):
    """
    Reverse sweep of the discrete RK4 flow from t = 1 back to t = 0.

    Every step applies the transpose of the linearized forward step, stage by
    stage in reverse, so lam(0) is the exact gradient of any function of the
    final state with respect to the initial state. Pairings with
    integrate_tangent_forward are constant across nodes. Returns lam(0), or lam
    at every node (index = time node) when return_path is set.
    """
    _check_against(traj, lam1, "adjoint")
    spec, dt = traj.spec, traj.dt
    lam = lam1.symmetrized()
    path = [lam]
    for n in range(traj.steps - 1, -1, -1):
        y1, y2, y3, y4 = rk4_stage_states(traj, n)
        g4 = _transpose_apply(y4, (dt / 6.0) * lam, spec)
        g3 = _transpose_apply(y3, (dt / 3.0) * lam + dt * g4, spec)
        g2 = _transpose_apply(y2, (dt / 3.0) * lam + (0.5 * dt) * g3, spec)
        g1 = _transpose_apply(y1, (dt / 6.0) * lam + (0.5 * dt) * g2, spec)
        lam = lam + g1 + g2 + g3 + g4
        _check_finite(lam, n, traj.times[n], "adjoint integration")
        path.append(lam)

    logger.debug(f"Adjoint pass over {traj.steps} steps")
    if return_path:
        return path[::-1]
    return lam
