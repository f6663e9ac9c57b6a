"""
Reproducing-kernel velocity field and passive transport under the flow
Single Responsibility: Point, grid and image advection along a jet-particle trajectory
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Tuple, Union

import numpy as np

from .dynamics import coefficient_blocks, evaluate_jets
from .image import ImageField, ScalarImage
from .jet_state import JetState
from .kernel import KernelSpec
from .ode import Trajectory
from .parallel import map_row_blocks
from .reg_types import BlowUpError, InvalidArgumentError, Rectangle

logger = logging.getLogger(__name__)

# Points per transport block; fixed so results do not depend on the thread count
ADVECT_BLOCK = 512


def velocity_at(state: JetState, x, spec: KernelSpec) -> np.ndarray:
    """
    Velocity generated by the jet state at one point or an array of points.

    u(x) = sum_j [p_j K(x - q_j) - mu1_j . dK(x - q_j) + mu2_j : d2K(x - q_j)]
    """
    points = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(points)):
        raise InvalidArgumentError("velocity evaluation points must be finite")
    flat = points.reshape(-1, state.dim)
    u = evaluate_jets(flat, state.q, coefficient_blocks(state), spec, 0)[0]
    return u.reshape(points.shape)


def velocity_gradient_at(state: JetState, x: np.ndarray, spec: KernelSpec) -> Tuple[np.ndarray, np.ndarray]:
    """Velocity and its spatial Jacobian du^a/dx^b at points of shape (P, d)"""
    jets = evaluate_jets(np.asarray(x, dtype=float), state.q, coefficient_blocks(state), spec, 1)
    return jets[0], jets[1]


@dataclass
class AdvectedPoints:
    """Transported points and, when requested, the transported deformation gradient"""
    points: np.ndarray
    jacobians: Optional[np.ndarray] = None

    def log_jacobian(self) -> np.ndarray:
        det = np.linalg.det(self.jacobians)
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(det > 0, np.log(np.where(det > 0, det, 1.0)), np.nan)


def advect_points(traj: Trajectory, pts, steps: Optional[int] = None, with_jacobian: bool = False,
                  reverse: bool = False) -> AdvectedPoints:
    """
    RK4 transport of passive points through the time-dependent velocity field.

    Forward maps x to phi_1(x); reverse integrates from t = 1 back to t = 0 and
    yields the inverse map. With with_jacobian, dJ/dt = (grad u o phi) J is
    carried alongside every point starting from J = I. Points move independently,
    so they are transported in fixed-size blocks on the worker pool.
    """
    steps = traj.steps if steps is None else steps
    if steps < 1:
        raise InvalidArgumentError(f"step count must be >= 1, got {steps}")
    spec = traj.spec
    dim = traj.initial.dim
    points = np.array(pts, dtype=float).reshape(-1, dim)

    dt = (-1.0 if reverse else 1.0) / steps
    t0 = 1.0 if reverse else 0.0
    # Flow states at every node and half node of the transport grid
    stages = [traj.state_at(min(max(t0 + 0.5 * k * dt, 0.0), 1.0)) for k in range(2 * steps + 1)]

    def rate(stage: int, y: np.ndarray, j: Optional[np.ndarray]):
        state = stages[stage]
        if j is None:
            return velocity_at(state, y, spec), None
        u, du = velocity_gradient_at(state, y, spec)
        return u, np.einsum("nab,nbc->nac", du, j)

    def transport(rows: slice) -> Tuple[np.ndarray, Optional[np.ndarray]]:
        x = points[rows]
        jac = np.broadcast_to(np.eye(dim), (x.shape[0], dim, dim)).copy() if with_jacobian else None
        for n in range(steps):
            k1, l1 = rate(2 * n, x, jac)
            k2, l2 = rate(2 * n + 1, x + 0.5 * dt * k1, None if jac is None else jac + 0.5 * dt * l1)
            k3, l3 = rate(2 * n + 1, x + 0.5 * dt * k2, None if jac is None else jac + 0.5 * dt * l2)
            k4, l4 = rate(2 * n + 2, x + dt * k3, None if jac is None else jac + dt * l3)
            x = x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            if jac is not None:
                jac = jac + (dt / 6.0) * (l1 + 2.0 * l2 + 2.0 * l3 + l4)
            if not np.all(np.isfinite(x)):
                logger.error(f"Point advection produced non-finite positions at node {n + 1}")
                raise BlowUpError("point advection produced non-finite positions", n + 1, t0 + (n + 1) * dt)
        return x, jac

    parts = map_row_blocks(transport, points.shape[0], ADVECT_BLOCK)
    if not parts:
        return AdvectedPoints(points=points, jacobians=np.zeros((0, dim, dim)) if with_jacobian else None)
    jacobians = np.concatenate([part[1] for part in parts]) if with_jacobian else None
    return AdvectedPoints(points=np.concatenate([part[0] for part in parts]), jacobians=jacobians)


def raster_points(domain: Rectangle, width: int, height: int) -> np.ndarray:
    """Pixel nodes of a raster covering the domain, row-major with x fastest"""
    xs = np.linspace(domain.x0, domain.x1, width)
    ys = np.linspace(domain.y0, domain.y1, height)
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def warp_image(traj: Trajectory, moving: ImageField, out_resolution: Union[int, Tuple[int, int]],
               domain: Optional[Rectangle] = None, reverse: bool = False,
               steps: Optional[int] = None) -> ScalarImage:
    """
    Moving image pulled back through the flow, I1 o phi, sampled on a raster.

    Out-of-domain samples are clamped by the interpolant. With reverse the
    inverse map is used instead, giving I1 o phi^-1.
    """
    domain = domain or getattr(moving, "domain", None) or Rectangle.unit_square()
    if isinstance(out_resolution, int):
        width = height = out_resolution
    else:
        width, height = out_resolution
    nodes = raster_points(domain, width, height)
    warped = advect_points(traj, nodes, steps=steps, reverse=reverse).points
    pixels = moving.values(warped).reshape(height, width)
    logger.debug(f"Warped moving image onto a {width}x{height} raster")
    return ScalarImage(pixels=np.clip(pixels, 0.0, 1.0), domain=domain)


@dataclass
class GridFigure:
    """Advected grid polylines with per-vertex log-Jacobian determinant"""
    line_ids: np.ndarray
    params: np.ndarray
    points: np.ndarray
    log_jacobian: np.ndarray

    def rows(self) -> List[Tuple[int, float, float, float, float]]:
        return [(int(i), float(t), float(p[0]), float(p[1]), float(lj))
                for i, t, p, lj in zip(self.line_ids, self.params, self.points, self.log_jacobian)]


def grid_lines(domain: Rectangle, n_lines: int, samples_per_line: int) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Undeformed grid: n_lines horizontal then n_lines vertical lines.

    Returns line ids, curve parameter t in [0, 1] and the vertex coordinates.
    """
    if n_lines < 2 or samples_per_line < 2:
        raise InvalidArgumentError("grid figures need at least 2 lines and 2 samples per line")
    t = np.linspace(0.0, 1.0, samples_per_line)
    offsets = np.linspace(0.0, 1.0, n_lines)
    ids, params, pts = [], [], []
    for k, s in enumerate(offsets):
        y = domain.y0 + s * domain.height
        ids.append(np.full(t.size, k))
        params.append(t)
        pts.append(np.column_stack([domain.x0 + t * domain.width, np.full(t.size, y)]))
    for k, s in enumerate(offsets):
        x = domain.x0 + s * domain.width
        ids.append(np.full(t.size, n_lines + k))
        params.append(t)
        pts.append(np.column_stack([np.full(t.size, x), domain.y0 + t * domain.height]))
    return np.concatenate(ids), np.concatenate(params), np.vstack(pts)


def grid_figure(traj: Trajectory, n_lines: int, samples_per_line: int,
                domain: Optional[Rectangle] = None, steps: Optional[int] = None) -> GridFigure:
    """Deformed grid at flow time 1, colored by log det of the transported Jacobian"""
    domain = domain or Rectangle.unit_square()
    ids, params, pts = grid_lines(domain, n_lines, samples_per_line)
    advected = advect_points(traj, pts, steps=steps, with_jacobian=True)
    return GridFigure(line_ids=ids, params=params, points=advected.points,
                      log_jacobian=advected.log_jacobian())
