"""
Taylor-expanded image matching functionals on the particle lattice
Single Responsibility: Matching value, its endpoint gradient and the quadrature reference integral
"""

import logging
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .image import ImageField
from .jet_state import AdjointState, JetState, grid_spacing, zeros
from .parallel import map_row_blocks, row_blocks
from .reg_types import InvalidArgumentError, OrderMismatchError, Rectangle, ShapeMismatchError

logger = logging.getLogger(__name__)

MATCH_ORDERS = (0, 1, 2)
MIN_QUAD_RES = 512


@dataclass(frozen=True)
class MatchConfig:
    """
    Matching functional settings.

    spacing is the lattice cell size (hx, hy); each sample point represents a
    cell of area hx * hy. The value is weighted by 1 / sigma_match.
    """
    match_order: int
    spacing: Tuple[float, float]
    sigma_match: float = 0.1
    domain: Optional[Rectangle] = None

    def __post_init__(self):
        if self.match_order not in MATCH_ORDERS:
            raise InvalidArgumentError(f"match order must be one of {MATCH_ORDERS}, got {self.match_order}")
        if min(self.spacing) <= 0:
            raise InvalidArgumentError(f"grid spacing must be positive, got {self.spacing}")
        if not self.sigma_match > 0:
            raise InvalidArgumentError(f"sigma_match must be positive, got {self.sigma_match}")

    @classmethod
    def for_grid(cls, domain: Rectangle, n_per_axis: int, match_order: int,
                 sigma_match: float = 0.1) -> 'MatchConfig':
        return cls(match_order=match_order, spacing=grid_spacing(domain, n_per_axis),
                   sigma_match=sigma_match, domain=domain)

    @property
    def cell_area(self) -> float:
        return float(self.spacing[0] * self.spacing[1])

    def corrections(self) -> np.ndarray:
        """Per-axis weights of the second-order Taylor correction, area * h_a^2 / 12"""
        return self.cell_area * np.asarray(self.spacing, dtype=float) ** 2 / 12.0


@dataclass(frozen=True)
class FixedSamples:
    """Fixed-image value, gradient and Hessian at every sample point"""
    points: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    hessians: np.ndarray

    def __len__(self) -> int:
        return self.points.shape[0]


def precompute_fixed(intp_I0: ImageField, grid: np.ndarray) -> FixedSamples:
    grid = np.asarray(grid, dtype=float)
    values, gradients, hessians = intp_I0.jets(grid, 2)
    return FixedSamples(points=grid.copy(), values=values, gradients=gradients, hessians=hessians)


def _check_inputs(fixed: FixedSamples, end: JetState, cfg: MatchConfig):
    if cfg.match_order > end.order:
        raise OrderMismatchError(
            f"match order exceeds jet order ({cfg.match_order} > {end.order})")
    if len(fixed) != end.n_particles:
        raise ShapeMismatchError(
            f"{len(fixed)} fixed samples but {end.n_particles} particles")


def _residuals(fixed: FixedSamples, jets, end: JetState, rows: slice, order: int):
    """Pointwise f, its directional derivatives g_a and second derivatives s_a"""
    f = fixed.values[rows] - jets[0]
    if order == 0:
        return f, None, None
    q1 = end.q1[rows]
    g = fixed.gradients[rows] - np.einsum("nb,nba->na", jets[1], q1)
    if order == 1:
        return f, g, None
    s = (np.einsum("naa->na", fixed.hessians[rows])
         - np.einsum("nbg,nba,nga->na", jets[2], q1, q1)
         - np.einsum("ng,ngaa->na", jets[1], end.q2[rows]))
    return f, g, s


def match_value(fixed: FixedSamples, intp_I1: ImageField, end: JetState, cfg: MatchConfig) -> float:
    """
    Matching functional of the given order at the endpoint jets.

    Order 0 is the Riemann sum of (I0 - I1(q))^2; order 2 adds the
    h^2/12-weighted gradient and Hessian correction per axis; order 1 keeps
    the gradient correction only.
    """
    _check_inputs(fixed, end, cfg)
    order = cfg.match_order
    area = cfg.cell_area
    corr = cfg.corrections()

    def block(rows: slice) -> float:
        jets = intp_I1.jets(end.q[rows], order)
        f, g, s = _residuals(fixed, jets, end, rows, order)
        total = area * np.sum(f * f)
        if order >= 1:
            total += np.sum(corr * g * g)
        if order == 2:
            total += np.sum(corr * f[:, None] * s)
        return float(total)

    return sum(map_row_blocks(block, end.n_particles)) / cfg.sigma_match


def match_endpoint_gradient(fixed: FixedSamples, intp_I1: ImageField, end: JetState,
                            cfg: MatchConfig) -> AdjointState:
    """
    Exact derivative of match_value with respect to q, q1 and q2.

    Returns a full-tensor covector (momentum blocks zero) pairing with
    variations through JetState.dot; the order-2 gradient needs third
    derivatives of I1.
    """
    _check_inputs(fixed, end, cfg)
    order = cfg.match_order
    area = cfg.cell_area
    corr = cfg.corrections()
    weight = 1.0 / cfg.sigma_match

    def block(rows: slice):
        jets = intp_I1.jets(end.q[rows], order + 1)
        f, g, s = _residuals(fixed, jets, end, rows, order)
        j1 = jets[1]
        d_q = -2.0 * area * f[:, None] * j1
        d_q1 = d_q2 = None
        if order >= 1:
            q1 = end.q1[rows]
            h1 = jets[2]
            # d g_a / d q_e = -H1[b, e] q1[b, a]
            d_q += -2.0 * np.einsum("a,na,nbe,nba->ne", corr, g, h1, q1)
            d_q1 = -2.0 * np.einsum("a,na,nb->nba", corr, g, j1)
        if order == 2:
            q2 = end.q2[rows]
            t1 = jets[3]
            ds_dq = (-np.einsum("nbge,nba,nga->nae", t1, q1, q1)
                     - np.einsum("nge,ngaa->nae", h1, q2))
            d_q += -np.einsum("a,na,ne->ne", corr, s, j1) + np.einsum("a,n,nae->ne", corr, f, ds_dq)
            d_q1 += -2.0 * np.einsum("a,n,nbg,nga->nba", corr, f, h1, q1)
            d_q2 = np.zeros_like(q2)
            diag = -np.einsum("a,n,ng->nga", corr, f, j1)
            for a in range(end.dim):
                d_q2[:, :, a, a] = diag[:, :, a]
        return d_q, d_q1, d_q2

    lam = zeros(end.order, end.n_particles, end.dim)
    for rows, (d_q, d_q1, d_q2) in zip(row_blocks(end.n_particles), map_row_blocks(block, end.n_particles)):
        lam.q[rows] = weight * d_q
        if d_q1 is not None:
            lam.q1[rows] = weight * d_q1
        if d_q2 is not None:
            lam.q2[rows] = weight * d_q2
    return lam.symmetrized()


def gauss_legendre_nodes(lo: float, hi: float, cells: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite two-point Gauss-Legendre nodes and weights on [lo, hi]"""
    ref_nodes, ref_weights = np.polynomial.legendre.leggauss(2)
    edges = np.linspace(lo, hi, cells + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * ref_nodes[None, :]).ravel()
    weights = (half[:, None] * ref_weights[None, :]).ravel()
    return nodes, weights


def oracle_integral(I0: ImageField, I1: ImageField, quad_res: int = MIN_QUAD_RES,
                    domain: Optional[Rectangle] = None) -> float:
    """
    Reference value of the integral of (I0 - I1)^2 over the domain.

    Composite two-point Gauss-Legendre on a quad_res x quad_res cell grid;
    exact for integrands that are cubic within each cell.
    """
    if quad_res < MIN_QUAD_RES:
        raise InvalidArgumentError(f"quad_res must be >= {MIN_QUAD_RES}, got {quad_res}")
    domain = domain or Rectangle.unit_square()
    xs, wx = gauss_legendre_nodes(domain.x0, domain.x1, quad_res)
    ys, wy = gauss_legendre_nodes(domain.y0, domain.y1, quad_res)

    def block(rows: slice) -> float:
        gx, gy = np.meshgrid(xs, ys[rows])
        points = np.column_stack([gx.ravel(), gy.ravel()])
        diff = (I0.values(points) - I1.values(points)).reshape(gx.shape)
        return float(np.sum(wy[rows, None] * wx[None, :] * diff * diff))

    return sum(map_row_blocks(block, ys.size))
