"""
Jet-particle phase space for orders 0, 1 and 2
Single Responsibility: State container, grid initialization and flat-vector packing
"""

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple

import numpy as np

from .reg_types import InvalidArgumentError, Rectangle, ShapeMismatchError, UnsupportedOrderError

logger = logging.getLogger(__name__)

JET_ORDERS = (0, 1, 2)
BLOCK_NAMES = ("q", "q1", "q2", "p", "mu1", "mu2")
POSITION_BLOCKS = ("q", "q1", "q2")
MOMENTUM_BLOCKS = ("p", "mu1", "mu2")
SYMMETRIC_BLOCKS = ("q2", "mu2")

# Number of trailing d-sized axes after the particle axis
_BLOCK_RANK = {"q": 1, "p": 1, "q1": 2, "mu1": 2, "q2": 3, "mu2": 3}
_BLOCK_MIN_ORDER = {"q": 0, "p": 0, "q1": 1, "mu1": 1, "q2": 2, "mu2": 2}


def check_order(order: int) -> int:
    if order not in JET_ORDERS:
        raise UnsupportedOrderError(f"jet order must be one of {JET_ORDERS}, got {order}")
    return order


def blocks_for_order(order: int) -> Tuple[str, ...]:
    """Block names carried at a jet order, in canonical flattening order"""
    check_order(order)
    return tuple(name for name in BLOCK_NAMES if _BLOCK_MIN_ORDER[name] <= order)


def block_shape(name: str, n: int, dim: int) -> Tuple[int, ...]:
    return (n,) + (dim,) * _BLOCK_RANK[name]


def symmetrize_last_pair(a: np.ndarray) -> np.ndarray:
    """Average a tensor with its transpose over the last two axes"""
    return 0.5 * (a + np.swapaxes(a, -1, -2))


@dataclass
class JetState:
    """
    Phase-space point of N jet-particles.

    Blocks absent at the given order are None: q1/mu1 exist iff order >= 1,
    q2/mu2 iff order == 2. q2 is symmetric in its two lower indices and mu2 in
    its two upper indices (the last two array axes). The same container is used
    for tangent vectors and adjoint covectors.
    """
    order: int
    q: np.ndarray
    p: np.ndarray
    q1: Optional[np.ndarray] = None
    q2: Optional[np.ndarray] = None
    mu1: Optional[np.ndarray] = None
    mu2: Optional[np.ndarray] = None

    def __post_init__(self):
        check_order(self.order)
        n, dim = np.shape(self.q)
        for name in BLOCK_NAMES:
            value = getattr(self, name)
            present = _BLOCK_MIN_ORDER[name] <= self.order
            if present and value is None:
                raise ShapeMismatchError(f"order {self.order} state requires block '{name}'")
            if not present and value is not None:
                raise ShapeMismatchError(f"order {self.order} state must not carry block '{name}'")
            if value is not None and np.shape(value) != block_shape(name, n, dim):
                raise ShapeMismatchError(
                    f"block '{name}' has shape {np.shape(value)}, expected {block_shape(name, n, dim)}")

    @property
    def n_particles(self) -> int:
        return self.q.shape[0]

    @property
    def dim(self) -> int:
        return self.q.shape[1]

    def block_names(self) -> Tuple[str, ...]:
        return blocks_for_order(self.order)

    def blocks(self) -> Iterator[Tuple[str, np.ndarray]]:
        for name in self.block_names():
            yield name, getattr(self, name)

    def with_blocks(self, **blocks) -> 'JetState':
        return replace(self, **blocks)

    def _combine(self, other: 'JetState', op) -> 'JetState':
        if not isinstance(other, JetState) or other.order != self.order:
            raise ShapeMismatchError("states must share jet order")
        return replace(self, **{name: op(value, getattr(other, name)) for name, value in self.blocks()})

    def __add__(self, other: 'JetState') -> 'JetState':
        return self._combine(other, np.add)

    def __sub__(self, other: 'JetState') -> 'JetState':
        return self._combine(other, np.subtract)

    def __mul__(self, scalar: float) -> 'JetState':
        return replace(self, **{name: scalar * value for name, value in self.blocks()})

    __rmul__ = __mul__

    def __neg__(self) -> 'JetState':
        return self * -1.0

    def dot(self, other: 'JetState') -> float:
        """Full-tensor inner product summed over all blocks"""
        if other.order != self.order:
            raise ShapeMismatchError("states must share jet order")
        return float(sum(np.sum(value * getattr(other, name)) for name, value in self.blocks()))

    def copy(self) -> 'JetState':
        return replace(self, **{name: np.array(value, copy=True) for name, value in self.blocks()})

    def zeros_like(self) -> 'JetState':
        return replace(self, **{name: np.zeros_like(value) for name, value in self.blocks()})

    def symmetrized(self) -> 'JetState':
        return replace(self, **{name: symmetrize_last_pair(value)
                                for name, value in self.blocks() if name in SYMMETRIC_BLOCKS})

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(value)) for _, value in self.blocks())

    def momenta_zeroed(self) -> 'JetState':
        return replace(self, **{name: np.zeros_like(value)
                                for name, value in self.blocks() if name in MOMENTUM_BLOCKS})


# Tangent vectors and adjoint covectors share the block layout of the state.
TangentState = JetState
AdjointState = JetState


def zeros(order: int, n: int, dim: int = 2) -> JetState:
    """All-zero state (also used as a zero tangent or covector)"""
    blocks = {name: np.zeros(block_shape(name, n, dim)) for name in blocks_for_order(order)}
    return JetState(order=order, **blocks)


def grid_spacing(domain: Rectangle, n_per_axis: int) -> Tuple[float, float]:
    return domain.width / n_per_axis, domain.height / n_per_axis


def grid_points(domain: Rectangle, n_per_axis: int) -> np.ndarray:
    """Cell-center lattice, row-major with x varying fastest"""
    if n_per_axis < 1:
        raise InvalidArgumentError(f"n_per_axis must be >= 1, got {n_per_axis}")
    hx, hy = grid_spacing(domain, n_per_axis)
    xs = domain.x0 + (np.arange(n_per_axis) + 0.5) * hx
    ys = domain.y0 + (np.arange(n_per_axis) + 0.5) * hy
    gx, gy = np.meshgrid(xs, ys)
    return np.column_stack([gx.ravel(), gy.ravel()])


def init_grid(domain: Rectangle, n_per_axis: int, order: int) -> JetState:
    """Identity jets on the cell-center lattice with zero momenta"""
    check_order(order)
    q = grid_points(domain, n_per_axis)
    state = zeros(order, q.shape[0], q.shape[1])
    state.q[...] = q
    if order >= 1:
        state.q1[...] = np.eye(q.shape[1])
    logger.debug(f"Initialized {q.shape[0]} order-{order} jet-particles on {domain}")
    return state


# ---------------------------------------------------------------------------
# Flat coordinates
# ---------------------------------------------------------------------------

def _packed_size(name: str, dim: int) -> int:
    rank = _BLOCK_RANK[name]
    if name in SYMMETRIC_BLOCKS:
        return dim * (dim * (dim + 1) // 2)
    return dim ** rank


def flat_length(order: int, n: int, dim: int = 2) -> int:
    return n * sum(_packed_size(name, dim) for name in blocks_for_order(order))


def momentum_offset(order: int, n: int, dim: int = 2) -> int:
    """Index where the momentum blocks start in the flat vector"""
    return n * sum(_packed_size(name, dim) for name in blocks_for_order(order) if name in POSITION_BLOCKS)


def _pack_block(name: str, value: np.ndarray, covector: bool) -> np.ndarray:
    if name not in SYMMETRIC_BLOCKS:
        return value.reshape(-1)
    dim = value.shape[-1]
    rows, cols = np.triu_indices(dim)
    packed = value[..., rows, cols]
    if covector:
        # A packed off-diagonal coordinate drives both mirrored entries.
        packed = packed + np.where(rows != cols, value[..., cols, rows], 0.0)
    return packed.reshape(-1)


def _unpack_block(name: str, flat: np.ndarray, n: int, dim: int) -> np.ndarray:
    if name not in SYMMETRIC_BLOCKS:
        return flat.reshape(block_shape(name, n, dim)).copy()
    rows, cols = np.triu_indices(dim)
    packed = flat.reshape(n, dim, rows.size)
    full = np.zeros(block_shape(name, n, dim))
    full[..., rows, cols] = packed
    full[..., cols, rows] = packed
    return full


def flatten(state: JetState) -> np.ndarray:
    """
    Pack a state into a contiguous vector.

    Layout: blocks q, q1, q2, p, mu1, mu2 (those present at the order), each
    particle-major and row-major within tensors; symmetric blocks store only
    their upper-triangle entries.
    """
    return np.concatenate([_pack_block(name, value, covector=False) for name, value in state.blocks()])


def flatten_covector(lam: JetState) -> np.ndarray:
    """Pack a covector so that it pairs with flatten() coordinates"""
    return np.concatenate([_pack_block(name, value, covector=True) for name, value in lam.blocks()])


def unflatten(v: np.ndarray, order: int, n: int, dim: int = 2) -> JetState:
    v = np.asarray(v, dtype=float)
    expected = flat_length(order, n, dim)
    if v.shape != (expected,):
        raise ShapeMismatchError(f"flat vector has shape {v.shape}, expected ({expected},)")
    blocks = {}
    offset = 0
    for name in blocks_for_order(order):
        size = n * _packed_size(name, dim)
        blocks[name] = _unpack_block(name, v[offset:offset + size], n, dim)
        offset += size
    return JetState(order=order, **blocks)


def with_momenta(state: JetState, momenta: np.ndarray) -> JetState:
    """Replace the momentum blocks with those packed in `momenta`"""
    offset = momentum_offset(state.order, state.n_particles, state.dim)
    flat = flatten(state)
    if momenta.shape != (flat.size - offset,):
        raise ShapeMismatchError(f"momentum vector has shape {momenta.shape}, expected ({flat.size - offset},)")
    flat[offset:] = momenta
    return unflatten(flat, state.order, state.n_particles, state.dim)


# ---------------------------------------------------------------------------
# JSON
# ---------------------------------------------------------------------------

def state_to_dict(state: JetState, sigma: Optional[float] = None) -> Dict[str, Any]:
    data: Dict[str, Any] = {"order": state.order}
    for name in BLOCK_NAMES:
        value = getattr(state, name)
        data[name] = None if value is None else value.tolist()
    if sigma is not None:
        data["sigma"] = float(sigma)
    return data


def state_from_dict(data: Dict[str, Any]) -> Tuple[JetState, Optional[float]]:
    try:
        order = int(data["order"])
        blocks = {name: np.asarray(data[name], dtype=float)
                  for name in BLOCK_NAMES if data.get(name) is not None}
        if "q" not in blocks:
            raise KeyError("q")
    except (KeyError, TypeError, ValueError) as e:
        raise ShapeMismatchError(f"malformed jet state document: {e}")
    sigma = data.get("sigma")
    return JetState(order=order, **blocks), (None if sigma is None else float(sigma))


def load_state(path) -> Tuple[JetState, Optional[float]]:
    """Read a state document written by state_to_dict"""
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ShapeMismatchError(f"malformed jet state document {path}: {e}")
    if not isinstance(data, dict):
        raise ShapeMismatchError(f"jet state document {path} must contain a JSON object")
    state, sigma = state_from_dict(data)
    logger.debug(f"Loaded {state.n_particles} order-{state.order} particles from {path}")
    return state, sigma
