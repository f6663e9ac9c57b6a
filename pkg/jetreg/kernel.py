"""
Isotropic Gaussian reproducing kernel and its partial derivatives
Single Responsibility: Exact kernel derivatives up to total order 6
"""

import itertools
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Tuple

import numpy as np

from .reg_types import InvalidArgumentError, UnsupportedOrderError

logger = logging.getLogger(__name__)

MAX_DERIVATIVE_ORDER = 6

MultiIndex = Tuple[int, ...]


@dataclass(frozen=True)
class KernelSpec:
    """Gaussian kernel K(x) = exp(-|x|^2 / 2 sigma^2), normalized so K(0) = 1"""
    sigma: float

    def __post_init__(self):
        if not np.isfinite(self.sigma) or self.sigma <= 0:
            raise InvalidArgumentError(f"kernel sigma must be a positive finite number, got {self.sigma}")


def _as_offset(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("kernel argument must be finite")
    return arr


def hermite_table(u: np.ndarray, max_order: int) -> List[np.ndarray]:
    """Probabilists' Hermite polynomials He_0..He_max_order evaluated at u"""
    table = [np.ones_like(u)]
    if max_order >= 1:
        table.append(u.copy())
    for n in range(1, max_order):
        table.append(u * table[n] - n * table[n - 1])
    return table


def axis_factors(r: np.ndarray, spec: KernelSpec, max_order: int) -> List[np.ndarray]:
    """
    One-dimensional Gaussian derivatives per coordinate.

    factors[n][..., a] = d^n/dx^n exp(-x^2 / 2 sigma^2) at x = r[..., a], which is
    (-1/sigma)^n He_n(x/sigma) exp(-x^2 / 2 sigma^2).
    """
    u = r / spec.sigma
    gauss = np.exp(-0.5 * u * u)
    hermite = hermite_table(u, max_order)
    return [((-1.0 / spec.sigma) ** n) * hermite[n] * gauss for n in range(max_order + 1)]


def _axis_counts(idx: Sequence[int], dim: int) -> Tuple[int, ...]:
    counts = [0] * dim
    for axis in idx:
        if axis < 0 or axis >= dim:
            raise InvalidArgumentError(f"multi-index axis {axis} outside 0..{dim - 1}")
        counts[axis] += 1
    return tuple(counts)


def _separable_product(factors: List[np.ndarray], counts: Tuple[int, ...]) -> np.ndarray:
    # The Gaussian factorizes over axes; multiply in fixed axis order.
    value = factors[counts[0]][..., 0]
    for axis in range(1, len(counts)):
        value = value * factors[counts[axis]][..., axis]
    return value


def _check_order(order: int):
    if order > MAX_DERIVATIVE_ORDER:
        raise UnsupportedOrderError(
            f"kernel derivatives are supported up to order {MAX_DERIVATIVE_ORDER}, got {order}")


def kernel_scalar(x, spec: KernelSpec) -> float:
    """Scalar Gaussian exp(-|x|^2 / 2 sigma^2); the matrix kernel is this times the identity"""
    x = _as_offset(x)
    return float(np.exp(-np.dot(x, x) / (2.0 * spec.sigma ** 2)))


def kernel_deriv(x, idx: Sequence[int], spec: KernelSpec) -> float:
    """Partial derivative d_idx of the scalar kernel at offset x"""
    _check_order(len(idx))
    x = _as_offset(x)
    counts = _axis_counts(idx, x.shape[-1])
    factors = axis_factors(x, spec, len(idx))
    return float(_separable_product(factors, counts))


def derivative_tensors(r: np.ndarray, spec: KernelSpec, max_order: int) -> List[np.ndarray]:
    """
    Full symmetric derivative tensors of the kernel for an array of offsets.

    r has shape (..., d); entry m of the result has shape (..., d, ..., d) with m
    trailing derivative axes, so D[m][..., a1, ..., am] = d_{a1...am} K(r).
    """
    _check_order(max_order)
    r = np.asarray(r, dtype=float)
    dim = r.shape[-1]
    lead = r.shape[:-1]
    factors = axis_factors(r, spec, max_order)

    tensors = []
    for order in range(max_order + 1):
        by_counts: Dict[Tuple[int, ...], np.ndarray] = {}
        entries = []
        for idx in itertools.product(range(dim), repeat=order):
            counts = _axis_counts(idx, dim)
            if counts not in by_counts:
                by_counts[counts] = _separable_product(factors, counts)
            entries.append(by_counts[counts])
        stacked = np.stack(entries, axis=-1)
        tensors.append(stacked.reshape(lead + (dim,) * order))
    return tensors


def canonical_indices(dim: int, max_order: int) -> Iterator[MultiIndex]:
    """Sorted multi-indices of every length 0..max_order"""
    for order in range(max_order + 1):
        yield from itertools.combinations_with_replacement(range(dim), order)


class PairTable:
    """All kernel derivatives up to max_order for one particle pair"""

    def __init__(self, xi, xj, spec: KernelSpec, max_order: int):
        _check_order(max_order)
        self.offset = _as_offset(xi) - _as_offset(xj)
        self.max_order = max_order
        self.dim = self.offset.shape[-1]
        self._tensors = derivative_tensors(self.offset, spec, max_order)

    def __getitem__(self, idx: Sequence[int]) -> float:
        idx = tuple(idx)
        if len(idx) > self.max_order:
            raise UnsupportedOrderError(f"table holds derivatives up to order {self.max_order}")
        return float(self._tensors[len(idx)][idx])

    def tensor(self, order: int) -> np.ndarray:
        """Full derivative tensor of the given order"""
        return self._tensors[order]

    def __len__(self) -> int:
        return sum(1 for _ in canonical_indices(self.dim, self.max_order))

    def items(self) -> Iterator[Tuple[MultiIndex, float]]:
        for idx in canonical_indices(self.dim, self.max_order):
            yield idx, self[idx]


def pair_table(xi, xj, spec: KernelSpec, max_order: int = MAX_DERIVATIVE_ORDER) -> PairTable:
    """Cache every kernel derivative of K(xi - xj) up to max_order"""
    return PairTable(xi, xj, spec, max_order)
