"""
First-variation and adjoint equations of the jet-particle flow
Single Responsibility: Jacobian-vector and Jacobian-transpose-vector products of the state RHS
"""

import logging
from typing import Dict, List, Sequence

import numpy as np

from .dynamics import (active_terms, coefficient_blocks, contract_jets,
                       pair_derivatives, rate_operands, velocity_jets)
from .jet_state import MOMENTUM_BLOCKS, AdjointState, JetState, TangentState
from .kernel import KernelSpec
from .parallel import map_row_blocks, row_blocks
from .reg_types import ShapeMismatchError

logger = logging.getLogger(__name__)


def tangent_kernel_order(order: int) -> int:
    """Highest kernel derivative used by the tangent and adjoint systems"""
    return 2 * order + 2


def _check_compatible(state: JetState, other: JetState):
    if other.order != state.order or other.q.shape != state.q.shape:
        raise ShapeMismatchError(
            f"state (order {state.order}, {state.q.shape}) and variation "
            f"(order {other.order}, {other.q.shape}) are not compatible")


def _split_term(subscripts: str):
    inputs, output = subscripts.split("->")
    return inputs.split(","), output


def _jet_variations(tensors: Sequence[np.ndarray], coeffs: Sequence[np.ndarray], d_coeffs: Sequence[np.ndarray],
                    d_offsets: np.ndarray, max_jet: int) -> List[np.ndarray]:
    # Momentum part is linear in the coefficients; the position part moves the kernel argument.
    jets = contract_jets(tensors, d_coeffs, max_jet)
    m_rows, n_src, dim = d_offsets.shape
    for m in range(max_jet + 1):
        moved = np.zeros((m_rows, dim, dim ** m))
        for c, coeff in enumerate(coeffs):
            d_next = tensors[m + c + 1].reshape(m_rows, n_src, dim ** m, dim ** c, dim)
            moved += (-1.0) ** c * np.einsum("ijmke,jbk,ije->ibm", d_next,
                                             coeff.reshape(n_src, dim, dim ** c), d_offsets)
        jets[m] = jets[m] + moved.reshape(jets[m].shape)
    return jets


def tangent_apply(state: JetState, delta: TangentState, spec: KernelSpec) -> TangentState:
    """
    Directional derivative of dynamics.state_derivative at `state` along `delta`.

    Each multilinear rate term contributes one product per operand with that
    operand replaced by its variation; velocity-jet variations include the
    motion of the kernel argument through delta.q.
    """
    _check_compatible(state, delta)
    max_jet = state.order + 1
    coeffs = coefficient_blocks(state)
    d_coeffs = coefficient_blocks(delta)
    q = state.q

    def block(rows: slice):
        tensors = pair_derivatives(q[rows], q, spec, tangent_kernel_order(state.order))
        d_offsets = delta.q[rows][:, None, :] - delta.q[None, :, :]
        return (contract_jets(tensors, coeffs, max_jet),
                _jet_variations(tensors, coeffs, d_coeffs, d_offsets, max_jet))

    parts = map_row_blocks(block, state.n_particles)
    jets = [np.concatenate([part[0][m] for part in parts]) for m in range(max_jet + 1)]
    d_jets = [np.concatenate([part[1][m] for part in parts]) for m in range(max_jet + 1)]

    operands = rate_operands(state, jets)
    d_operands = rate_operands(delta, d_jets)

    rates = {}
    for name, value in state.blocks():
        rate = np.zeros_like(value)
        for sign, subscripts, names in active_terms(name, operands):
            for k in range(len(names)):
                factors = [d_operands[o] if j == k else operands[o] for j, o in enumerate(names)]
                rate += sign * np.einsum(subscripts, *factors)
        rates[name] = rate
    return state.with_blocks(**rates).symmetrized()


def _transpose_local_terms(state: JetState, lam: AdjointState, operands: Dict[str, np.ndarray]) -> Dict[str, np.ndarray]:
    """Pull the covector back through every multilinear rate term onto its operands"""
    bars = {name: np.zeros_like(value) for name, value in operands.items()}
    for name, weight in lam.symmetrized().blocks():
        for sign, subscripts, names in active_terms(name, operands):
            inputs, output = _split_term(subscripts)
            for k in range(len(names)):
                others = [j for j in range(len(names)) if j != k]
                pulled = f"{','.join([output] + [inputs[j] for j in others])}->{inputs[k]}"
                bars[names[k]] += sign * np.einsum(pulled, weight, *(operands[names[j]] for j in others))
    return bars


def adjoint_apply(state: JetState, lam: AdjointState, spec: KernelSpec) -> AdjointState:
    """
    Adjoint rate -M(state)^T lam, where M is the Jacobian realized by tangent_apply.

    Satisfies <lam, tangent_apply(s, d)> = -<adjoint_apply(s, lam), d> for all d
    with symmetric q2 and mu2 blocks; the returned covector is symmetrized.
    """
    _check_compatible(state, lam)
    order = state.order
    max_jet = order + 1
    dim = state.dim
    n = state.n_particles
    q = state.q
    coeffs = coefficient_blocks(state)

    jets = velocity_jets(state, spec)
    operands = rate_operands(state, jets)
    bars = _transpose_local_terms(state, lam, operands)
    jet_bars = [bars[f"v{m}"].reshape(n, dim, dim ** m) for m in range(max_jet + 1)]

    def block(rows: slice):
        tensors = pair_derivatives(q[rows], q, spec, tangent_kernel_order(order))
        m_rows = rows.stop - rows.start
        coeff_bars = [np.zeros((n, dim, dim ** c)) for c in range(len(coeffs))]
        pair_force = np.zeros((m_rows, n, dim))
        for m in range(max_jet + 1):
            weight = jet_bars[m][rows]
            for c, coeff in enumerate(coeffs):
                sign = (-1.0) ** c
                d_mc = tensors[m + c].reshape(m_rows, n, dim ** m, dim ** c)
                coeff_bars[c] += sign * np.einsum("ijmk,ibm->jbk", d_mc, weight)
                d_next = tensors[m + c + 1].reshape(m_rows, n, dim ** m, dim ** c, dim)
                pair_force += sign * np.einsum("ijmke,ibm,jbk->ije", d_next, weight,
                                               coeff.reshape(n, dim, dim ** c))
        return coeff_bars, pair_force.sum(axis=1), pair_force.sum(axis=0)

    bar_q = np.zeros((n, dim))
    for rows, (coeff_bars, row_force, col_force) in zip(row_blocks(n), map_row_blocks(block, n)):
        bar_q[rows] += row_force
        bar_q -= col_force
        for c, momentum in enumerate(MOMENTUM_BLOCKS[:len(coeffs)]):
            bars[momentum] += coeff_bars[c].reshape(bars[momentum].shape)

    result = {"q": -bar_q}
    for name, _ in state.blocks():
        if name != "q":
            result[name] = -bars[name]
    return state.with_blocks(**result).symmetrized()