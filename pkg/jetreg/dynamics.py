"""
Jet-particle Hamiltonian and Hamilton's equations
Single Responsibility: Energy, velocity jets and the full state right-hand side
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .jet_state import JetState, symmetrize_last_pair
from .kernel import KernelSpec, derivative_tensors
from .parallel import map_row_blocks

logger = logging.getLogger(__name__)

# One multilinear term of a rate block: (sign, einsum subscripts, operand names).
# Operands are state blocks (q1, q2, p, mu1, mu2) and velocity jets v0..v3, where
# v<m>[n, a, b1..bm] = d_b1..d_bm v^a at particle n. A term is active only when
# all of its operands exist at the state's order.
RateTerm = Tuple[float, str, Tuple[str, ...]]

RATE_TERMS: Dict[str, List[RateTerm]] = {
    "q": [
        (+1.0, "na->na", ("v0",)),
    ],
    "q1": [
        (+1.0, "nag,ngb->nab", ("v1", "q1")),
    ],
    "q2": [
        (+1.0, "nade,ndb,neg->nabg", ("v2", "q1", "q1")),
        (+1.0, "nad,ndbg->nabg", ("v1", "q2")),
    ],
    "p": [
        (-1.0, "nb,nba->na", ("p", "v1")),
        (-1.0, "nbk,nbka->na", ("mu1", "v2")),
        (-1.0, "nbkl,nbkla->na", ("mu2", "v3")),
    ],
    "mu1": [
        (+1.0, "nag,nbg->nab", ("mu1", "v1")),
        (-1.0, "ngb,nga->nab", ("mu1", "v1")),
        (+1.0, "nadg,nbdg->nab", ("mu2", "v2")),
        (-1.0, "ndbg,ndag->nab", ("mu2", "v2")),
        (-1.0, "ndgb,ndga->nab", ("mu2", "v2")),
    ],
    "mu2": [
        (+1.0, "nadg,nbd->nabg", ("mu2", "v1")),
        (+1.0, "nabd,ngd->nabg", ("mu2", "v1")),
        (-1.0, "ndbg,nda->nabg", ("mu2", "v1")),
    ],
}


@dataclass
class XiField:
    """Velocity jets at the particles: xi1 = dH/dmu1, xi2 = dH/dmu2"""
    xi1: Optional[np.ndarray] = None
    xi2: Optional[np.ndarray] = None


def coefficient_blocks(state: JetState) -> List[np.ndarray]:
    """Momentum blocks [p, mu1, mu2] truncated at the state's order"""
    return [state.p, state.mu1, state.mu2][:state.order + 1]


def rhs_kernel_order(order: int) -> int:
    """Highest kernel derivative used by state_derivative"""
    return 2 * order + 1


def pair_derivatives(targets: np.ndarray, sources: np.ndarray, spec: KernelSpec,
                     max_order: int) -> List[np.ndarray]:
    """Kernel derivative tensors of K(targets_i - sources_j), shape (M, N, d, ..., d)"""
    offsets = targets[:, None, :] - sources[None, :, :]
    return derivative_tensors(offsets, spec, max_order)


def contract_jets(tensors: Sequence[np.ndarray], coeffs: Sequence[np.ndarray], max_jet: int) -> List[np.ndarray]:
    """
    Velocity jets from precomputed pair tensors.

    v<m>[i, a, b1..bm] = sum_j sum_c (-1)^c coeffs[c][j, a, g1..gc] D^{m+c}(x_i - x_j)[b1..bm, g1..gc]
    """
    m_rows, n_src, dim = tensors[1].shape[:3]
    jets = []
    for m in range(max_jet + 1):
        total = np.zeros((m_rows, dim, dim ** m))
        for c, coeff in enumerate(coeffs):
            d_mc = tensors[m + c].reshape(m_rows, n_src, dim ** m, dim ** c)
            total += (-1.0) ** c * np.einsum("ijmk,jbk->ibm", d_mc, coeff.reshape(n_src, dim, dim ** c))
        jets.append(total.reshape((m_rows, dim) + (dim,) * m))
    return jets


def evaluate_jets(targets: np.ndarray, sources: np.ndarray, coeffs: Sequence[np.ndarray],
                  spec: KernelSpec, max_jet: int) -> List[np.ndarray]:
    """Velocity field and its derivatives up to max_jet at arbitrary target points"""
    targets = np.asarray(targets, dtype=float)
    max_order = max_jet + len(coeffs) - 1

    def block(rows: slice) -> List[np.ndarray]:
        tensors = pair_derivatives(targets[rows], sources, spec, max(max_order, 1))
        return contract_jets(tensors, coeffs, max_jet)

    parts = map_row_blocks(block, targets.shape[0])
    return [np.concatenate([part[m] for part in parts], axis=0) for m in range(max_jet + 1)]


def velocity_jets(state: JetState, spec: KernelSpec, max_jet: Optional[int] = None) -> List[np.ndarray]:
    """Velocity jets v0..v<max_jet> at the particle positions (default order + 1)"""
    if max_jet is None:
        max_jet = state.order + 1
    return evaluate_jets(state.q, state.q, coefficient_blocks(state), spec, max_jet)


def hamiltonian(state: JetState, spec: KernelSpec) -> float:
    """
    Kinetic energy of the jet-particle system.

    H = 1/2 sum_i (p_i . v0_i + mu1_i : v1_i + mu2_i : v2_i), which expands to the
    double sum over particle pairs of momentum-momentum kernel derivative terms.
    """
    jets = velocity_jets(state, spec, max_jet=state.order)
    coeffs = coefficient_blocks(state)
    return float(0.5 * sum(np.sum(c * v) for c, v in zip(coeffs, jets)))


def xi_from_state(state: JetState, spec: KernelSpec) -> XiField:
    if state.order == 0:
        return XiField()
    jets = velocity_jets(state, spec, max_jet=state.order)
    xi2 = symmetrize_last_pair(jets[2]) if state.order == 2 else None
    return XiField(xi1=jets[1], xi2=xi2)


def rate_operands(state: JetState, jets: Sequence[np.ndarray]) -> Dict[str, np.ndarray]:
    operands = {name: value for name, value in state.blocks() if name != "q"}
    operands.update({f"v{m}": v for m, v in enumerate(jets)})
    return operands


def active_terms(block: str, operands: Dict[str, np.ndarray]) -> List[RateTerm]:
    return [term for term in RATE_TERMS[block] if all(name in operands for name in term[2])]


def assemble_rates(state: JetState, operands: Dict[str, np.ndarray]) -> JetState:
    rates = {}
    for name, value in state.blocks():
        rate = np.zeros_like(value)
        for sign, subscripts, names in active_terms(name, operands):
            rate += sign * np.einsum(subscripts, *(operands[o] for o in names))
        rates[name] = rate
    return state.with_blocks(**rates).symmetrized()


def state_derivative(state: JetState, spec: KernelSpec) -> JetState:
    """
    Hamilton's equations for the jet-particle state.

    q' = v0, q1' = v1 q1, q2' = v2 (q1, q1) + v1 q2, p' = -dH/dq and the
    coadjoint motion of (mu1, mu2). Symmetric blocks are symmetrized.
    """
    jets = velocity_jets(state, spec)
    return assemble_rates(state, rate_operands(state, jets))
