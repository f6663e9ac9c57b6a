"""
Shared fixtures for the test suite
"""

import os

import numpy as np

from jetreg.jet_state import JetState, symmetrize_last_pair, zeros

SLOW_TESTS = os.getenv("JETREG_SLOW_TESTS") == "1"


def random_state(seed: int, order: int, n: int = 3, scale: float = 0.05, spread: float = 0.3) -> JetState:
    """Random jet state near the identity with small momenta and symmetric second-order blocks"""
    rng = np.random.default_rng(seed)
    state = zeros(order, n)
    state.q[...] = 0.5 + spread * rng.uniform(-1.0, 1.0, size=(n, 2))
    state.p[...] = scale * rng.normal(size=(n, 2))
    if order >= 1:
        state.q1[...] = np.eye(2) + 0.1 * rng.normal(size=(n, 2, 2))
        state.mu1[...] = 0.2 * scale * rng.normal(size=(n, 2, 2))
    if order == 2:
        state.q2[...] = symmetrize_last_pair(0.1 * rng.normal(size=(n, 2, 2, 2)))
        state.mu2[...] = symmetrize_last_pair(0.02 * scale * rng.normal(size=(n, 2, 2, 2)))
    return state


def random_direction(seed: int, order: int, n: int = 3) -> JetState:
    """Unit-scale random variation with symmetric second-order blocks"""
    rng = np.random.default_rng(seed)
    blocks = {name: rng.normal(size=value.shape) for name, value in zeros(order, n).blocks()}
    return JetState(order=order, **blocks).symmetrized()
