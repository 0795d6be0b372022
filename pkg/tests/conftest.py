"""Shared oracle helpers for the test suite.

The oracles here are written independently of the library paths they
check: the dense Hamiltonian is assembled by explicit basis enumeration
rather than Kronecker products, and time evolution uses a one-off
eigendecomposition.
"""

import numpy as np
import pytest


def fock_states(length: int, d: int = 3):
    """All occupation tuples, site 1 most significant (library ordering)."""
    states = [()]
    for _ in range(length):
        states = [s + (n,) for s in states for n in range(d)]
    return states


def dense_bose_hubbard_oracle(omegas, anharmonicities, hopping, d: int = 3) -> np.ndarray:
    """Dense chain Hamiltonian by explicit matrix-element enumeration."""
    omegas = np.asarray(omegas, float)
    anh = np.asarray(anharmonicities, float)
    length = omegas.size
    states = fock_states(length, d)
    index = {s: i for i, s in enumerate(states)}
    dim = len(states)
    ham = np.zeros((dim, dim), dtype=complex)
    for s in states:
        i = index[s]
        diag = sum(
            omegas[l] * s[l] - 0.5 * anh[l] * s[l] * (s[l] - 1)
            for l in range(length)
        )
        ham[i, i] = diag
        for l in range(length - 1):
            # a_l^dag a_{l+1}: moves one boson from site l+1 to site l
            if s[l + 1] >= 1 and s[l] + 1 < d:
                t = list(s)
                t[l] += 1
                t[l + 1] -= 1
                j = index[tuple(t)]
                amp = hopping * np.sqrt((s[l] + 1) * s[l + 1])
                ham[j, i] += amp
                ham[i, j] += amp
    return ham


def evolve_dense_oracle(ham: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    """exp(-i H t) psi0 through a fresh eigendecomposition (Hermitian H)."""
    evals, vecs = np.linalg.eigh(ham)
    return vecs @ (np.exp(-1j * evals * t) * (vecs.conj().T @ psi0))


def evolve_nonhermitian_oracle(ham: np.ndarray, psi0: np.ndarray, t: float) -> np.ndarray:
    evals, vecs = np.linalg.eig(ham)
    coeff = np.linalg.solve(vecs, psi0)
    return vecs @ (np.exp(-1j * evals * t) * coeff)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
