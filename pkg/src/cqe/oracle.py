"""Reference calculations used to check the solver.

Nothing here shares code with the production propagation kernels: the
Hamiltonian is diagonalized densely inside a particle-number/S_z sector,
and exponentials are summed as Taylor series of sparse matrices.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .ansatz import Ansatz, prepare_state
from .fcidump import MolecularIntegrals, ReferenceDeterminant
from .pauli import PauliSum
from .residual import ExcitationPool
from .statevector import StateVector

__all__ = [
    "SectorSpec",
    "sector_basis",
    "fci_ground_state",
    "exact_exponential_apply",
    "finite_difference_gradient",
    "determinant_energy",
]

TAYLOR_TOL = 1e-16


@dataclass(frozen=True)
class SectorSpec:
    """Electron count and ``2 S_z`` (alpha minus beta electrons)."""

    nelec: int
    ms2: int = 0

    def __post_init__(self):
        if self.nelec < 0:
            raise ValueError("nelec must be non-negative")
        if (self.nelec + self.ms2) % 2:
            raise ValueError(f"nelec={self.nelec} and ms2={self.ms2} have different parity")

    @property
    def n_alpha(self) -> int:
        return (self.nelec + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.nelec - self.ms2) // 2

    @classmethod
    def of(cls, ints: MolecularIntegrals) -> "SectorSpec":
        return cls(ints.nelec, ints.ms2)


def sector_basis(n_qubits: int, sector: SectorSpec) -> np.ndarray:
    """Sorted basis indices with the sector's alpha and beta occupations.

    Qubits ``0..m-1`` are alpha spin orbitals and ``m..2m-1`` beta.
    """
    if n_qubits % 2:
        raise ValueError("register must hold an even number of spin orbitals")
    m = n_qubits // 2
    if not (0 <= sector.n_alpha <= m and 0 <= sector.n_beta <= m):
        raise ValueError(f"sector {sector} is empty on {n_qubits} qubits")
    idx = np.arange(1 << n_qubits, dtype=np.int64)
    alpha = idx & ((1 << m) - 1)
    beta = idx >> m
    pop = np.vectorize(int.bit_count, otypes=[np.int64])
    keep = (pop(alpha) == sector.n_alpha) & (pop(beta) == sector.n_beta)
    return idx[keep]


def fci_ground_state(ham: PauliSum, sector: SectorSpec) -> tuple[float, StateVector]:
    """Lowest eigenpair of ``ham`` within ``sector``, embedded in the full register."""
    basis = sector_basis(ham.n, sector)
    if basis.size == 0:
        raise ValueError(f"sector {sector} is empty")
    full = ham.to_sparse().tocsr()
    block = full[basis][:, basis].toarray()
    if not np.allclose(block, block.conj().T, atol=1e-12):
        raise ValueError("Hamiltonian block is not Hermitian")
    evals, evecs = np.linalg.eigh(block)
    vec = evecs[:, 0]
    # fix the global phase so the largest amplitude is real positive
    k = int(np.argmax(np.abs(vec)))
    vec = vec * (abs(vec[k]) / vec[k])
    amps = np.zeros(1 << ham.n, dtype=complex)
    amps[basis] = vec
    return float(evals[0]), StateVector(ham.n, amps)


def _one_norm(mat: sp.spmatrix) -> float:
    return float(abs(mat).sum(axis=0).max()) if mat.nnz else 0.0


def _expm_apply(mat: sp.spmatrix, amps: np.ndarray) -> np.ndarray:
    """``exp(mat) @ amps`` by a Taylor series on ``s`` scaled sub-steps."""
    steps = max(1, math.ceil(_one_norm(mat)))
    scaled = mat / steps
    out = np.asarray(amps, dtype=complex).copy()
    for _ in range(steps):
        term = out.copy()
        total = out.copy()
        k = 1
        while True:
            term = scaled @ term / k
            total += term
            if np.linalg.norm(term) <= TAYLOR_TOL * max(1.0, np.linalg.norm(total)):
                break
            k += 1
            if k > 60:
                raise RuntimeError("Taylor series failed to converge")
        out = total
    return out


def exact_exponential_apply(gen: PauliSum, psi: StateVector) -> StateVector:
    """``exp(gen) |psi>`` without splitting ``gen`` into factors."""
    if not gen.is_antihermitian():
        raise ValueError("exponent must be anti-Hermitian")
    if gen.n != psi.n:
        raise ValueError("operator and state sizes differ")
    return StateVector(psi.n, _expm_apply(gen.to_sparse(), psi.amps))


def finite_difference_gradient(ansatz: Ansatz, ham: PauliSum | sp.spmatrix, pool: ExcitationPool,
                               h: float = 1e-4) -> np.ndarray:
    """Central differences of ``E(exp(t G_e) psi)`` at ``t = 0`` for every pool element."""
    if not 1e-6 <= h <= 1e-3:
        raise ValueError("step h must lie in [1e-6, 1e-3]")
    hmat = ham.to_sparse() if isinstance(ham, PauliSum) else sp.csr_matrix(ham)
    psi = prepare_state(ansatz).amps

    def energy(v):
        return float(np.vdot(v, hmat @ v).real)

    grad = np.empty(pool.mu)
    for e in range(pool.mu):
        g = pool.generator(e).to_sparse()
        grad[e] = (energy(_expm_apply(h * g, psi)) - energy(_expm_apply(-h * g, psi))) / (2 * h)
    return grad


def determinant_energy(ints: MolecularIntegrals, det: ReferenceDeterminant) -> float:
    """Slater-Condon energy of a single determinant."""
    h, v = ints.spin_orbital_integrals()
    occ = list(det.occupied)
    e = ints.e_core + sum(h[i, i] for i in occ)
    for i in occ:
        for j in occ:
            e += 0.5 * (v[i, i, j, j] - v[i, j, j, i])
    return float(e)
