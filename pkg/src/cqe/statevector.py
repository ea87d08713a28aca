"""Dense statevector simulation.

Basis index bit ``q`` is the occupation of qubit (spin orbital) ``q``.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fcidump import ReferenceDeterminant
from .pauli import PauliSum, PauliTerm, _I_POW, _z_signs

__all__ = [
    "StateVector",
    "from_determinant",
    "apply_pauli_sum",
    "expectation",
    "inner",
    "apply_term_exponential",
    "apply_generator_exponential",
    "CompiledGenerator",
    "compile_operator",
]


class StateVector:
    """``2**n`` complex amplitudes."""

    __slots__ = ("n", "amps")

    def __init__(self, n: int, amps: np.ndarray):
        amps = np.asarray(amps, dtype=complex)
        if amps.shape != (1 << n,):
            raise ValueError(f"expected {1 << n} amplitudes for {n} qubits, got shape {amps.shape}")
        self.n = n
        self.amps = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.amps.copy())

    def __repr__(self):
        return f"StateVector(n={self.n}, norm={self.norm():.12f})"


def from_determinant(det: ReferenceDeterminant, n: int) -> StateVector:
    if any(q >= n for q in det.occupied):
        raise ValueError("determinant does not fit the register")
    amps = np.zeros(1 << n, dtype=complex)
    amps[det.bitstring] = 1.0
    return StateVector(n, amps)


@lru_cache(maxsize=65536)
def _pauli_action(n: int, x: int, z: int) -> tuple[np.ndarray, np.ndarray]:
    """``(src, phase)`` with ``(P psi)[c] = phase[c] * psi[src[c]]``."""
    idx = np.arange(1 << n, dtype=np.int64)
    src = idx ^ x
    phase = _I_POW[(x & z).bit_count() % 4] * _z_signs(src, z)
    src.setflags(write=False)
    phase.setflags(write=False)
    return src, phase


def _check(n: int, psi: StateVector):
    if psi.n != n:
        raise ValueError(f"operator acts on {n} qubits, state has {psi.n}")


def apply_pauli_sum(op: PauliSum, psi: StateVector) -> StateVector:
    """``op |psi>``, accumulated term by term in lexicographic order; not renormalized."""
    _check(op.n, psi)
    out = np.zeros_like(psi.amps)
    for (x, z), c in op.items():
        src, phase = _pauli_action(op.n, x, z)
        out += c * phase * psi.amps[src]
    return StateVector(psi.n, out)


def inner(phi: StateVector, psi: StateVector) -> complex:
    if phi.n != psi.n:
        raise ValueError("state dimensions differ")
    return complex(np.vdot(phi.amps, psi.amps))


def expectation(op: PauliSum, psi: StateVector) -> complex:
    return inner(psi, apply_pauli_sum(op, psi))


def apply_term_exponential(term: PauliTerm, theta: float, psi: StateVector) -> StateVector:
    """``exp(i theta P) |psi> = cos(theta) psi + i sin(theta) P psi``."""
    if term.coeff != 1:
        raise ValueError("term exponential needs a bare Pauli string (coefficient +1)")
    _check(term.n, psi)
    x, z = term.masks
    return StateVector(psi.n, _rotate(psi.amps, psi.n, x, z, theta))


def _rotate(amps: np.ndarray, n: int, x: int, z: int, theta: float) -> np.ndarray:
    src, phase = _pauli_action(n, x, z)
    return np.cos(theta) * amps + (1j * np.sin(theta)) * (phase * amps[src])


class CompiledGenerator:
    """An anti-Hermitian sum of mutually commuting Pauli strings, ready to exponentiate.

    ``exp(t G)`` is applied as the ordered product of ``exp(i t r_k P_k)``
    with ``G = sum_k i r_k P_k``; commutation makes the product exact.
    """

    __slots__ = ("n", "rotations")

    def __init__(self, gen: PauliSum):
        if not gen.is_antihermitian():
            raise ValueError("generator must be anti-Hermitian (imaginary coefficients)")
        self.n = gen.n
        self.rotations = []
        for (x, z), c in gen.items():
            src, phase = _pauli_action(gen.n, x, z)
            self.rotations.append((src, 1j * phase, c.imag))

    def apply(self, t: float, amps: np.ndarray) -> np.ndarray:
        for src, iphase, r in self.rotations:
            theta = t * r
            amps = np.cos(theta) * amps + np.sin(theta) * (iphase * amps[src])
        return amps


def apply_generator_exponential(gen: PauliSum | CompiledGenerator, t: float, psi: StateVector) -> StateVector:
    """``exp(t G) |psi>`` for a pool generator ``G``."""
    if isinstance(gen, PauliSum):
        gen = CompiledGenerator(gen)
    _check(gen.n, psi)
    if t == 0.0:
        return psi.copy()
    return StateVector(psi.n, gen.apply(t, psi.amps))


def compile_operator(op: PauliSum) -> sp.csr_matrix:
    """Sparse matrix of ``op`` for repeated application in the solver loop."""
    return op.to_sparse()
