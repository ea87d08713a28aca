"""Two-body excitation pool, ACSE residuals and reduced density matrices."""

from __future__ import annotations

from math import comb
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .fcidump import MolecularIntegrals
from .pauli import ENCODINGS, PauliSum, excitation_generator
from .statevector import CompiledGenerator, StateVector, apply_pauli_sum

__all__ = [
    "Excitation",
    "ExcitationPool",
    "ResidualError",
    "build_pool",
    "pool_size",
    "residual_vector",
    "measure_rdms",
    "energy_from_rdms",
    "format_sparse_tensor",
]

SECTORS = ("aa", "bb", "ab")


class ResidualError(RuntimeError):
    pass


class Excitation(NamedTuple):
    """Generator ``a+_i a+_k a_l a_j - h.c.`` over spin orbitals."""

    i: int
    k: int
    j: int
    l: int
    sector: str

    def __str__(self):
        return f"{self.i},{self.k},{self.j},{self.l},{self.sector}"


def pool_size(norb: int) -> int:
    return 2 * comb(comb(norb, 2), 2) + comb(norb * norb, 2)


def _sector_pairs(norb: int, sector: str) -> list[tuple[int, int]]:
    m = norb
    if sector == "aa":
        return [(p, q) for p in range(m) for q in range(p + 1, m)]
    if sector == "bb":
        return [(m + p, m + q) for p in range(m) for q in range(p + 1, m)]
    return [(p, m + q) for p in range(m) for q in range(m)]


class ExcitationPool:
    """Canonically ordered set of independent S_z- and N-conserving generators.

    Sectors come in the order aa, bb, ab; inside a sector elements are
    ordered lexicographically by (rank of (i,k), rank of (j,l)) with the
    upper pair ranked strictly higher than the lower one.
    """

    def __init__(self, norb: int, encoding: str = "fermionic"):
        if norb < 2:
            raise ValueError("the pool needs at least two spatial orbitals")
        if encoding not in ENCODINGS:
            raise ValueError(f"unknown encoding {encoding!r}")
        self.norb = norb
        self.encoding = encoding
        elements = []
        for sector in SECTORS:
            pairs = _sector_pairs(norb, sector)
            for upper in range(len(pairs)):
                for lower in range(upper):
                    (i, k), (j, l) = pairs[upper], pairs[lower]
                    elements.append(Excitation(i, k, j, l, sector))
        self.elements: tuple[Excitation, ...] = tuple(elements)
        self._index = {e: idx for idx, e in enumerate(self.elements)}
        self._generators: dict[int, PauliSum] = {}
        self._kernels: dict[int, CompiledGenerator] = {}
        self._cnots: dict[int, int] = {}
        self._triplets = None

    @property
    def n_qubits(self) -> int:
        return 2 * self.norb

    def __len__(self):
        return len(self.elements)

    @property
    def mu(self) -> int:
        return len(self.elements)

    def index(self, exc: Excitation | tuple) -> int:
        return self._index[Excitation(*exc)]

    def generator(self, e: int) -> PauliSum:
        if e not in self._generators:
            x = self.elements[e]
            self._generators[e] = excitation_generator(x.i, x.k, x.j, x.l, self.encoding, self.n_qubits)
        return self._generators[e]

    def kernel(self, e: int) -> CompiledGenerator:
        if e not in self._kernels:
            self._kernels[e] = CompiledGenerator(self.generator(e))
        return self._kernels[e]

    def cnots(self, e: int) -> int:
        """CNOTs of a staircase circuit: ``2 (weight - 1)`` per Pauli string of the generator."""
        if e not in self._cnots:
            self._cnots[e] = sum(2 * (t.weight - 1) for t in self.generator(e).terms if t.weight > 0)
        return self._cnots[e]

    def triplets(self):
        """Concatenated sparse entries ``(element, row, col, value)`` of all generators."""
        if self._triplets is None:
            eids, rows, cols, vals = [], [], [], []
            for e in range(self.mu):
                mat = self.generator(e).to_sparse().tocoo()
                eids.append(np.full(mat.nnz, e, dtype=np.int64))
                rows.append(mat.row.astype(np.int64))
                cols.append(mat.col.astype(np.int64))
                vals.append(mat.data)
            self._triplets = tuple(np.concatenate(a) for a in (eids, rows, cols, vals))
        return self._triplets

    def __repr__(self):
        return f"ExcitationPool(norb={self.norb}, encoding={self.encoding!r}, mu={self.mu})"


_POOL_CACHE: dict[tuple[int, str], ExcitationPool] = {}


def build_pool(norb: int, encoding: str = "fermionic") -> ExcitationPool:
    """Canonical pool; instances are cached since they hold compiled generators."""
    key = (norb, encoding)
    if key not in _POOL_CACHE:
        _POOL_CACHE[key] = ExcitationPool(norb, encoding)
    return _POOL_CACHE[key]


def residual_vector(psi: StateVector, ham, pool: ExcitationPool, imag_tol: float = 1e-10) -> np.ndarray:
    """ACSE residual ``<psi|[H, G_e]|psi>`` for every pool element ``e``.

    ``ham`` is a :class:`PauliSum` or its precompiled sparse matrix.  Each
    entry equals ``d/dt E(exp(t G_e) psi)`` at ``t = 0``.

    With ``phi = H psi`` the residual is ``<phi|G|psi> - <psi|G|phi>``, which
    is ``2 Re <phi|G|psi>`` for anti-Hermitian ``G``.  For a real Hamiltonian
    and a state that is real up to a global phase ``<phi|G|psi>`` is real;
    an imaginary part above ``imag_tol`` raises :class:`ResidualError`.
    """
    if psi.n != pool.n_qubits:
        raise ValueError("state and pool act on different registers")
    if isinstance(ham, PauliSum):
        phi = apply_pauli_sum(ham, psi).amps
    elif sp.issparse(ham):
        phi = ham @ psi.amps
    else:
        raise TypeError("ham must be a PauliSum or a sparse matrix")
    eids, rows, cols, vals = pool.triplets()
    contrib = vals * phi[rows].conj() * psi.amps[cols]
    overlap_re = np.bincount(eids, weights=contrib.real, minlength=pool.mu)
    overlap_im = np.bincount(eids, weights=contrib.imag, minlength=pool.mu)
    worst = float(np.max(np.abs(overlap_im))) if overlap_im.size else 0.0
    if not worst <= imag_tol:
        raise ResidualError(f"residual overlaps have imaginary part {worst:.3e}; state is not real up to phase")
    return 2.0 * overlap_re


def _annihilate(amps: np.ndarray, q: int) -> np.ndarray:
    idx = np.arange(amps.size, dtype=np.int64)
    src = idx[(idx >> q) & 1 == 1]
    below = src & ((1 << q) - 1)
    parity = np.zeros_like(src)
    for b in range(q):
        parity ^= (below >> b) & 1
    out = np.zeros_like(amps)
    out[src ^ (1 << q)] = (1 - 2 * parity) * amps[src]
    return out


def measure_rdms(psi: StateVector, tol: float = 1e-10) -> tuple[np.ndarray, np.ndarray]:
    """Spin-orbital 1-RDM ``<a+_p a_q>`` and 2-RDM ``D[i,k,j,l] = <a+_i a+_k a_l a_j>``.

    Raises ``ValueError`` if ``psi`` is not a particle-number eigenstate.
    """
    n = psi.n
    amps = psi.amps
    probs = np.abs(amps) ** 2
    counts = np.array([bin(b).count("1") for b in range(amps.size)], dtype=float)
    mean = probs @ counts
    if probs @ counts**2 - mean**2 > tol:
        raise ValueError("state is not a particle-number eigenstate")
    single = np.array([_annihilate(amps, q) for q in range(n)])
    d1 = single.conj() @ single.T
    pair = np.empty((n, n, amps.size), dtype=complex)
    for j in range(n):
        for l in range(n):
            pair[j, l] = _annihilate(single[j], l)
    flat = pair.reshape(n * n, -1)
    d2 = (flat.conj() @ flat.T).reshape(n, n, n, n)
    return d1, d2


def energy_from_rdms(ints: MolecularIntegrals, d1: np.ndarray, d2: np.ndarray) -> float:
    """``E = e_core + sum h_pq D1[p,q] + 1/2 sum (pq|rs) D2[p,r,q,s]``."""
    h_so, v_so = ints.spin_orbital_integrals()
    n = h_so.shape[0]
    if d1.shape != (n, n) or d2.shape != (n, n, n, n):
        raise ValueError("RDM dimensions do not match the integrals")
    e = ints.e_core + np.einsum("pq,pq->", h_so, d1) + 0.5 * np.einsum("pqrs,prqs->", v_so, d2)
    return float(e.real)


def format_sparse_tensor(tensor: np.ndarray, tol: float = 1e-12) -> str:
    """Plain-text dump: one ``indices... value`` line per entry above ``tol``."""
    lines = []
    for idx in zip(*np.nonzero(np.abs(tensor) > tol)):
        val = tensor[idx]
        val = float(val.real) if abs(np.imag(val)) <= tol else complex(val)
        lines.append(" ".join(str(int(i)) for i in idx) + f" {val!r}")
    return "\n".join(lines) + ("\n" if lines else "")
