"""Pauli-string algebra and the fermion-to-qubit maps used by the solver.

A Pauli string on ``n`` qubits is stored as a pair of bit masks ``(x, z)``:
qubit ``q`` carries X if only bit ``q`` of ``x`` is set, Z if only the bit of
``z`` is set, and Y if both are.  Coefficients always refer to the proper
Pauli string (Y, not XZ).  Labels print qubit 0 rightmost.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

import numpy as np
import scipy.sparse as sp

from .fcidump import MolecularIntegrals

__all__ = [
    "PauliTerm",
    "PauliSum",
    "jw_ladder",
    "qubit_ladder",
    "excitation_generator",
    "hamiltonian_to_pauli",
    "number_operator",
    "sz_operator",
    "ENCODINGS",
]

ENCODINGS = ("fermionic", "unencoded")
SIMPLIFY_TOL = 1e-14

_I_POW = (1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j)
_CODE = {(0, 0): "I", (1, 0): "X", (1, 1): "Y", (0, 1): "Z"}
_RANK = {"I": 0, "X": 1, "Y": 2, "Z": 3}


def _packed(x: int, z: int, n: int) -> int:
    """2 bits per qubit (I=0, X=1, Y=2, Z=3); sorts like the label string."""
    key = 0
    for q in range(n):
        key |= _RANK[_CODE[(x >> q) & 1, (z >> q) & 1]] << (2 * q)
    return key


def _label(x: int, z: int, n: int) -> str:
    return "".join(_CODE[(x >> q) & 1, (z >> q) & 1] for q in reversed(range(n)))


def _masks(label: str) -> tuple[int, int]:
    x = z = 0
    for q, ch in enumerate(reversed(label.upper())):
        if ch in "XY":
            x |= 1 << q
        if ch in "ZY":
            z |= 1 << q
        if ch not in "IXYZ":
            raise ValueError(f"bad Pauli character {ch!r}")
    return x, z


def _product(x1: int, z1: int, x2: int, z2: int) -> tuple[int, int, complex]:
    x, z = x1 ^ x2, z1 ^ z2
    power = (x1 & z1).bit_count() + (x2 & z2).bit_count() - (x & z).bit_count()
    power += 2 * (z1 & x2).bit_count()
    return x, z, _I_POW[power % 4]


@dataclass(frozen=True)
class PauliTerm:
    """A weighted Pauli string; ``ops`` is the label with qubit 0 rightmost."""

    coeff: complex
    ops: str

    @property
    def n(self) -> int:
        return len(self.ops)

    @property
    def masks(self) -> tuple[int, int]:
        return _masks(self.ops)

    @property
    def weight(self) -> int:
        return sum(ch != "I" for ch in self.ops)

    def __str__(self):
        c = complex(self.coeff) + 0.0  # drop negative zeros
        text = f"{c.real:.10g}" if c.imag == 0 else f"({c:.10g})"
        return f"{text} * {self.ops}"


class PauliSum:
    """Sparse linear combination of n-qubit Pauli strings.

    Arithmetic returns new objects; instances are treated as immutable.
    """

    __slots__ = ("n", "_terms")

    def __init__(self, n: int, terms: Mapping[tuple[int, int], complex] | None = None):
        if n < 1:
            raise ValueError("qubit count must be positive")
        self.n = n
        self._terms: dict[tuple[int, int], complex] = dict(terms) if terms else {}

    @classmethod
    def identity(cls, n: int, coeff: complex = 1.0) -> "PauliSum":
        return cls(n, {(0, 0): complex(coeff)})

    @classmethod
    def zero(cls, n: int) -> "PauliSum":
        return cls(n)

    @classmethod
    def from_label(cls, label: str, coeff: complex = 1.0) -> "PauliSum":
        return cls(len(label), {_masks(label): complex(coeff)})

    @classmethod
    def from_terms(cls, terms: Iterable[PauliTerm | tuple[complex, str]]) -> "PauliSum":
        terms = list(terms)
        if not terms:
            raise ValueError("need at least one term to infer the qubit count")
        out: dict[tuple[int, int], complex] = {}
        n = None
        for t in terms:
            coeff, ops = (t.coeff, t.ops) if isinstance(t, PauliTerm) else t
            if n is None:
                n = len(ops)
            elif len(ops) != n:
                raise ValueError("terms act on different qubit counts")
            key = _masks(ops)
            out[key] = out.get(key, 0.0) + complex(coeff)
        return cls(n, out)

    # -- inspection ---------------------------------------------------
    def items(self) -> list[tuple[tuple[int, int], complex]]:
        """``((x, z), coeff)`` pairs in deterministic lexicographic order."""
        n = self.n
        return sorted(self._terms.items(), key=lambda kv: _packed(kv[0][0], kv[0][1], n))

    @property
    def terms(self) -> list[PauliTerm]:
        return [PauliTerm(c, _label(x, z, self.n)) for (x, z), c in self.items()]

    def __iter__(self) -> Iterator[PauliTerm]:
        return iter(self.terms)

    def __len__(self):
        return len(self._terms)

    def coefficient(self, label: str) -> complex:
        return self._terms.get(_masks(label), 0.0)

    def is_zero(self, tol: float = SIMPLIFY_TOL) -> bool:
        return all(abs(c) < tol for c in self._terms.values())

    def is_hermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.imag) < tol for c in self._terms.values())

    def is_antihermitian(self, tol: float = 1e-12) -> bool:
        return all(abs(c.real) < tol for c in self._terms.values())

    def allclose(self, other: "PauliSum", tol: float = 1e-12) -> bool:
        return (self - other).is_zero(tol)

    # -- arithmetic ---------------------------------------------------
    def _check(self, other: "PauliSum"):
        if other.n != self.n:
            raise ValueError(f"qubit count mismatch: {self.n} vs {other.n}")

    def __add__(self, other):
        if not isinstance(other, PauliSum):
            other = PauliSum.identity(self.n, other)
        self._check(other)
        out = dict(self._terms)
        for k, c in other._terms.items():
            out[k] = out.get(k, 0.0) + c
        return PauliSum(self.n, out)

    __radd__ = __add__

    def __neg__(self):
        return PauliSum(self.n, {k: -c for k, c in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, PauliSum):
            self._check(other)
            out: dict[tuple[int, int], complex] = {}
            _accumulate_product(self._terms, other._terms, out, 1.0)
            return PauliSum(self.n, out)
        return PauliSum(self.n, {k: c * other for k, c in self._terms.items()})

    def __rmul__(self, other):
        return PauliSum(self.n, {k: other * c for k, c in self._terms.items()})

    def __truediv__(self, other):
        return self * (1.0 / other)

    def adjoint(self) -> "PauliSum":
        return PauliSum(self.n, {k: c.conjugate() for k, c in self._terms.items()})

    def simplify(self, tol: float = SIMPLIFY_TOL) -> "PauliSum":
        return PauliSum(self.n, {k: c for k, c in self._terms.items() if abs(c) >= tol})

    def commutes_with(self, other: "PauliSum", tol: float = 1e-12) -> bool:
        return (self * other - other * self).simplify(tol).is_zero(tol)

    # -- matrices -----------------------------------------------------
    def to_sparse(self) -> sp.csr_matrix:
        """Matrix in the computational basis (bit q of the index is qubit q)."""
        dim = 1 << self.n
        idx = np.arange(dim, dtype=np.int64)
        rows, cols, vals = [], [], []
        for (x, z), c in self.items():
            rows.append(idx ^ x)
            cols.append(idx)
            vals.append(c * _I_POW[(x & z).bit_count() % 4] * _z_signs(idx, z))
        if not rows:
            return sp.csr_matrix((dim, dim), dtype=complex)
        mat = sp.coo_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(dim, dim)
        )
        return mat.tocsr()

    def to_matrix(self) -> np.ndarray:
        return self.to_sparse().toarray()

    def __repr__(self):
        return f"PauliSum(n={self.n}, terms={len(self)})"

    def __str__(self):
        if not self._terms:
            return "0"
        return "\n".join(str(t) for t in self.terms)


def _z_signs(idx: np.ndarray, z: int) -> np.ndarray:
    parity = np.zeros(idx.shape, dtype=np.int64)
    q = 0
    while z >> q:
        if (z >> q) & 1:
            parity ^= (idx >> q) & 1
        q += 1
    return 1.0 - 2.0 * parity


def _accumulate_product(a: Mapping, b: Mapping, out: dict, scale: complex):
    for (x1, z1), c1 in a.items():
        for (x2, z2), c2 in b.items():
            x, z, ph = _product(x1, z1, x2, z2)
            out[(x, z)] = out.get((x, z), 0.0) + scale * c1 * c2 * ph


def _ladder(q: int, kind: str, n: int, chain: bool) -> PauliSum:
    if not 0 <= q < n:
        raise ValueError(f"mode {q} out of range for {n} qubits")
    if kind not in ("creation", "annihilation"):
        raise ValueError(f"kind must be 'creation' or 'annihilation', got {kind!r}")
    zc = (1 << q) - 1 if chain else 0
    bit = 1 << q
    sign = -1.0 if kind == "creation" else 1.0
    return PauliSum(n, {(bit, zc): 0.5 + 0.0j, (bit, zc | bit): 0.5j * sign})


def jw_ladder(spin_orbital: int, kind: str, n: int) -> PauliSum:
    """Jordan-Wigner image of a fermionic creation or annihilation operator.

    ``a^dag_q -> (X_q - i Y_q)/2 Z_{q-1} ... Z_0``.
    """
    return _ladder(spin_orbital, kind, n, chain=True)


def qubit_ladder(q: int, kind: str, n: int) -> PauliSum:
    """Local qubit-particle ladder ``(X_q -/+ i Y_q)/2`` without parity chain."""
    return _ladder(q, kind, n, chain=False)


def _check_quadruple(i, k, j, l, n):
    if not all(isinstance(v, (int, np.integer)) for v in (i, k, j, l)):
        raise ValueError("indices must be integers")
    if not (0 <= i < k < n and 0 <= j < l < n):
        raise ValueError(f"need 0 <= i < k < n and 0 <= j < l < n, got ({i},{k},{j},{l}), n={n}")
    if (i, k) == (j, l):
        raise ValueError("(i, k) == (j, l) gives a vanishing generator")


def excitation_generator(i: int, k: int, j: int, l: int, encoding: str, n: int) -> PauliSum:
    """Anti-Hermitian generator ``a+_i a+_k a_l a_j - h.c.`` on ``n`` qubits.

    ``encoding='fermionic'`` uses Jordan-Wigner ladders, ``'unencoded'`` the
    local qubit-particle ladders.  Coefficients of the result are purely
    imaginary.
    """
    _check_quadruple(i, k, j, l, n)
    if encoding == "fermionic":
        lad = jw_ladder
    elif encoding == "unencoded":
        lad = qubit_ladder
    else:
        raise ValueError(f"unknown encoding {encoding!r}")
    gamma = lad(i, "creation", n) * lad(k, "creation", n) * lad(l, "annihilation", n) * lad(j, "annihilation", n)
    return (gamma - gamma.adjoint()).simplify()


def number_operator(n: int) -> PauliSum:
    out = PauliSum.zero(n)
    for q in range(n):
        out = out + PauliSum(n, {(0, 0): 0.5, (0, 1 << q): -0.5})
    return out.simplify()


def sz_operator(norb: int) -> PauliSum:
    """Twice the S_z operator, i.e. N_alpha - N_beta, under blocked indexing."""
    n = 2 * norb
    terms: dict[tuple[int, int], complex] = {}
    for q in range(n):
        terms[(0, 1 << q)] = -0.5 if q < norb else 0.5
    return PauliSum(n, terms)


def hamiltonian_to_pauli(ints: MolecularIntegrals) -> PauliSum:
    """Jordan-Wigner image of the electronic Hamiltonian.

    ``H = e_core + sum h_pq a+_p a_q + 1/2 sum (pq|rs) a+_p a+_r a_s a_q``
    over spin orbitals, with the two-body part written as
    ``E_pq E_rs - delta_qr E_ps`` in terms of ``E_pq = a+_p a_q``.
    """
    n = ints.n_qubits
    h_so, v_so = ints.spin_orbital_integrals()
    one_body = h_so - 0.5 * np.einsum("pqqs->ps", v_so)

    excit: dict[tuple[int, int], dict] = {}

    def e_op(p: int, q: int) -> dict:
        if (p, q) not in excit:
            excit[p, q] = (jw_ladder(p, "creation", n) * jw_ladder(q, "annihilation", n))._terms
        return excit[p, q]

    out: dict[tuple[int, int], complex] = {(0, 0): complex(ints.e_core)}
    for p, q in zip(*np.nonzero(one_body)):
        for key, c in e_op(p, q).items():
            out[key] = out.get(key, 0.0) + one_body[p, q] * c
    for p, q, r, s in zip(*np.nonzero(v_so)):
        _accumulate_product(e_op(p, q), e_op(r, s), out, 0.5 * v_so[p, q, r, s])
    ham = PauliSum(n, out).simplify()
    return PauliSum(n, {k: complex(c.real, 0.0) if abs(c.imag) < 1e-14 else c for k, c in ham._terms.items()})
