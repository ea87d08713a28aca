"""FCIDUMP integral files and the Hartree-Fock reference determinant.

Spin orbitals are blocked: alpha orbitals occupy indices ``0..norb-1`` and
beta orbitals ``norb..2*norb-1``.  Every module in the package shares this
convention.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

__all__ = [
    "FCIDumpError",
    "MolecularIntegrals",
    "ReferenceDeterminant",
    "parse_fcidump",
    "read_fcidump",
    "write_fcidump",
    "reference_determinant",
]

_DUPLICATE_TOL = 1e-12


class FCIDumpError(ValueError):
    """Malformed FCIDUMP input. ``lineno`` is 1-based, or None for header-level problems."""

    def __init__(self, message: str, lineno: int | None = None):
        self.lineno = lineno
        if lineno is not None:
            message = f"line {lineno}: {message}"
        super().__init__(message)


@dataclass(frozen=True, eq=False)
class MolecularIntegrals:
    """Real molecular Hamiltonian in a spatial-orbital basis.

    ``v[p, q, r, s]`` is the chemist-notation integral (pq|rs).
    """

    norb: int
    nelec: int
    ms2: int
    e_core: float
    h: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        m = self.norb
        if m < 1:
            raise ValueError("norb must be positive")
        if self.h.shape != (m, m) or self.v.shape != (m, m, m, m):
            raise ValueError("integral shapes do not match norb")
        if not 1 <= self.nelec <= 2 * m:
            raise ValueError(f"nelec={self.nelec} infeasible for norb={m}")
        if abs(self.ms2) > self.nelec or (self.nelec + self.ms2) % 2:
            raise ValueError(f"ms2={self.ms2} inconsistent with nelec={self.nelec}")
        if np.iscomplexobj(self.h) or np.iscomplexobj(self.v):
            raise ValueError("complex integrals are not supported")
        if not np.array_equal(self.h, self.h.T):
            raise ValueError("one-electron integrals are not symmetric")
        v = self.v
        for perm in ((1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)):
            if not np.array_equal(v, v.transpose(perm)):
                raise ValueError("two-electron integrals lack 8-fold symmetry")

    @property
    def n_qubits(self) -> int:
        return 2 * self.norb

    @property
    def n_alpha(self) -> int:
        return (self.nelec + self.ms2) // 2

    @property
    def n_beta(self) -> int:
        return (self.nelec - self.ms2) // 2

    def spin_orbital_integrals(self) -> tuple[np.ndarray, np.ndarray]:
        """One- and two-electron integrals over the ``2*norb`` spin orbitals.

        The two-electron tensor stays in chemist notation and vanishes
        unless both (p, q) and (r, s) pair equal spins.
        """
        m = self.norb
        spin = np.repeat([0, 1], m)
        same = (spin[:, None] == spin[None, :]).astype(float)
        h_so = np.tile(self.h, (2, 2)) * same
        v_so = np.tile(self.v, (2, 2, 2, 2)) * same[:, :, None, None] * same[None, None, :, :]
        return h_so, v_so


@dataclass(frozen=True)
class ReferenceDeterminant:
    """Occupied spin orbitals (sorted) of a single determinant."""

    occupied: tuple[int, ...]
    norb: int = field(default=0)

    def __post_init__(self):
        occ = tuple(int(q) for q in self.occupied)
        if len(set(occ)) != len(occ):
            raise ValueError("occupied spin orbitals must be distinct")
        if self.norb and any(not 0 <= q < 2 * self.norb for q in occ):
            raise ValueError("occupied index outside the spin-orbital range")
        object.__setattr__(self, "occupied", tuple(sorted(occ)))

    @property
    def nelec(self) -> int:
        return len(self.occupied)

    @property
    def ms2(self) -> int:
        n_alpha = sum(1 for q in self.occupied if q < self.norb)
        return n_alpha - (self.nelec - n_alpha)

    @property
    def bitstring(self) -> int:
        return sum(1 << q for q in self.occupied)


def reference_determinant(ints: MolecularIntegrals) -> ReferenceDeterminant:
    """Aufbau filling of the lowest alpha and beta spatial orbitals."""
    m, n_a, n_b = ints.norb, ints.n_alpha, ints.n_beta
    if n_a > m or n_b > m or n_a < 0 or n_b < 0:
        raise ValueError(f"cannot place nelec={ints.nelec}, ms2={ints.ms2} in {m} orbitals")
    occ = list(range(n_a)) + [m + p for p in range(n_b)]
    return ReferenceDeterminant(tuple(occ), norb=m)


_HEADER_END = re.compile(r"(&END|/)\s*$", re.IGNORECASE)
_KEY_VALUE = re.compile(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*([^=]*?)(?=(?:[A-Za-z_][A-Za-z0-9_]*\s*=)|$)")


def _parse_header(lines: list[str]) -> tuple[dict[str, list[str]], int]:
    """Return the namelist key/values and the index of the first record line."""
    if not lines or not lines[0].lstrip().upper().startswith("&FCI"):
        raise FCIDumpError("header must start with &FCI", 1)
    chunks = []
    for idx, line in enumerate(lines):
        text = line.strip()
        if idx == 0:
            text = text[4:]
        done = _HEADER_END.search(text)
        if done:
            chunks.append(text[: done.start()])
            break
        chunks.append(text)
    else:
        raise FCIDumpError("header not terminated by &END or /")
    body = " ".join(chunks)
    fields: dict[str, list[str]] = {}
    for key, raw in _KEY_VALUE.findall(body):
        values = [tok for tok in re.split(r"[,\s]+", raw.strip()) if tok]
        fields[key.upper()] = values
    return fields, idx + 1


def _header_int(fields: dict[str, list[str]], key: str, default: int | None = None) -> int:
    if key not in fields:
        if default is None:
            raise FCIDumpError(f"header is missing {key}")
        return default
    vals = fields[key]
    if len(vals) != 1:
        raise FCIDumpError(f"header key {key} expects one value, got {vals}")
    try:
        return int(vals[0])
    except ValueError:
        raise FCIDumpError(f"header key {key} is not an integer: {vals[0]!r}") from None


def _canonical_eri_key(p: int, q: int, r: int, s: int) -> tuple[int, int, int, int]:
    a, b = (p, q) if p >= q else (q, p)
    c, d = (r, s) if r >= s else (s, r)
    return (a, b, c, d) if (a, b) >= (c, d) else (c, d, a, b)


def parse_fcidump(text: str | Iterable[str]) -> MolecularIntegrals:
    """Parse a Molpro-convention FCIDUMP into :class:`MolecularIntegrals`.

    Records are ``value i j k l`` with 1-based indices.  ``0 0 0 0`` holds
    the core energy, ``i j 0 0`` a one-electron integral and anything else
    the two-electron integral (ij|kl).  Orbital-energy records
    (``i 0 0 0``) are accepted and ignored.  Each record populates all of
    its symmetry-equivalent slots.
    """
    lines = text.splitlines() if isinstance(text, str) else [ln.rstrip("\n") for ln in text]
    fields, start = _parse_header(lines)
    norb = _header_int(fields, "NORB")
    nelec = _header_int(fields, "NELEC")
    ms2 = _header_int(fields, "MS2", 0)
    if _header_int(fields, "IUHF", 0):
        raise FCIDumpError("unrestricted (IUHF) integrals are not supported")
    if norb < 1:
        raise FCIDumpError(f"NORB must be positive, got {norb}")

    e_core = 0.0
    seen: dict[tuple[int, ...], tuple[float, int]] = {}
    h = np.zeros((norb, norb))
    v = np.zeros((norb, norb, norb, norb))

    for lineno, line in enumerate(lines[start:], start=start + 1):
        toks = line.split()
        if not toks:
            continue
        if len(toks) != 5 or "(" in line:
            raise FCIDumpError(f"expected 'value i j k l', got {line.strip()!r}", lineno)
        try:
            value = float(toks[0].replace("D", "E").replace("d", "e"))
            i, j, k, l = (int(t) for t in toks[1:])
        except ValueError:
            raise FCIDumpError(f"unparseable record {line.strip()!r}", lineno) from None
        if not np.isfinite(value):
            raise FCIDumpError("non-finite integral value", lineno)
        if any(not 0 <= x <= norb for x in (i, j, k, l)):
            raise FCIDumpError(f"index out of range [0, {norb}]", lineno)

        if i == j == k == l == 0:
            key: tuple[int, ...] = ()
        elif j == k == l == 0:
            continue
        elif k == l == 0:
            if i == 0 or j == 0:
                raise FCIDumpError("one-electron record needs two nonzero indices", lineno)
            key = (max(i, j) - 1, min(i, j) - 1)
        else:
            if 0 in (i, j, k, l):
                raise FCIDumpError("two-electron record needs four nonzero indices", lineno)
            key = _canonical_eri_key(i - 1, j - 1, k - 1, l - 1)

        if key in seen:
            old, old_line = seen[key]
            if abs(old - value) > _DUPLICATE_TOL:
                raise FCIDumpError(
                    f"conflicting duplicate of the record on line {old_line} ({old!r} vs {value!r})",
                    lineno,
                )
            continue
        seen[key] = (value, lineno)

        if not key:
            e_core = value
        elif len(key) == 2:
            a, b = key
            h[a, b] = h[b, a] = value
        else:
            p, q, r, s = key
            for a, b, c, d in ((p, q, r, s), (r, s, p, q)):
                v[a, b, c, d] = v[b, a, c, d] = v[a, b, d, c] = v[b, a, d, c] = value

    try:
        return MolecularIntegrals(norb=norb, nelec=nelec, ms2=ms2, e_core=e_core, h=h, v=v)
    except ValueError as exc:
        raise FCIDumpError(str(exc)) from None


def read_fcidump(path) -> MolecularIntegrals:
    with open(path) as fh:
        return parse_fcidump(fh.read())


def write_fcidump(ints: MolecularIntegrals, tol: float = 0.0) -> str:
    """Serialize to FCIDUMP text; values use ``repr`` so re-parsing is exact."""
    m = ints.norb
    out = [
        f" &FCI NORB={m},NELEC={ints.nelec},MS2={ints.ms2},",
        "  ORBSYM=" + "1," * m,
        "  ISYM=1,",
        " &END",
    ]
    for p in range(m):
        for q in range(p + 1):
            for r in range(p + 1):
                for s in range(r + 1):
                    if (p, q) < (r, s):
                        continue
                    val = float(ints.v[p, q, r, s])
                    if val != 0.0 and abs(val) > tol:
                        out.append(f"{val!r} {p + 1} {q + 1} {r + 1} {s + 1}")
    for p in range(m):
        for q in range(p + 1):
            val = float(ints.h[p, q])
            if val != 0.0 and abs(val) > tol:
                out.append(f"{val!r} {p + 1} {q + 1} 0 0")
    out.append(f"{float(ints.e_core)!r} 0 0 0 0")
    return "\n".join(out) + "\n"
