"""Product ansatz of two-body exponential layers.

A layer is a sparse ``{pool index: coefficient}`` map applied as the ordered
product of its element exponentials (ascending pool index).  Layers are
applied in stored order on top of the reference determinant.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fcidump import ReferenceDeterminant
from .residual import Excitation, ExcitationPool, build_pool
from .statevector import StateVector, from_determinant

__all__ = [
    "SparsifierConfig",
    "MergeReport",
    "CostReport",
    "Ansatz",
    "sparsify",
    "merge_window",
    "append_step",
    "prepare_state",
    "element_cnots",
    "layer_cnots",
    "cnot_count",
    "cost_report",
    "dumps_ansatz",
    "loads_ansatz",
]

ZERO_TOL = 1e-14


@dataclass(frozen=True)
class SparsifierConfig:
    criterion: str = "abs"
    c: float = 0.0
    include: bool = False
    p_depth: int = 0

    def __post_init__(self):
        if self.criterion not in ("abs", "descent"):
            raise ValueError(f"criterion must be 'abs' or 'descent', got {self.criterion!r}")
        if not 0.0 <= self.c <= 1.0:
            raise ValueError(f"sparsity constant must lie in [0, 1], got {self.c}")
        if self.p_depth < 0:
            raise ValueError("p_depth must be non-negative")


@dataclass
class MergeReport:
    merged: list[int] = field(default_factory=list)
    appended: list[int] = field(default_factory=list)


@dataclass(frozen=True)
class CostReport:
    circuit_cnots: int
    cumulative_cnots: int
    layer_count: int
    term_count: int


class Ansatz:
    """Reference state plus ordered exponential layers over a fixed pool.

    ``initial_state`` replaces the determinant as the starting state when
    given.  Prefix states (after each layer) are cached; every mutation goes
    through :func:`append_step`, which invalidates the affected suffix.
    """

    def __init__(self, reference: ReferenceDeterminant, pool: ExcitationPool,
                 initial_state: StateVector | None = None):
        self.reference = reference
        self.pool = pool
        self.layers: list[dict[int, float]] = []
        start = initial_state.copy() if initial_state is not None else from_determinant(reference, pool.n_qubits)
        self._prefix: list[np.ndarray] = [start.amps]

    @property
    def encoding(self) -> str:
        return self.pool.encoding

    @property
    def term_count(self) -> int:
        return sum(len(layer) for layer in self.layers)

    def copy(self) -> "Ansatz":
        out = Ansatz.__new__(Ansatz)
        out.reference = self.reference
        out.pool = self.pool
        out.layers = [dict(layer) for layer in self.layers]
        out._prefix = list(self._prefix)
        return out

    def _invalidate(self, layer: int):
        del self._prefix[layer + 1:]

    def __repr__(self):
        return f"Ansatz(layers={len(self.layers)}, terms={self.term_count}, encoding={self.encoding!r})"


def merge_window(ansatz: Ansatz, p_depth: int) -> dict[int, int]:
    """Map pool element -> layer index for elements in the last ``p_depth`` layers."""
    where: dict[int, int] = {}
    start = max(0, len(ansatz.layers) - p_depth) if p_depth > 0 else len(ansatz.layers)
    for l in range(start, len(ansatz.layers)):
        for e in ansatz.layers[l]:
            if e in where:
                raise RuntimeError(f"pool element {e} appears in layers {where[e]} and {l} of the merge window")
            where[e] = l
    return where


def sparsify(step: np.ndarray, grad: np.ndarray, cfg: SparsifierConfig, merge_set=()) -> np.ndarray:
    """Truncate a pool-aligned step by a fraction-of-maximum score threshold.

    Scores are ``|step|`` (``abs``) or ``max(0, -grad*step)`` (``descent``).
    An element survives if its score is at least ``c`` times the largest
    score; at ``c == 1`` only the first maximal element survives.  With
    ``include`` set, nonzero entries of elements in ``merge_set`` always
    survive.  An all-zero score vector yields an all-zero step.
    """
    step = np.asarray(step, dtype=float)
    grad = np.asarray(grad, dtype=float)
    if cfg.criterion == "abs":
        score = np.abs(step)
    else:
        score = np.maximum(0.0, -grad * step)
    out = np.zeros_like(step)
    top = float(score.max()) if score.size else 0.0
    if top <= 0.0:
        return out
    if cfg.c >= 1.0:
        keep = np.zeros(step.shape, dtype=bool)
        keep[int(np.argmax(score))] = True
    else:
        keep = (score >= cfg.c * top) & (score > 0.0)
    if cfg.include:
        for e in merge_set:
            if step[e] != 0.0:
                keep[e] = True
    out[keep] = step[keep]
    return out


def append_step(ansatz: Ansatz, step, p_depth: int) -> MergeReport:
    """Add a sparse step to the ansatz, merging into the last ``p_depth`` layers.

    ``step`` is a pool-aligned array or a ``{element: value}`` map.  Elements
    already present in the merge window have their coefficient updated in
    place; the rest form one new layer (none if empty).
    """
    if isinstance(step, dict):
        items = sorted((int(e), float(v)) for e, v in step.items() if v != 0.0)
    else:
        step = np.asarray(step, dtype=float)
        items = [(int(e), float(step[e])) for e in np.flatnonzero(step)]
    where = merge_window(ansatz, p_depth)
    report = MergeReport()
    fresh: dict[int, float] = {}
    first_touched = len(ansatz.layers)
    for e, val in items:
        if e in where:
            l = where[e]
            layer = ansatz.layers[l]
            new = layer[e] + val
            if abs(new) < ZERO_TOL:
                del layer[e]
            else:
                layer[e] = new
            report.merged.append(e)
            first_touched = min(first_touched, l)
        else:
            fresh[e] = val
            report.appended.append(e)
    ansatz._invalidate(first_touched)
    # a merge may have emptied a window layer; drop it so layer counts stay honest
    for l in range(len(ansatz.layers) - 1, first_touched - 1, -1):
        if not ansatz.layers[l]:
            del ansatz.layers[l]
    if fresh:
        ansatz.layers.append(fresh)
    return report


def prepare_state(ansatz: Ansatz) -> StateVector:
    """Apply the layers to the reference state; only uncached layers are recomputed."""
    prefix = ansatz._prefix
    amps = prefix[-1]
    for l in range(len(prefix) - 1, len(ansatz.layers)):
        layer = ansatz.layers[l]
        for e in sorted(layer):
            amps = ansatz.pool.kernel(e).apply(layer[e], amps)
        prefix.append(amps)
    return StateVector(ansatz.pool.n_qubits, amps.copy())


def element_cnots(pool: ExcitationPool, e: int) -> int:
    """Staircase cost: ``2 (weight - 1)`` CNOTs per Pauli-string exponential."""
    return pool.cnots(e)


def layer_cnots(pool: ExcitationPool, layer) -> int:
    return sum(element_cnots(pool, e) for e in layer)


def cnot_count(ansatz: Ansatz) -> int:
    return sum(layer_cnots(ansatz.pool, layer) for layer in ansatz.layers)


def cost_report(ansatz: Ansatz, previous_cumulative: int = 0) -> CostReport:
    """Cost after one more iteration: the current circuit is added to the running total."""
    circuit = cnot_count(ansatz)
    return CostReport(circuit, previous_cumulative + circuit, len(ansatz.layers), ansatz.term_count)


def dumps_ansatz(ansatz: Ansatz) -> str:
    """One line per layer, entries ``i,k,j,l,sector:coefficient``."""
    occ = ",".join(str(q) for q in ansatz.reference.occupied)
    lines = [f"# norb={ansatz.pool.norb} encoding={ansatz.encoding} reference={occ}"]
    for layer in ansatz.layers:
        lines.append(" ".join(f"{ansatz.pool.elements[e]}:{float(layer[e])!r}" for e in sorted(layer)))
    return "\n".join(lines) + "\n"


def loads_ansatz(text: str, reference: ReferenceDeterminant | None = None,
                 pool: ExcitationPool | None = None) -> Ansatz:
    layers = []
    meta: dict[str, str] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            for tok in line[1:].split():
                key, _, val = tok.partition("=")
                meta[key] = val
            continue
        layer = {}
        for entry in line.split():
            label, _, coeff = entry.rpartition(":")
            i, k, j, l, sector = label.split(",")
            layer[(int(i), int(k), int(j), int(l), sector)] = float(coeff)
        layers.append(layer)
    if pool is None:
        pool = build_pool(int(meta["norb"]), meta.get("encoding", "fermionic"))
    if reference is None:
        occ = tuple(int(q) for q in meta["reference"].split(",") if q)
        reference = ReferenceDeterminant(occ, norb=pool.norb)
    ansatz = Ansatz(reference, pool)
    ansatz.layers = [{pool.index(Excitation(*key)): val for key, val in layer.items()} for layer in layers]
    return ansatz
