"""Simulated contracted quantum eigensolver for small molecular Hamiltonians."""

from .ansatz import Ansatz, SparsifierConfig, append_step, cnot_count, prepare_state, sparsify
from .fcidump import MolecularIntegrals, ReferenceDeterminant, parse_fcidump, read_fcidump, reference_determinant
from .optimize import ConvergenceTrace, CQEProblem, OptimizerConfig, run_cqe
from .oracle import SectorSpec, fci_ground_state
from .pauli import PauliSum, excitation_generator, hamiltonian_to_pauli
from .residual import ExcitationPool, build_pool, measure_rdms, residual_vector
from .statevector import StateVector

__version__ = "0.1.0"

__all__ = [
    "Ansatz", "SparsifierConfig", "append_step", "cnot_count", "prepare_state", "sparsify",
    "MolecularIntegrals", "ReferenceDeterminant", "parse_fcidump", "read_fcidump", "reference_determinant",
    "ConvergenceTrace", "CQEProblem", "OptimizerConfig", "run_cqe",
    "SectorSpec", "fci_ground_state",
    "PauliSum", "excitation_generator", "hamiltonian_to_pauli",
    "ExcitationPool", "build_pool", "measure_rdms", "residual_vector",
    "StateVector",
]
