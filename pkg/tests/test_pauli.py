import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cqe.fcidump import MolecularIntegrals, reference_determinant
from cqe.oracle import determinant_energy
from cqe.pauli import (
    PauliSum,
    PauliTerm,
    excitation_generator,
    hamiltonian_to_pauli,
    jw_ladder,
    number_operator,
    qubit_ladder,
    sz_operator,
)


def dense_creation(q, n, chain=True):
    """Creation operator built directly on occupation bitstrings."""
    dim = 1 << n
    mat = np.zeros((dim, dim))
    for b in range(dim):
        if not (b >> q) & 1:
            sign = (-1) ** bin(b & ((1 << q) - 1)).count("1") if chain else 1
            mat[b | (1 << q), b] = sign
    return mat


def dense_generator(i, k, j, l, n, chain=True):
    cd = [dense_creation(q, n, chain) for q in range(n)]
    gamma = cd[i] @ cd[k] @ cd[l].T @ cd[j].T
    return gamma - gamma.T


labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def random_sum(rng, n, count=6):
    terms = [(complex(*rng.normal(size=2)), "".join(rng.choice(list("IXYZ"), n))) for _ in range(count)]
    return PauliSum.from_terms(terms)


class TestAlgebra:
    def test_label_round_trip_and_rendering(self):
        p = PauliSum.from_label("XIZY", 0.5)
        assert p.coefficient("XIZY") == 0.5
        assert str(p) == "0.5 * XIZY"
        assert str(PauliSum.from_label("XY", -0.125j)) == "(0-0.125j) * XY"
        assert p.terms[0].weight == 3

    def test_single_qubit_products(self):
        x, y, z = (PauliSum.from_label(c) for c in "XYZ")
        assert (x * y).allclose(1j * z)
        assert (y * z).allclose(1j * x)
        assert (z * x).allclose(1j * y)
        assert (y * y).allclose(PauliSum.identity(1))

    @settings(max_examples=60, deadline=None)
    @given(a=labels, b=labels)
    def test_product_matches_matrices(self, a, b):
        if len(a) != len(b):
            return
        pa, pb = PauliSum.from_label(a), PauliSum.from_label(b)
        assert np.allclose((pa * pb).to_matrix(), pa.to_matrix() @ pb.to_matrix())

    def test_sum_and_scalars_match_matrices(self, rng):
        a, b = random_sum(rng, 3), random_sum(rng, 3)
        assert np.allclose((a + 2 * b - a / 4).to_matrix(), 0.75 * a.to_matrix() + 2 * b.to_matrix())
        assert np.allclose(a.adjoint().to_matrix(), a.to_matrix().conj().T)
        assert np.allclose(a.to_sparse().toarray(), a.to_matrix())

    def test_simplify_idempotent_and_linear(self, rng):
        a, b = random_sum(rng, 3, 10), random_sum(rng, 3, 10)
        once = (a + b).simplify()
        assert once.simplify().items() == once.items()
        assert once.allclose((a.simplify() + b.simplify()).simplify(), tol=1e-15)

    def test_simplify_drops_tiny_terms(self):
        p = PauliSum.from_terms([(1e-15, "X"), (1.0, "Z")]).simplify()
        assert len(p) == 1 and p.coefficient("X") == 0

    def test_iteration_order_is_lexicographic(self, rng):
        p = random_sum(rng, 3, 12)
        labels_out = [str(t).split(" * ")[1] for t in p]
        ranks = {"I": 0, "X": 1, "Y": 2, "Z": 3}
        keys = [[ranks[c] for c in lab[::-1]] for lab in labels_out]
        assert keys == sorted(keys, key=lambda k: sum(v << (2 * q) for q, v in enumerate(k)))

    def test_hermiticity_flags(self):
        assert PauliSum.from_label("XY", 2.0).is_hermitian()
        assert PauliSum.from_label("XY", 2.0j).is_antihermitian()
        assert not PauliSum.from_label("XY", 1 + 1j).is_hermitian()

    def test_size_mismatch(self):
        with pytest.raises(ValueError):
            PauliSum.from_label("X") + PauliSum.from_label("XX")


class TestLadders:
    def test_creation_single_qubit(self):
        a = jw_ladder(0, "creation", 1)
        assert a.allclose(PauliSum.from_terms([(0.5, "X"), (-0.5j, "Y")]))

    def test_number_operator_identity(self):
        n0 = (jw_ladder(0, "creation", 1) * jw_ladder(0, "annihilation", 1)).simplify()
        assert n0.allclose(PauliSum.from_terms([(0.5, "I"), (-0.5, "Z")]))

    @pytest.mark.parametrize("q", range(4))
    def test_matches_bitstring_construction(self, q):
        assert np.allclose(jw_ladder(q, "creation", 4).to_matrix(), dense_creation(q, 4))
        assert np.allclose(jw_ladder(q, "annihilation", 4).to_matrix(), dense_creation(q, 4).T)
        assert np.allclose(qubit_ladder(q, "creation", 4).to_matrix(), dense_creation(q, 4, chain=False))

    @pytest.mark.parametrize("p, q", list(itertools.product(range(4), repeat=2)))
    def test_anticommutators(self, p, q):
        ap, aq_dag = jw_ladder(p, "annihilation", 4), jw_ladder(q, "creation", 4)
        anti = (ap * aq_dag + aq_dag * ap).simplify()
        expected = PauliSum.identity(4) if p == q else PauliSum.zero(4)
        assert anti.allclose(expected)
        cp, cq = jw_ladder(p, "creation", 4), jw_ladder(q, "creation", 4)
        assert (cp * cq + cq * cp).simplify().is_zero()

    def test_bad_index(self):
        with pytest.raises(ValueError):
            jw_ladder(4, "creation", 4)
        with pytest.raises(ValueError):
            jw_ladder(0, "raise", 4)


class TestGenerator:
    def test_adjacent_quadruple(self):
        g = excitation_generator(2, 3, 0, 1, "fermionic", 4)
        assert len(g) == 8
        for t in g:
            assert t.weight == 4
            assert t.coeff.real == 0 and abs(t.coeff.imag) == pytest.approx(1 / 8)
        assert np.allclose(g.to_matrix(), dense_generator(2, 3, 0, 1, 4))

    def test_unencoded_has_no_chain(self):
        g = excitation_generator(2, 7, 0, 4, "unencoded", 8)
        assert len(g) == 8
        support = 0
        for t in g:
            x, z = t.masks
            support |= x | z
            assert t.weight == 4
        assert support == (1 << 0) | (1 << 2) | (1 << 4) | (1 << 7)
        assert np.allclose(g.to_matrix(), dense_generator(2, 7, 0, 4, 8, chain=False))

    def test_local_patterns_shared_between_encodings(self):
        fer = excitation_generator(2, 7, 0, 4, "fermionic", 8)
        une = excitation_generator(2, 7, 0, 4, "unencoded", 8)
        touched = (1 << 0) | (1 << 2) | (1 << 4) | (1 << 7)
        local_f = sorted(((x & touched, z & touched) for (x, z), _ in fer.items()))
        local_u = sorted(((x, z) for (x, z), _ in une.items()))
        assert local_f == local_u

    @pytest.mark.parametrize("encoding", ["fermionic", "unencoded"])
    @pytest.mark.parametrize("quad", [(0, 1, 2, 3), (0, 3, 1, 2), (1, 5, 0, 4), (0, 2, 1, 2), (2, 5, 0, 3)])
    def test_matches_dense_and_is_antihermitian(self, quad, encoding):
        g = excitation_generator(*quad, encoding, 6)
        assert np.allclose(g.to_matrix(), dense_generator(*quad, 6, chain=encoding == "fermionic"))
        assert (g + g.adjoint()).simplify().is_zero()
        assert g.is_antihermitian()

    @pytest.mark.parametrize("quad", [(0, 1, 2, 3), (1, 5, 0, 4), (0, 2, 1, 2)])
    def test_terms_commute(self, quad):
        g = excitation_generator(*quad, "fermionic", 6)
        mats = [PauliSum(6, {k: 1.0}).to_matrix() for k, _ in g.items()]
        for a, b in itertools.combinations(mats, 2):
            assert np.allclose(a @ b, b @ a)

    @pytest.mark.parametrize("quad", [(1, 0, 2, 3), (0, 1, 0, 1), (0, 1, 2, 9), (0, 0, 1, 2)])
    def test_malformed_quadruple(self, quad):
        with pytest.raises(ValueError):
            excitation_generator(*quad, "fermionic", 4)

    def test_unknown_encoding(self):
        with pytest.raises(ValueError):
            excitation_generator(0, 1, 2, 3, "parity", 4)


def _constant_ints(norb=2, e_core=0.5):
    return MolecularIntegrals(norb, 2, 0, e_core, np.zeros((norb, norb)), np.zeros((norb,) * 4))


class TestHamiltonian:
    def test_constant_only(self):
        assert hamiltonian_to_pauli(_constant_ints()).allclose(PauliSum.identity(4, 0.5))

    def test_h2_spectrum(self, h2, refs):
        ham = hamiltonian_to_pauli(h2)
        assert ham.is_hermitian()
        assert np.linalg.eigvalsh(ham.to_matrix())[0] == pytest.approx(refs["h2_0.7414"]["e_fci"], abs=1e-10)

    def test_hartree_fock_expectation(self, h4, refs):
        ham = hamiltonian_to_pauli(h4)
        det = reference_determinant(h4)
        diag = ham.to_sparse().diagonal()[det.bitstring].real
        assert diag == pytest.approx(determinant_energy(h4, det), abs=1e-10)
        assert diag == pytest.approx(refs["h4_1.0"]["e_hf"], abs=1e-10)

    def test_conserves_number_and_spin(self, h4):
        ham = hamiltonian_to_pauli(h4).to_matrix()
        for op in (number_operator(8), sz_operator(4)):
            m = op.to_matrix()
            assert np.abs(ham @ m - m @ ham).max() < 1e-12

    def test_matches_second_quantized_dense(self, h2):
        n = h2.n_qubits
        h_so, v_so = h2.spin_orbital_integrals()
        cd = [dense_creation(q, n) for q in range(n)]
        dense = h2.e_core * np.eye(1 << n)
        for p, q in itertools.product(range(n), repeat=2):
            dense += h_so[p, q] * cd[p] @ cd[q].T
        for p, q, r, s in itertools.product(range(n), repeat=4):
            if v_so[p, q, r, s]:
                dense += 0.5 * v_so[p, q, r, s] * cd[p] @ cd[r] @ cd[s].T @ cd[q].T
        assert np.allclose(hamiltonian_to_pauli(h2).to_matrix(), dense, atol=1e-12)


def test_pauli_term_dataclass():
    t = PauliTerm(1.0, "XZ")
    assert t.n == 2 and t.weight == 2
