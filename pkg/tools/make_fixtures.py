"""Regenerate the FCIDUMP fixtures under tests/data.

Requires pyscf (not a runtime dependency of the package). Linear hydrogen
chains in STO-3G with canonical RHF (closed shell) or ROHF (open shell)
orbitals. Reference FCI energies from pyscf are written next to the dumps
so the tests can cross-check the in-repo FCI oracle against them.
"""

import json
import pathlib

import numpy as np
from pyscf import ao2mo, fci, gto, scf
from pyscf.tools import fcidump

OUT = pathlib.Path(__file__).resolve().parents[1] / "tests" / "data"


def chain(n_atoms, d):
    return [("H", (0.0, 0.0, i * d)) for i in range(n_atoms)]


def run(n_atoms, d):
    spin = n_atoms % 2
    mol = gto.M(atom=chain(n_atoms, d), basis="sto-3g", spin=spin, unit="Angstrom", verbose=0)
    mf = (scf.ROHF(mol) if spin else scf.RHF(mol)).run(conv_tol=1e-12)
    c = mf.mo_coeff
    h1 = c.T @ mf.get_hcore() @ c
    eri = ao2mo.restore(8, ao2mo.kernel(mol, c), c.shape[1])
    nelec = (mol.nelectron + spin) // 2, (mol.nelectron - spin) // 2
    cis = fci.direct_spin1.FCI()
    cis.conv_tol = 1e-13
    e_fci, _ = cis.kernel(h1, ao2mo.restore(1, eri, c.shape[1]), c.shape[1], nelec, ecore=mol.energy_nuc())
    return mol, mf, h1, eri, float(e_fci)


def h5_equilibrium():
    grid = np.arange(0.80, 1.101, 0.01)
    energies = [run(5, d)[4] for d in grid]
    return float(round(grid[int(np.argmin(energies))], 2))


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    d_eq = h5_equilibrium()
    cases = {
        "h2_0.7414": (2, 0.7414),
        "h4_1.0": (4, 1.0),
        "h4_1.5": (4, 1.5),
        "h4_2.0": (4, 2.0),
        "h5_eq": (5, d_eq),
        "h5_eq+0.5": (5, round(d_eq + 0.5, 2)),
        "h6_1.0": (6, 1.0),
    }
    ref = {}
    for name, (n_atoms, d) in cases.items():
        mol, mf, h1, eri, e_fci = run(n_atoms, d)
        norb = h1.shape[0]
        fcidump.from_integrals(
            str(OUT / f"{name}.fcidump"), h1, eri, norb, mol.nelectron,
            nuc=mol.energy_nuc(), ms=mol.spin, tol=1e-14,
        )
        ref[name] = {"atoms": n_atoms, "distance": d, "e_hf": float(mf.e_tot), "e_fci": e_fci}
        print(name, d, mf.e_tot, e_fci)
    (OUT / "reference_energies.json").write_text(json.dumps(ref, indent=2) + "\n")


if __name__ == "__main__":
    main()
