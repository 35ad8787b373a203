import itertools

import numpy as np
import pytest
from hypothesis import given, strategies as st

from tsqpde.exceptions import ResourceError
from tsqpde.model import (HubbardSpec, PauliTerm, build_hubbard, exact_eigs, hamiltonian_matrix, number_operator,
                          pauli_exp, pauli_string_matrix, select_target_states, simplify, sz_operator)

# 4-site, U=10 gap from an independent float64 diagonalization, frozen here.
REF_GAP_4 = 0.2536084068091604


def _annihilators(n_modes):
    """Jordan-Wigner annihilators built from Kronecker products, occupied = |1>."""
    z = np.diag([1.0, -1.0])
    lower = np.array([[0.0, 1.0], [0.0, 0.0]])
    out = []
    for j in range(n_modes):
        op = np.array([[1.0]])
        for k in range(n_modes):
            op = np.kron(op, z if k < j else lower if k == j else np.eye(2))
        out.append(op)
    return out


def _fermionic_hubbard(n_sites, t, u):
    a = _annihilators(2 * n_sites)
    dim = 4 ** n_sites
    h = np.zeros((dim, dim))
    for q in range(n_sites - 1):
        for s in (0, 1):
            i, k = 2 * q + s, 2 * (q + 1) + s
            h -= t * (a[k].T @ a[i] + a[i].T @ a[k])
    for q in range(n_sites):
        nu, nd = a[2 * q].T @ a[2 * q], a[2 * q + 1].T @ a[2 * q + 1]
        h += u * nu @ nd - u / 2 * (nu + nd)
    return h


@pytest.mark.parametrize("n_sites,u", [(2, 10.0), (3, 4.0), (2, 0.0), (3, -1.5)])
def test_matches_fermionic_oracle(n_sites, u):
    terms = build_hubbard(HubbardSpec(n_sites, 1.0, u))
    np.testing.assert_allclose(hamiltonian_matrix(terms, 2 * n_sites), _fermionic_hubbard(n_sites, 1.0, u), atol=1e-12)


def test_single_site_is_diagonal():
    h = hamiltonian_matrix(build_hubbard(HubbardSpec(1, 1.0, 10.0)), 2)
    np.testing.assert_allclose(h, np.diag([0.0, -5.0, -5.0, 0.0]), atol=1e-14)


def test_free_fermion_spectrum():
    # U = 0, two sites: single-particle levels -T and +T per spin
    h = hamiltonian_matrix(build_hubbard(HubbardSpec(2, 1.0, 0.0)), 4)
    levels = [-1.0, 1.0, -1.0, 1.0]
    expect = sorted(sum(c) for r in range(5) for c in itertools.combinations(levels, r))
    np.testing.assert_allclose(np.linalg.eigvalsh(h), expect, atol=1e-12)


def test_term_structure(hubbard4):
    hop = [t for t in hubbard4 if len(t.ops) == 3]
    assert len(hop) == 3 * 2 * 2
    assert all(t.coefficient == -0.5 and t.ops[1][1] == "Z" for t in hop)
    assert hop[0].label(8) == "XZXIIIII"
    zz = [t for t in hubbard4 if len(t.ops) == 2]
    assert all(t.coefficient == 2.5 for t in zz)
    assert not any(len(t.ops) == 1 for t in hubbard4)


@pytest.mark.parametrize("n_sites", [2, 3, 4])
def test_hermitian_and_symmetries(n_sites):
    n = 2 * n_sites
    h = hamiltonian_matrix(build_hubbard(HubbardSpec(n_sites, 1.0, 10.0)), n)
    np.testing.assert_allclose(h, h.conj().T, atol=1e-12)
    assert np.linalg.norm(h @ number_operator(n) - number_operator(n) @ h) < 1e-10
    assert np.linalg.norm(h @ sz_operator(n) - sz_operator(n) @ h) < 1e-10


def test_reference_gap(hubbard4):
    sol = exact_eigs(hubbard4, k=8)
    assert sol.gap == pytest.approx(REF_GAP_4, abs=1e-10)
    assert abs(sol.gap - 0.254) <= 1e-3
    assert np.all(np.diff(sol.energies) >= -1e-12)


def test_single_z_spectrum():
    sol = exact_eigs([PauliTerm(1.0, ((0, "Z"),))], k=2, n=1)
    np.testing.assert_allclose(sol.energies, [-1.0, 1.0])
    assert sol.gap == 2.0


def test_sparse_path_and_resource_limit():
    with pytest.raises(ResourceError):
        exact_eigs(build_hubbard(HubbardSpec(8, 1.0, 10.0)))
    # 13 qubits uses the sparse solver; sum_j (j+1) Z_j has ground -91 and gap 2
    terms = [PauliTerm(float(j + 1), ((j, "Z"),)) for j in range(13)]
    sol = exact_eigs(terms, k=2)
    assert sol.energies[0] == pytest.approx(-91.0, abs=1e-9)
    assert sol.gap == pytest.approx(2.0, abs=1e-9)


def test_target_states(hubbard4):
    g, e, sol = select_target_states(hubbard4)
    h = hamiltonian_matrix(hubbard4, 8)
    assert np.vdot(g, h @ g).real == pytest.approx(sol.energies[0], abs=1e-10)
    assert np.vdot(e, h @ e).real == pytest.approx(sol.energies[0] + REF_GAP_4, abs=1e-10)
    assert abs(np.vdot(g, e)) < 1e-10
    # half filling, S_z = 0 member of the excited multiplet
    assert np.vdot(e, number_operator(8) @ e).real == pytest.approx(4.0, abs=1e-10)
    assert np.vdot(e, sz_operator(8) @ e).real == pytest.approx(0.0, abs=1e-10)


def test_pauli_term_validation():
    assert PauliTerm(1.0, {2: "z", 0: "x", 1: "i"}).ops == ((0, "X"), (2, "Z"))
    with pytest.raises(ValueError):
        PauliTerm(1.0, ((0, "Q"),))
    with pytest.raises(ValueError):
        PauliTerm(float("nan"))
    with pytest.raises(ValueError):
        PauliTerm(1.0, ((0, "X"), (0, "Z")))
    with pytest.raises(ValueError):
        HubbardSpec(0)


def test_simplify_merges():
    out = simplify([PauliTerm(1.0, ((0, "Z"),)), PauliTerm(-1.0, ((0, "Z"),)), PauliTerm(2.0)])
    assert out == [PauliTerm(2.0)]


@given(st.lists(st.sampled_from("IXYZ"), min_size=1, max_size=4), st.floats(-2, 2))
def test_pauli_exp_matches_expm(labels, angle):
    from scipy.linalg import expm

    term = PauliTerm(0.7, tuple(enumerate(labels)))
    lo, mat = pauli_exp(term, angle)
    if term.is_identity:
        assert lo is None
        assert mat[0, 0] == pytest.approx(np.exp(0.7j * angle))
        return
    hi = term.support[-1]
    shifted = PauliTerm(0.7, tuple((q - lo, p) for q, p in term.ops))
    dense = pauli_string_matrix(shifted, hi - lo + 1).toarray()
    np.testing.assert_allclose(mat, expm(1j * angle * dense), atol=1e-12)
