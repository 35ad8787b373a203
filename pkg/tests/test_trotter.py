import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.linalg import expm

from conftest import random_unitary
from tsqpde.model import hamiltonian_matrix
from tsqpde.trotter import (TrotterSpec, build_exact_reference_mpo, build_trotter_mpo, fuse_factors, trotter_dense)


def _op_norm(a):
    return np.linalg.norm(a, 2)


def test_reference_matches_exponential(hubbard2):
    h = hamiltonian_matrix(hubbard2, 4)
    ref = build_exact_reference_mpo(hubbard2, 0.05, n=4).to_dense()
    np.testing.assert_allclose(ref, expm(-1j * 0.05 * h), atol=1e-6)
    assert np.linalg.norm(ref.conj().T @ ref - np.eye(16)) <= 1e-8


def test_mpo_matches_dense_trotter(hubbard2):
    for sign in ("forward", "reverse"):
        mpo = build_trotter_mpo(hubbard2, TrotterSpec(0.1, 7, sign), n=4).to_dense()
        np.testing.assert_allclose(mpo, trotter_dense(hubbard2, 0.1, 7, sign, 4), atol=1e-11)


def test_reverse_is_adjoint(hubbard2):
    f = trotter_dense(hubbard2, 0.2, 3, "forward", 4)
    r = trotter_dense(hubbard2, 0.2, 3, "reverse", 4)
    np.testing.assert_allclose(r, f.conj().T, atol=1e-13)


def test_second_order_ratio(hubbard2):
    h = hamiltonian_matrix(hubbard2, 4)
    exact = expm(-1j * 0.1 * h)
    for m in (1, 2, 4):
        e1 = _op_norm(trotter_dense(hubbard2, 0.1, m, n=4) - exact)
        e2 = _op_norm(trotter_dense(hubbard2, 0.1, 2 * m, n=4) - exact)
        assert 3.2 <= e1 / e2 <= 4.8


def test_zero_step_is_identity(hubbard2):
    np.testing.assert_allclose(build_trotter_mpo(hubbard2, TrotterSpec(0.0), n=4).to_dense(), np.eye(16))


def test_spec_validation():
    with pytest.raises(ValueError):
        TrotterSpec(0.1, slices=0)
    with pytest.raises(ValueError):
        TrotterSpec(0.1, sign="backward")
    with pytest.raises(ValueError):
        TrotterSpec(float("inf"))


@given(st.integers(0, 10_000), st.integers(1, 3))
def test_fusion_preserves_product(seed, max_span):
    r = np.random.default_rng(seed)
    n = 5
    factors = []
    for _ in range(6):
        k = int(r.integers(1, 3))
        q = int(r.integers(0, n - k + 1))
        factors.append((q, random_unitary(r, 2 ** k)))

    def dense(seq):
        out = np.eye(2 ** n, dtype=complex)
        for q, g in seq:
            k = int(round(np.log2(g.shape[0])))
            out = np.kron(np.kron(np.eye(2 ** q), g), np.eye(2 ** (n - q - k))) @ out
        return out

    fused = fuse_factors(factors, max(max_span, 2))
    assert len(fused) <= len(factors)
    np.testing.assert_allclose(dense(fused), dense(factors), atol=1e-12)
