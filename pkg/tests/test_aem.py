import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from conftest import random_state
from tsqpde.aem import (L1_BOUND, AemWeights, MLTables, VariantSet, aem_objective, compute_M_L, mitigated_series,
                        sandwich_overlaps, solve_weights)
from tsqpde.circuits import init_brickwall
from tsqpde.exceptions import AlignmentError, ShapeError
from tsqpde.mps import MPO, MPS


@pytest.fixture(scope="module")
def setup():
    rng = np.random.default_rng(8)
    n = 3
    prep = random_state(rng, n + 1)
    h = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    h = (h + h.conj().T) / 2
    dt = 0.1
    exact_fwd = expm(-1j * dt * h)
    variants = [init_brickwall(n, 3, perturbation=0.3, seed=s) for s in (1, 2, 3)]
    return prep, h, dt, exact_fwd, variants


def _dense_overlap(prep, a, b, steps):
    op = np.kron(np.eye(2), np.linalg.matrix_power(a, steps) @ np.linalg.matrix_power(b, steps))
    return np.vdot(prep, op @ prep)


def test_sandwich_matches_dense(setup):
    prep, _, _, _, variants = setup
    u, v = variants[0], variants[1]
    res = sandwich_overlaps(MPS.from_dense(prep), u, v, steps=4, cutoff=0.0)
    for k, val in enumerate(res.values, start=1):
        expect = _dense_overlap(prep, u.to_dense().conj().T, v.to_dense(), k)
        assert val == pytest.approx(expect, abs=1e-12)
    assert res.stop_step is None


def test_sandwich_with_mpo_left(setup):
    prep, _, _, exact_fwd, variants = setup
    left = MPO.from_dense(exact_fwd.conj().T)
    res = sandwich_overlaps(MPS.from_dense(prep), left, variants[2], steps=3, cutoff=0.0)
    for k, val in enumerate(res.values, start=1):
        assert val == pytest.approx(_dense_overlap(prep, exact_fwd.conj().T, variants[2].to_dense(), k), abs=1e-12)


def test_sandwich_bond_budget(setup):
    prep, _, _, _, variants = setup
    res = sandwich_overlaps(MPS.from_dense(prep), variants[0], variants[1], steps=5, bond_budget=1)
    assert res.stop_step == 1
    assert res.values == []


def test_same_variant_chain_stays_trivial(setup):
    prep, _, _, _, variants = setup
    res = sandwich_overlaps(MPS.from_dense(prep), variants[0], variants[0], steps=6, cutoff=1e-12)
    assert max(res.max_bonds) == 1
    np.testing.assert_allclose(res.values, 1.0, atol=1e-10)


def test_M_and_L_tables(setup, tmp_path):
    prep, _, _, exact_fwd, variants = setup
    vs = VariantSet(["a", "b", "c"], variants)
    ref = MPO.from_dense(exact_fwd.conj().T)
    tab = compute_M_L(MPS.from_dense(prep), vs, ref, steps=3, cutoff=0.0)
    assert tab.M.shape == (3, 3, 3) and tab.L.shape == (3, 3)
    for s in range(3):
        for i, j in itertools.product(range(3), repeat=2):
            ov = _dense_overlap(prep, variants[i].to_dense().conj().T, variants[j].to_dense(), s + 1)
            assert tab.M[s, i, j] == pytest.approx(abs(ov) ** 2, abs=1e-12)
        for i in range(3):
            ov = _dense_overlap(prep, exact_fwd.conj().T, variants[i].to_dense(), s + 1)
            assert tab.L[s, i] == pytest.approx(abs(ov) ** 2, abs=1e-12)
    np.testing.assert_allclose(np.diagonal(tab.M, axis1=1, axis2=2), 1.0, atol=1e-12)
    tab.write(tmp_path / "ml.tsv")
    header = (tmp_path / "ml.tsv").read_text().splitlines()[0].split("\t")
    assert header == ["step", "M_00", "M_01", "M_02", "M_11", "M_12", "M_22", "L_0", "L_1", "L_2"]
    tab.write_bonds(tmp_path / "bonds.tsv")
    assert (tmp_path / "bonds.tsv").read_text().startswith("step\t")


def test_variant_set_validation(setup):
    _, _, _, _, variants = setup
    with pytest.raises(ValueError):
        VariantSet(["a"], variants[:1])
    with pytest.raises(ShapeError):
        VariantSet(["a", "b"], [variants[0], init_brickwall(4, 1)])
    with pytest.raises(ShapeError):
        VariantSet(["a"], variants[:2])
    with pytest.raises(ValueError):
        VariantSet(["a", "b"], variants[:2], kind="depth")


def _grid_min(M, L, bound=L1_BOUND, h=0.01):
    grid = np.arange(-3, 3 + h / 2, h)
    c0, c1 = np.meshgrid(grid, grid)
    c = np.stack([c0.ravel(), c1.ravel(), 1 - c0.ravel() - c1.ravel()], axis=1)
    c = c[np.abs(c).sum(axis=1) <= bound + 1e-12]
    vals = 1 + np.einsum("ki,ij,kj->k", c, M, c) - 2 * c @ L
    return vals.min()


@settings(max_examples=15)
@given(st.integers(0, 100_000))
def test_solver_beats_grid_search(seed):
    r = np.random.default_rng(seed)
    a = r.standard_normal((3, 3))
    M = a @ a.T + 0.1 * np.eye(3)
    L = r.uniform(-1, 2, 3)
    w = solve_weights(M, L)
    assert w.c.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.sum(np.abs(w.c)) <= L1_BOUND + 1e-9
    assert w.objective <= _grid_min(M, L) + 1e-9


def test_solver_simple_cases():
    # identical variants: any feasible split is optimal, objective 1 + 1 - 2L
    w = solve_weights(np.ones((2, 2)), np.array([0.9, 0.9]))
    assert w.objective == pytest.approx(0.2, abs=1e-8)
    assert w.ridge
    # a variant that matches the exact state gets all the weight
    w = solve_weights(np.array([[1.0, 0.5], [0.5, 1.0]]), np.array([1.0, 0.5]))
    np.testing.assert_allclose(w.c, [1.0, 0.0], atol=1e-9)
    assert isinstance(w, AemWeights)
    with pytest.raises(ShapeError):
        solve_weights(np.eye(3), np.ones(2))


def test_active_l1_bound():
    M = np.array([[1.0, 0.999], [0.999, 1.0]])
    L = np.array([0.5, 0.99])
    w = solve_weights(M, L, l1_bound=3.0)
    assert w.active_l1
    assert np.sum(np.abs(w.c)) == pytest.approx(3.0, abs=1e-9)


def test_mitigated_series_combination():
    a0sq = 0.5
    steps = 4
    meas = [np.tile([0.9, 0.5, 0.1, 0.5], (steps, 1)), np.tile([0.7, 0.6, 0.3, 0.4], (steps, 1))]
    weights = [np.array([0.25, 0.75])] * steps
    ts = mitigated_series(weights, meas, 0.1, a0sq)
    m = 0.25 * meas[0][0] + 0.75 * meas[1][0]
    expect = complex(m[0] - m[2], -(m[1] - m[3]))
    np.testing.assert_allclose(ts.values, expect, atol=1e-14)
    np.testing.assert_array_equal(ts.steps, [1, 2, 3, 4])
    short = mitigated_series(weights[:2], meas, 0.1, a0sq)
    assert len(short) == 2
    with pytest.raises(AlignmentError):
        mitigated_series(weights, [meas[0], meas[1][:2]], 0.1, a0sq)
    with pytest.raises(AlignmentError):
        mitigated_series([np.ones(3)] * 4, meas, 0.1, a0sq)
    with pytest.raises(AlignmentError):
        mitigated_series(weights, [], 0.1, a0sq)
