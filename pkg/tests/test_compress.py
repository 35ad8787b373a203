import numpy as np
import pytest
from sklearn.base import clone

from conftest import random_state, random_unitary
from tsqpde.circuits import init_brickwall
from tsqpde.compress import (BrickWallCompressor, enhance_overlap, environment_gate, optimize_evolution,
                             optimize_prep, polar_update, prep_operator, trace_objective)
from tsqpde.exceptions import ResourceError
from tsqpde.mps import MPO, MPS, circuit_to_mps, inner
from tsqpde.tensor_core import polar_unitary
from tsqpde.trotter import build_exact_reference_mpo


def _frob(v, circ):
    return np.linalg.norm(v - circ.to_dense()) ** 2


@pytest.fixture(scope="module")
def ref2(hubbard2):
    return build_exact_reference_mpo(hubbard2, 0.05, n=4)


def test_trace_objective_matches_dense(rng):
    v = random_unitary(rng, 16)
    circ = init_brickwall(4, 3, perturbation=0.8, seed=5)
    val = trace_objective(MPO.from_dense(v).dagger(), circ)
    assert val == pytest.approx(np.trace(v.conj().T @ circ.to_dense()), abs=1e-10)


@pytest.mark.parametrize("position", [(0, 0), (1, 1), (2, 2), (3, 1)])
def test_environment_is_linear_coefficient(rng, position):
    v = random_unitary(rng, 32)
    circ = init_brickwall(5, 4, perturbation=0.8, seed=11)
    env = environment_gate(MPO.from_dense(v), circ, position)
    g = circ.gate(*position)
    tr = np.trace(v.conj().T @ circ.to_dense())
    assert np.sum(env.conj() * g) == pytest.approx(tr, abs=1e-10)
    # replacing the gate by an arbitrary matrix stays linear
    other = circ.copy()
    x = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    other.set_gate(*position, x)
    assert np.sum(env.conj() * x) == pytest.approx(np.trace(v.conj().T @ other.to_dense()), abs=1e-10)


def test_environment_of_single_gate_is_target(rng):
    v = random_unitary(rng, 4)
    circ = init_brickwall(2, 1, perturbation=0.3, seed=0)
    np.testing.assert_allclose(environment_gate(MPO.from_dense(v), circ, (0, 0)), v, atol=1e-12)
    with pytest.raises(ValueError):
        environment_gate(MPO.from_dense(v), circ, (0, 1))


def test_polar_substitution_never_increases_objective():
    rng = np.random.default_rng(99)
    for _ in range(100):
        v = random_unitary(rng, 8)
        circ = init_brickwall(3, 3, perturbation=1.0, seed=int(rng.integers(1 << 30)))
        k = int(rng.integers(0, 3))
        q = circ.pairs(k)[int(rng.integers(0, len(circ.pairs(k))))]
        before = _frob(v, circ)
        env = environment_gate(MPO.from_dense(v), circ, (k, q))
        circ.set_gate(k, q, polar_unitary(env))
        assert _frob(v, circ) <= before + 1e-10


def test_polar_update_rank_deficient_completion():
    env = np.diag([1.0, 1.0, 0.0, 0.0]).astype(complex)
    old = np.eye(4)[:, [0, 1, 3, 2]].astype(complex)
    w = polar_update(env, old)
    np.testing.assert_allclose(w.conj().T @ w, np.eye(4), atol=1e-12)
    np.testing.assert_allclose(w[:2, :2], np.eye(2), atol=1e-12)
    np.testing.assert_allclose(w[2:, 2:], old[2:, 2:], atol=1e-12)


def test_evolution_fidelity_and_monotonicity(ref2):
    res = optimize_evolution(ref2, depth=5, sweeps=1000, seed=0, checkpoints=(1, 10))
    circ, reports = res
    v = ref2.to_dense()
    fid = abs(np.trace(v.conj().T @ circ.to_dense())) / 16
    assert fid >= 0.999
    assert reports[-1].overlap_or_fidelity == pytest.approx(fid, abs=1e-10)
    assert reports[-1].objective == pytest.approx(_frob(v, circ), abs=1e-8)
    assert sorted(res.checkpoints) == [1, 10]
    for rep in reports:
        for u in rep.updates:
            assert u.after >= u.before - 1e-10
    objs = [r.objective for r in reports]
    assert all(b <= a + 1e-10 for a, b in zip(objs, objs[1:]))


def test_evolution_width_mismatch(ref2):
    with pytest.raises(ValueError):
        optimize_evolution(ref2, 2, 1, init=init_brickwall(5, 2))


def test_prep_overlap_cross_check(rng):
    target = MPS.from_dense(random_state(rng, 5))
    circ, reports = optimize_prep(target, depth=3, sweeps=50, seed=1)
    out = circuit_to_mps(circ, MPS.zeros(5))
    assert inner(target, out).real == pytest.approx(reports[-1].overlap_or_fidelity, abs=1e-10)
    assert reports[-1].objective == pytest.approx(1 - reports[-1].overlap_or_fidelity, abs=1e-12)
    assert trace_objective(prep_operator(target), circ) == pytest.approx(inner(target, out), abs=1e-10)


def test_prep_exact_for_product_target():
    target = MPS.product_state([1, 0, 1, 1])
    _, reports = optimize_prep(target, depth=2, sweeps=20, seed=0)
    assert reports[-1].overlap_or_fidelity == pytest.approx(1.0, abs=1e-10)


def test_enhance_single_iteration_equals_prep(rng):
    target = MPS.from_dense(random_state(rng, 4))
    one = enhance_overlap(target, 2, 30, 1, cutoff=0.0, seed=3)
    circ, reports = optimize_prep(target, 2, 30, 0.0, seed=3)
    assert one.overlaps[0] == pytest.approx(reports[-1].overlap_or_fidelity, abs=1e-12)
    np.testing.assert_allclose(one.circuit.to_dense(), circ.to_dense(), atol=1e-14)


def test_enhance_telescoping_and_bond_budget(rng):
    target = MPS.from_dense(random_state(rng, 6))
    res = enhance_overlap(target, 2, 40, 3, cutoff=0.0, min_gain=-1.0, seed=0)
    composite = circuit_to_mps(res.circuit, MPS.zeros(6))
    assert inner(target, composite) == pytest.approx(res.residual_overlap, abs=1e-10)
    assert res.overlaps == sorted(res.overlaps)
    assert res.stop_reason == "max_iters"
    roomy = enhance_overlap(target, 2, 40, 3, cutoff=0.0, max_bond=8, min_gain=-1.0, seed=0)
    assert roomy.stop_reason == "max_iters"
    with pytest.raises(ResourceError):
        enhance_overlap(target, 2, 40, 3, cutoff=0.0, max_bond=1, seed=0)
    with pytest.raises(ValueError):
        enhance_overlap(target, 0, 1, 1)


def test_estimator_interface(ref2, rng):
    est = BrickWallCompressor(depth=3, sweeps=5, random_state=0)
    assert clone(est).get_params()["depth"] == 3
    est.fit(ref2)
    assert 0 < est.score(ref2) <= 1 + 1e-12
    assert est.n_wires_ == 4
    psi = MPS.from_dense(random_state(rng, 4))
    np.testing.assert_allclose(est.transform(psi).to_dense(), est.circuit_.to_dense() @ psi.to_dense(), atol=1e-12)
    with pytest.raises(TypeError):
        est.fit(psi)
    with pytest.raises(AttributeError):
        BrickWallCompressor().transform(psi)
    prep = BrickWallCompressor(depth=2, sweeps=10, mode="prep", random_state=0).fit(psi)
    assert prep.score(psi) == pytest.approx(prep.reports_[-1].overlap_or_fidelity, abs=1e-10)
