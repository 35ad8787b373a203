"""Brick-wall circuit compression by sweeping local polar updates.

The objective is ``f = Re Tr[R U]`` where ``U`` is the circuit unitary and
``R`` an MPO on the same wires:

* evolution: ``R = V^dagger`` for a target unitary ``V``; maximizing ``f``
  minimizes ``||V - U||_F^2 = 2 * 2^n - 2 f``;
* preparation: ``R = |0><psi|``, so ``f = Re <psi|U|0...0>``.

The trace network is contracted column by column.  Every gate is split by an
exact SVD into a half on each of its wires, so a column holds one site of
``R`` plus the gate halves touching that wire.  Left and right environments
are cached per sweep; the environment of one gate is the block of two
columns around it with the gate removed.  For ``f = sum(E * G)`` the locally
optimal unitary is the polar factor of ``conj(E)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator

from .circuits import BrickWallCircuit, init_brickwall
from .exceptions import PolarDegenerateError, ResourceError, ShapeError
from .mps import MPO, MPS, circuit_to_mps, inner
from .tensor_core import polar_unitary

__all__ = [
    "SweepReport",
    "UpdateRecord",
    "CompressionResult",
    "OverlapEnhancement",
    "environment_gate",
    "trace_objective",
    "prep_operator",
    "optimize_evolution",
    "optimize_prep",
    "enhance_overlap",
    "polar_update",
    "BrickWallCompressor",
    "init_brickwall",
]

log = logging.getLogger(__name__)

_LETTERS = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ"
_PATHS: dict = {}


def _einsum(operands: Sequence[tuple[np.ndarray, Sequence[int]]], out: Sequence[int]) -> np.ndarray:
    """einsum over integer labels with a per-signature contraction path cache."""
    letters: dict[int, str] = {}
    for _, labels in operands:
        for lab in labels:
            if lab not in letters:
                letters[lab] = _LETTERS[len(letters)]
    subs = ",".join("".join(letters[l] for l in labels) for _, labels in operands)
    subs += "->" + "".join(letters[l] for l in out)
    arrays = [t for t, _ in operands]
    key = (subs, tuple(a.shape for a in arrays))
    path = _PATHS.get(key)
    if path is None:
        path = np.einsum_path(subs, *arrays, optimize="greedy")[0]
        _PATHS[key] = path
    return np.einsum(subs, *arrays, optimize=path)


@dataclass(frozen=True)
class UpdateRecord:
    layer: int
    pair: int
    before: float  # Re Tr[R U] before the update
    after: float


@dataclass
class SweepReport:
    sweep_index: int
    objective: float
    overlap_or_fidelity: float
    updates: list[UpdateRecord] = field(default_factory=list, repr=False)


@dataclass
class CompressionResult:
    circuit: BrickWallCircuit
    reports: list[SweepReport]
    checkpoints: dict[int, BrickWallCircuit] = field(default_factory=dict)

    def __iter__(self):
        # allows ``circuit, reports = optimize_...(...)``
        return iter((self.circuit, self.reports))


def polar_update(env: np.ndarray, old: np.ndarray, rcond: float = 1e-12) -> np.ndarray:
    """Unitary ``W`` maximizing ``Re sum(env * W)``.

    Full-rank environments give ``polar(conj(env))``.  When ``conj(env)`` is
    rank deficient the maximizer is not unique; the null-space block is then
    filled with the unitary closest to the previous gate, so an update never
    moves a gate further than it needs to.
    """
    m = env.conj().reshape(4, 4)
    try:
        return polar_unitary(m, rcond=rcond)
    except PolarDegenerateError:
        pass
    u, s, vh = np.linalg.svd(m)
    r = int(np.sum(s > rcond * max(s[0], np.finfo(float).tiny)))
    w = u[:, :r] @ vh[:r]
    if r < 4:
        up, vp = u[:, r:], vh[r:].conj().T
        block = up.conj().T @ old.reshape(4, 4) @ vp
        a, _, bh = np.linalg.svd(block)
        w = w + up @ (a @ bh) @ vp.conj().T
    return w


class _Engine:
    """Column-transfer contraction of ``Tr[R L_d ... L_1]``."""

    def __init__(self, r: MPO, circuit: BrickWallCircuit):
        n = circuit.width
        if len(r) != n:
            raise ShapeError(f"operator has {len(r)} sites but the circuit has width {n}")
        self.n, self.d = n, circuit.depth
        self.circuit = circuit
        self.r = [np.asarray(t) for t in r.tensors]
        counter = iter(range(10 ** 9))
        self.a = [next(counter) for _ in range(n + 1)]
        self.lab = [[0] * (self.d + 1) for _ in range(n)]
        self.x: dict[tuple[int, int], int] = {}
        for q in range(n):
            self.lab[q][0] = next(counter)
        for k in range(self.d):
            touched = set()
            for q in circuit.pairs(k):
                touched.update((q, q + 1))
                self.x[(k, q)] = next(counter)
            for q in range(n):
                self.lab[q][k + 1] = next(counter) if q in touched else self.lab[q][k]
        self.pair_layers = [circuit.layers_on_pair(q) for q in range(n - 1)] + [[]]
        self.halves: dict[tuple[int, int], tuple[np.ndarray, np.ndarray]] = {}
        for k in range(self.d):
            for q in circuit.pairs(k):
                self._split(k, q)
        self.left: list = [None] * (n + 1)
        self.right: list = [None] * (n + 1)
        self.left[0] = np.ones(1, dtype=np.complex128)
        self.right[n] = np.ones(1, dtype=np.complex128)

    # -- pieces --------------------------------------------------------------

    def _split(self, k, q):
        g = self.circuit.gate(k, q).reshape(2, 2, 2, 2).transpose(0, 2, 1, 3).reshape(4, 4)
        u, s, vh = np.linalg.svd(g)
        a = (u * s).reshape(2, 2, 4)  # (o1, i1, x)
        b = vh.reshape(4, 2, 2)  # (x, o2, i2)
        self.halves[(k, q)] = (a, b)

    def _r_site(self, q):
        return self.r[q], (self.a[q], self.lab[q][0], self.lab[q][self.d], self.a[q + 1])

    def _gate_full(self, k, q):
        return self.circuit.gate(k, q).reshape(2, 2, 2, 2), (
            self.lab[q][k + 1], self.lab[q + 1][k + 1], self.lab[q][k], self.lab[q + 1][k])

    def _a_half(self, k, q):
        return self.halves[(k, q)][0], (self.lab[q][k + 1], self.lab[q][k], self.x[(k, q)])

    def _b_half(self, k, q):
        # half of the gate on pair q sitting on wire q + 1
        return self.halves[(k, q)][1], (self.x[(k, q)], self.lab[q + 1][k + 1], self.lab[q + 1][k])

    def _cut_labels(self, q):
        """Open legs at the cut between wires q-1 and q."""
        return [self.a[q]] + ([self.x[(k, q - 1)] for k in self.pair_layers[q - 1]] if q > 0 else [])

    def _column(self, q):
        ops = [self._r_site(q)]
        if q > 0:
            ops += [self._b_half(k, q - 1) for k in self.pair_layers[q - 1]]
        ops += [self._a_half(k, q) for k in self.pair_layers[q]]
        return ops

    def build_left(self, q):
        """left[q + 1] from left[q] and column q."""
        ops = [(self.left[q], self._cut_labels(q))] + self._column(q)
        self.left[q + 1] = _einsum(ops, self._cut_labels(q + 1))

    def build_right(self, q):
        """right[q] from column q and right[q + 1]."""
        ops = self._column(q) + [(self.right[q + 1], self._cut_labels(q + 1))]
        self.right[q] = _einsum(ops, self._cut_labels(q))

    def build_all_right(self, stop: int = 0):
        for q in range(self.n - 1, stop - 1, -1):
            self.build_right(q)

    def environment(self, k, q):
        """E[o1, o2, i1, i2] with Tr[R U] = sum(E * G) for the gate (k, q)."""
        ops = [(self.left[q], self._cut_labels(q)), self._r_site(q), self._r_site(q + 1)]
        if q > 0:
            ops += [self._b_half(kk, q - 1) for kk in self.pair_layers[q - 1]]
        ops += [self._gate_full(kk, q) for kk in self.pair_layers[q] if kk != k]
        ops += [self._a_half(kk, q + 1) for kk in self.pair_layers[q + 1]]
        ops.append((self.right[q + 2], self._cut_labels(q + 2)))
        out = self._gate_full(k, q)[1]
        return _einsum(ops, out)

    def trace(self) -> complex:
        if self.right[0] is None:
            self.build_all_right()
        return complex(self.right[0].reshape(-1)[0])

    def set_gate(self, k, q, g):
        self.circuit.set_gate(k, q, g)
        self._split(k, q)

    # -- sweeping ------------------------------------------------------------

    def sweep(self, rcond: float) -> tuple[complex, list[UpdateRecord]]:
        records = []
        self.build_all_right(stop=2)
        value = None
        for q in range(self.n - 1):
            ks = self.pair_layers[q]
            for k in ks + ks[::-1][1:]:
                env = self.environment(k, q).reshape(4, 4)
                old = self.circuit.gate(k, q)
                before = float(np.real(np.sum(env * old)))
                new = polar_update(env, old, rcond)
                value = complex(np.sum(env * new))
                records.append(UpdateRecord(k, q, before, value.real))
                self.set_gate(k, q, new)
            self.build_left(q)
        if value is None:
            self.build_left(self.n - 1)
            value = complex(self.left[self.n].reshape(-1)[0])
        return value, records


def trace_objective(r: MPO, circuit: BrickWallCircuit) -> complex:
    """``Tr[R U]`` for the circuit unitary ``U`` contracted exactly."""
    return _Engine(r, circuit.copy()).trace()


def environment_gate(reference: MPO, circuit: BrickWallCircuit, position: tuple[int, int], *, target: str = "unitary") -> np.ndarray:
    """Environment ``G'`` (4x4) of the gate at ``position = (layer, pair)``.

    ``Re Tr[G'^dagger G]`` is the part of the objective carried by that gate.
    ``reference`` is the target unitary ``V`` as an MPO (``target='unitary'``)
    or, with ``target='operator'``, the operator ``R`` itself.
    """
    k, q = position
    if not 0 <= k < circuit.depth or q not in circuit.pairs(k):
        raise ValueError(f"no gate at layer {k}, pair {q}")
    r = reference.dagger() if target == "unitary" else reference
    eng = _Engine(r, circuit.copy())
    eng.build_all_right(stop=q + 2)
    for j in range(q):
        eng.build_left(j)
    return eng.environment(k, q).reshape(4, 4).conj()


def prep_operator(target: MPS) -> MPO:
    """``|0...0><target|`` as an MPO."""
    tensors = []
    for t in target.tensors:
        w = np.zeros((t.shape[0], 2, 2, t.shape[2]), dtype=np.complex128)
        w[:, 0, :, :] = t.conj()
        tensors.append(w)
    return MPO(tensors)


def _run(r: MPO, circuit: BrickWallCircuit, sweeps: int, score, rcond: float, checkpoints: Iterable[int],
         callback=None) -> CompressionResult:
    eng = _Engine(r, circuit)
    tr0 = eng.trace()
    objective, fid = score(tr0)
    reports = [SweepReport(0, objective, fid)]
    wanted = set(int(c) for c in checkpoints)
    saved: dict[int, BrickWallCircuit] = {}
    if 0 in wanted:
        saved[0] = circuit.copy()
    for s in range(1, sweeps + 1):
        tr, records = eng.sweep(rcond)
        objective, fid = score(tr)
        reports.append(SweepReport(s, objective, fid, records))
        if s in wanted:
            saved[s] = circuit.copy()
        if callback is not None:
            callback(reports[-1])
    return CompressionResult(circuit, reports, saved)


def optimize_evolution(reference: MPO, depth: int, sweeps: int, cutoff: float = 1e-12, *, init: BrickWallCircuit | None = None,
                       perturbation: float = 0.01, seed=None, checkpoints: Iterable[int] = (), callback=None) -> CompressionResult:
    """Fit a brick-wall circuit to the unitary ``reference`` (an MPO ``V``).

    Reports carry ``objective = ||V - U||_F^2 = 2^(n+1) - 2 Re Tr[V^dagger U]``
    and the normalized fidelity ``|Tr[V^dagger U]| / 2^n``.  ``cutoff`` is the
    relative singular-value threshold below which an environment counts as
    rank deficient.
    """
    n = len(reference)
    circuit = init.copy() if init is not None else init_brickwall(n, depth, perturbation, seed)
    if circuit.width != n:
        raise ShapeError("initial circuit width does not match the reference")
    dim = 2.0 ** n

    def score(tr):
        return 2 * dim - 2 * tr.real, abs(tr) / dim

    return _run(reference.dagger(), circuit, sweeps, score, cutoff, checkpoints, callback)


def optimize_prep(target: MPS, depth: int, sweeps: int, cutoff: float = 1e-12, *, init: BrickWallCircuit | None = None,
                  perturbation: float = 0.01, seed=None, checkpoints: Iterable[int] = (), callback=None) -> CompressionResult:
    """Fit ``U`` so that ``U|0...0>`` approximates ``target``.

    Reports carry ``objective = 1 - Re <target|U|0...0>`` and that real overlap.
    """
    n = len(target)
    circuit = init.copy() if init is not None else init_brickwall(n, depth, perturbation, seed)
    if circuit.width != n:
        raise ShapeError("initial circuit width does not match the target")

    def score(tr):
        return 1.0 - tr.real, tr.real

    return _run(prep_operator(target), circuit, sweeps, score, cutoff, checkpoints, callback)


@dataclass
class OverlapEnhancement:
    circuit: BrickWallCircuit
    overlaps: list[float]
    residual_overlap: complex  # <MPS^(k_max + 1)|0...0>
    stop_reason: str
    stages: list[BrickWallCircuit] = field(default_factory=list, repr=False)

    def __iter__(self):
        return iter((self.circuit, self.overlaps))


def enhance_overlap(target: MPS, depth_per_iter: int, sweeps_per_iter: int, max_iters: int, cutoff: float = 1e-12, *,
                    max_bond: int | None = None, min_gain: float = 1e-3, perturbation: float = 0.01, seed=None) -> OverlapEnhancement:
    """Grow a deep preparation circuit by repeated fit-and-undo.

    Iteration ``k`` fits ``U_k`` to ``|MPS_k>`` and forms
    ``|MPS_{k+1}> = U_k^dagger |MPS_k>``.  The composite circuit runs
    ``U_kmax`` first and ``U_1`` last, and satisfies
    ``<MPS_1|U_1 ... U_kmax|0> = <MPS_{kmax+1}|0>``.  Iterations after the
    first start from the identity, so the overlap never decreases.  ``cutoff``
    and ``max_bond`` control the MPS truncation when forming ``MPS_{k+1}``;
    exceeding ``max_bond`` stops the loop and keeps the circuit built so far.
    """
    if depth_per_iter < 1 or max_iters < 1:
        raise ValueError("depth_per_iter and max_iters must be >= 1")
    n = len(target)
    psi = target
    stages: list[BrickWallCircuit] = []
    overlaps: list[float] = []
    residual = complex(inner(psi, MPS.zeros(n)))
    reason = "max_iters"
    for it in range(max_iters):
        eps = perturbation if it == 0 else 0.0
        res = optimize_prep(psi, depth_per_iter, sweeps_per_iter, cutoff, perturbation=eps, seed=seed)
        nxt = circuit_to_mps(res.circuit, psi, cutoff=cutoff, adjoint=True)
        if max_bond is not None and nxt.max_bond > max_bond:
            reason = "bond_budget"
            log.info("overlap enhancement stopped at iteration %d: bond %d > %d", it + 1, nxt.max_bond, max_bond)
            break
        stages.append(res.circuit)
        psi = nxt
        residual = complex(inner(psi, MPS.zeros(n)))
        overlaps.append(residual.real)
        if it > 0 and overlaps[-1] - overlaps[-2] < min_gain:
            reason = "converged"
            break
    if not stages:
        raise ResourceError("no iteration completed within the bond budget")
    composite = stages[-1]
    for st in reversed(stages[:-1]):
        composite = composite.then(st)
    return OverlapEnhancement(composite, overlaps, residual, reason, stages)


class BrickWallCompressor(BaseEstimator):
    """Estimator wrapper around ``optimize_evolution`` / ``optimize_prep``.

    ``fit(X)`` takes an MPO (the target unitary) when ``mode='evolution'``
    or an MPS (the target state) when ``mode='prep'``.
    """

    def __init__(self, depth: int = 5, sweeps: int = 1000, mode: str = "evolution", perturbation: float = 0.01,
                 cutoff: float = 1e-12, random_state=None, checkpoints: tuple = ()):
        self.depth = depth
        self.sweeps = sweeps
        self.mode = mode
        self.perturbation = perturbation
        self.cutoff = cutoff
        self.random_state = random_state
        self.checkpoints = checkpoints

    def _validate(self, X):
        if self.mode not in ("evolution", "prep"):
            raise ValueError("mode must be 'evolution' or 'prep'")
        if self.depth < 1 or self.sweeps < 0:
            raise ValueError("depth must be >= 1 and sweeps >= 0")
        want = MPO if self.mode == "evolution" else MPS
        if not isinstance(X, want):
            raise TypeError(f"mode={self.mode!r} expects an {want.__name__}")

    def fit(self, X, y=None):
        self._validate(X)
        fn = optimize_evolution if self.mode == "evolution" else optimize_prep
        res = fn(X, self.depth, self.sweeps, self.cutoff, perturbation=self.perturbation, seed=self.random_state,
                 checkpoints=self.checkpoints)
        self.circuit_ = res.circuit
        self.reports_ = res.reports
        self.checkpoints_ = res.checkpoints
        self.n_wires_ = res.circuit.width
        return self

    def score(self, X, y=None) -> float:
        """Normalized fidelity (evolution) or real overlap (prep) on ``X``."""
        self._validate(X)
        if not hasattr(self, "circuit_"):
            raise AttributeError("call fit first")
        if self.mode == "evolution":
            return abs(trace_objective(X.dagger(), self.circuit_)) / 2.0 ** len(X)
        return trace_objective(prep_operator(X), self.circuit_).real

    def transform(self, X):
        """Apply the fitted circuit to an MPS."""
        if not hasattr(self, "circuit_"):
            raise AttributeError("call fit first")
        return circuit_to_mps(self.circuit_, X)
