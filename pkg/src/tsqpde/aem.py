"""Algorithmic error mitigation over a family of evolution-circuit variants.

For variants ``U_i`` and ``n`` steps the mitigated state is
``mu = sum_i c_i rho_i`` with weights minimizing the Frobenius distance to
the exactly evolved state::

    F(c) = 1 + sum_ij M_ij c_i c_j - 2 sum_i L_i c_i
    M_ij = |<psi| (U_i^dagger)^n U_j^n |psi>|^2,   L_i = |<psi| e^{iHn dt} U_i^n |psi>|^2

subject to ``sum c = 1`` and ``sum |c| <= 3``.  Overlaps are contracted
inside out: ``C_k = A C_{k-1} B`` is kept as a compressed MPO so that near
cancellations between ``A`` and ``B`` keep the bond dimension small.
"""

from __future__ import annotations

import csv
import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .circuits import BrickWallCircuit
from .exceptions import AlignmentError, ShapeError
from .mps import MPO, MPS, apply_gates, expectation, mpo_product
from .spectral import TimeSeries, combine_signal

__all__ = [
    "VariantSet",
    "AemWeights",
    "SandwichResult",
    "sandwich_overlaps",
    "compute_M_L",
    "MLTables",
    "solve_weights",
    "aem_objective",
    "mitigated_series",
    "L1_BOUND",
]

log = logging.getLogger(__name__)

L1_BOUND = 3.0
RIDGE = 1e-10
COND_LIMIT = 1e12


@dataclass
class VariantSet:
    labels: list[str]
    circuits: list[BrickWallCircuit]
    kind: str = "sweeps"  # or "slices"
    parameters: list[float] = field(default_factory=list)

    def __post_init__(self):
        if len(self.labels) != len(self.circuits):
            raise ShapeError("one label per circuit")
        if len(self.circuits) < 2:
            raise ValueError("AEM needs at least two variants")
        if self.kind not in ("sweeps", "slices"):
            raise ValueError("kind must be 'sweeps' or 'slices'")
        w = {c.width for c in self.circuits}
        if len(w) != 1:
            raise ShapeError("variants must share one width")

    def __len__(self):
        return len(self.circuits)

    @property
    def width(self) -> int:
        return self.circuits[0].width


def _right_sequence(circuit: BrickWallCircuit):
    """Gates for ``C -> C U``: the last layer multiplies first."""
    return list(reversed(circuit.gate_sequence()))


@dataclass
class SandwichResult:
    values: list[complex]
    max_bonds: list[int]
    truncation_errors: list[float]
    stop_step: int | None = None  # first step that broke the bond budget


def sandwich_overlaps(prep: MPS, left, right: BrickWallCircuit, steps: int, cutoff: float = 1e-12,
                      max_bond: int | None = None, offset: int = 1, bond_budget: int | None = None) -> SandwichResult:
    """``v_n = <prep| C_n |prep>`` for ``C_n = A^n B^n``, ``n = 1..steps``.

    ``left`` is either a ``BrickWallCircuit`` (``A`` is its adjoint) or an
    MPO used as ``A`` directly.  ``right`` supplies ``B``.  ``C`` acts on
    ``prep`` from site ``offset``.  When ``bond_budget`` is exceeded the chain
    stops and ``stop_step`` records where.
    """
    n = right.width
    c = MPO.identity(n)
    values, bonds, errs = [], [], []
    left_seq = left.gate_sequence(adjoint=True) if isinstance(left, BrickWallCircuit) else None
    right_seq = _right_sequence(right)
    stop = None
    for k in range(1, steps + 1):
        if left_seq is not None:
            apply_gates(c, left_seq, side="left", max_bond=max_bond, cutoff=cutoff)
        else:
            c = mpo_product(left, c, max_bond=max_bond, cutoff=cutoff)
        apply_gates(c, right_seq, side="right", max_bond=max_bond, cutoff=cutoff)
        c._compress(max_bond=max_bond, cutoff=cutoff)
        if bond_budget is not None and c.max_bond > bond_budget:
            stop = k
            log.info("sandwich chain stopped at step %d: bond %d > %d", k, c.max_bond, bond_budget)
            break
        values.append(expectation(prep, c, prep, offset=offset))
        bonds.append(c.max_bond)
        errs.append(c.truncation_error)
    return SandwichResult(values, bonds, errs, stop)


@dataclass
class MLTables:
    M: np.ndarray  # (steps, K, K)
    L: np.ndarray  # (steps, K)
    overlaps: dict = field(default_factory=dict, repr=False)
    bonds: dict = field(default_factory=dict)
    steps: int = 0

    def write(self, path) -> None:
        """One row per step: ``step``, the upper triangle of ``M`` and ``L``."""
        k = self.L.shape[1]
        cols = ["step"] + [f"M_{i}{j}" for i in range(k) for j in range(i, k)] + [f"L_{i}" for i in range(k)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(cols)
            for s in range(self.steps):
                row = [s + 1] + [repr(float(self.M[s, i, j])) for i in range(k) for j in range(i, k)]
                row += [repr(float(x)) for x in self.L[s]]
                w.writerow(row)

    def write_bonds(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            keys = sorted(self.bonds)
            w.writerow(["step"] + keys)
            for s in range(self.steps):
                w.writerow([s + 1] + [self.bonds[key][s] if s < len(self.bonds[key]) else "" for key in keys])


def compute_M_L(prep: MPS, variants: VariantSet, exact_ref: MPO, steps: int, cutoff: float = 1e-12,
                max_bond: int | None = None, bond_budget: int | None = None, diagonal: bool = True) -> MLTables:
    """Per-step ``M`` and ``L`` tables.

    ``exact_ref`` is the single-step propagator ``e^{+iH dt}`` as an MPO.
    With ``diagonal=False`` the diagonal is set to 1 without contraction.
    A chain that stops early truncates every table to the shortest chain.
    """
    k = len(variants)
    over: dict = {}
    bonds: dict = {}
    usable = steps
    for i in range(k):
        for j in range(i, k):
            if i == j and not diagonal:
                continue
            r = sandwich_overlaps(prep, variants.circuits[i], variants.circuits[j], steps, cutoff, max_bond,
                                  bond_budget=bond_budget)
            over[(i, j)] = r.values
            bonds[f"M_{i}{j}"] = r.max_bonds
            log.info("M_%d%d chain: %d steps, max bond %d", i, j, len(r.values), max(r.max_bonds, default=0))
            usable = min(usable, len(r.values))
        r = sandwich_overlaps(prep, exact_ref, variants.circuits[i], steps, cutoff, max_bond, bond_budget=bond_budget)
        over[("L", i)] = r.values
        bonds[f"L_{i}"] = r.max_bonds
        log.info("L_%d chain: %d steps, max bond %d", i, len(r.values), max(r.max_bonds, default=0))
        usable = min(usable, len(r.values))
    M = np.ones((usable, k, k))
    L = np.zeros((usable, k))
    for s in range(usable):
        for i in range(k):
            for j in range(i, k):
                if (i, j) in over:
                    M[s, i, j] = M[s, j, i] = abs(over[(i, j)][s]) ** 2
            L[s, i] = abs(over[("L", i)][s]) ** 2
    return MLTables(M, L, over, bonds, usable)


@dataclass
class AemWeights:
    c: np.ndarray
    objective: float
    ridge: bool = False
    active_l1: bool = False


def aem_objective(c, M, L) -> float:
    c = np.asarray(c, dtype=float)
    return float(1.0 + c @ M @ c - 2.0 * L @ c)


def solve_weights(M, L, l1_bound: float = L1_BOUND, tol: float = 1e-12) -> AemWeights:
    """Minimize ``1 + c.M.c - 2 L.c`` with ``sum c = 1`` and ``sum |c| <= l1_bound``.

    Every sign pattern in ``{-, 0, +}^K`` fixes an orthant face; on it the
    problem is an equality-constrained quadratic, solved with the ``L1`` bound
    either inactive or active.  The best feasible candidate is the global
    optimum since the problem is convex.  An ill-conditioned ``M`` gets a
    ``1e-10`` ridge and is flagged.
    """
    M = np.asarray(M, dtype=float)
    L = np.asarray(L, dtype=float)
    k = L.size
    if M.shape != (k, k):
        raise ShapeError("M must be K x K for K entries of L")
    M = 0.5 * (M + M.T)
    ridge = np.linalg.cond(M) > COND_LIMIT
    if ridge:
        M = M + RIDGE * np.eye(k)
    best: tuple[float, np.ndarray, bool] | None = None
    for signs in itertools.product((-1, 0, 1), repeat=k):
        sig = np.array(signs, dtype=float)
        free = np.flatnonzero(sig)
        if free.size == 0:
            continue
        mf, lf, sf = M[np.ix_(free, free)], L[free], sig[free]
        for l1_active in (False, True):
            rows = [np.ones(free.size)]
            rhs = [1.0]
            if l1_active:
                rows.append(sf)
                rhs.append(l1_bound)
            a = np.array(rows)
            kkt = np.block([[2 * mf, a.T], [a, np.zeros((a.shape[0], a.shape[0]))]])
            b = np.concatenate([2 * lf, rhs])
            sol, *_ = np.linalg.lstsq(kkt, b, rcond=None)
            cf = sol[: free.size]
            if not np.allclose(a @ cf, rhs, atol=1e-9):
                continue
            if np.any(cf * sf < -tol):
                continue
            c = np.zeros(k)
            c[free] = cf
            if np.sum(np.abs(c)) > l1_bound + 1e-10:
                continue
            f = aem_objective(c, M, L)
            if best is None or f < best[0] - 1e-15:
                best = (f, c, l1_active)
    if best is None:  # pragma: no cover - the uniform vector is always feasible
        c = np.full(k, 1.0 / k)
        best = (aem_objective(c, M, L), c, False)
    f, c, act = best
    return AemWeights(c, f, bool(ridge), bool(act))


def mitigated_series(weights: Sequence[np.ndarray], measurements: Sequence[np.ndarray], dt: float, a0sq: float,
                     steps: Sequence[int] | None = None, metadata: dict | None = None) -> TimeSeries:
    """Combine per-variant probabilities with per-step weights.

    ``measurements[i]`` has shape ``(n_steps, 4)``: ``m(0), m(pi/2), m(pi),
    m(3pi/2)`` of variant ``i``.  ``weights[s]`` holds ``c(t)`` at step ``s``.
    """
    arrs = [np.asarray(m, dtype=float) for m in measurements]
    if not arrs:
        raise AlignmentError("no measurements")
    shape = arrs[0].shape
    if any(a.shape != shape for a in arrs) or len(shape) != 2 or shape[1] != 4:
        raise AlignmentError("every variant needs an (n_steps, 4) table on the same grid")
    n = min(shape[0], len(weights))
    if shape[0] != len(weights):
        log.info("aligning %d measured steps with %d weight steps", shape[0], len(weights))
    if len(weights) and len(weights[0]) != len(arrs):
        raise AlignmentError("weight vectors do not match the number of variants")
    stack = np.stack(arrs)  # (K, steps, 4)
    vals = []
    for s in range(n):
        mm = np.asarray(weights[s]) @ stack[:, s, :]
        vals.append(combine_signal(mm[0], mm[1], mm[2], mm[3], a0sq))
    st = np.arange(1, n + 1) if steps is None else np.asarray(steps)[:n]
    return TimeSeries(dt, st, np.array(vals), a0sq, dict(metadata or {}))
