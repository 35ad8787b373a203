"""Execution of the interference circuit family.

Wire 0 is the ancilla; the evolution block acts on wires ``1..N``.  For a
phase ``theta`` and ``n`` evolution steps the measured quantity is the
all-zeros probability::

    m(theta) = |<0| U_prep^dagger P(theta) U_evol^n U_prep |0>|^2,   P = diag(1, e^{i theta})

Since ``P`` and ``U_evol`` act on different wires, ``m(theta) = |A_0 + e^{i theta} A_1|^2``
with ``A_b = <psi_prep| (|b><b| x U_evol^n) |psi_prep>``; the backends
compute the pair ``(A_0, A_1)`` per step and every phase reuses it.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .circuits import BrickWallCircuit
from .exceptions import ShapeError
from .mps import MPO, MPS, apply_mpo, circuit_to_mps, inner

__all__ = [
    "THETAS",
    "ExperimentCircuit",
    "NoiseSpec",
    "StatevectorBackend",
    "MPSBackend",
    "Experiment",
    "MeasurementRecord",
    "RunLog",
    "measure_m",
    "ancilla_zero_weight",
    "depolarizing_probability",
]

THETAS = (0.0, np.pi / 2, np.pi, 3 * np.pi / 2)


def _check_theta(theta):
    if not any(np.isclose(theta, t) for t in THETAS):
        raise ValueError(f"theta must be one of 0, pi/2, pi, 3pi/2; got {theta}")


@dataclass
class ExperimentCircuit:
    """One circuit of the family.

    ``prep`` is a brick-wall circuit on ``N + 1`` wires or an explicit
    ``N + 1``-qubit state (dense vector or MPS) standing in for ``U_prep|0>``.
    ``evol`` is a brick-wall circuit on ``N`` wires, or a dense unitary / MPO.
    """

    prep: object
    evol: object
    theta: float = 0.0
    steps: int = 0

    def __post_init__(self):
        _check_theta(self.theta)
        if self.steps < 0:
            raise ValueError("steps must be >= 0")


@dataclass(frozen=True)
class NoiseSpec:
    """Global depolarizing noise per evolution step plus optional shot sampling.

    ``shots=None`` selects exact probabilities.
    """

    p_step: float = 0.0
    shots: int | None = None
    seed: int | None = None

    def __post_init__(self):
        if not 0.0 <= self.p_step < 1.0:
            raise ValueError("p_step must lie in [0, 1)")
        if self.shots is not None and self.shots < 1:
            raise ValueError("shots must be positive or None")

    @property
    def exact(self) -> bool:
        return self.shots is None


def depolarizing_probability(p_step: float, steps: int) -> float:
    """``p_dep = 1 - (1 - p_step)^steps``."""
    return 1.0 - (1.0 - p_step) ** steps


def _dense_prep(prep) -> np.ndarray:
    if isinstance(prep, BrickWallCircuit):
        v = np.zeros(2 ** prep.width, dtype=np.complex128)
        v[0] = 1.0
        return prep.apply(v)
    if isinstance(prep, MPS):
        return prep.to_dense()
    return np.asarray(prep, dtype=np.complex128).reshape(-1)


def _prep_mps(prep, max_bond=None, cutoff=0.0) -> MPS:
    if isinstance(prep, BrickWallCircuit):
        return circuit_to_mps(prep, MPS.zeros(prep.width), max_bond=max_bond, cutoff=cutoff)
    if isinstance(prep, MPS):
        return prep
    return MPS.from_dense(prep)


def ancilla_zero_weight(prep) -> float:
    """Branch weight ``||(<0| x I) U_prep |0...0>||^2`` of ancilla value 0.

    ``prep`` may be a circuit, an MPS or a dense vector.  Circuits are
    evaluated through their MPS with the ancilla site projected.
    """
    psi = _prep_mps(prep)
    if len(psi) < 2:
        raise ShapeError("need an ancilla plus at least one system qubit")
    proj = np.zeros((2, 2))
    proj[0, 0] = 1.0
    half = psi.copy()
    half._apply_single(proj, 0)
    return float(np.real(inner(half, half)))


class StatevectorBackend:
    """Dense backend; keeps ``(I x U_evol^n) |psi_prep>`` and advances it step by step."""

    def __init__(self, prep, evol):
        self.psi = _dense_prep(prep)
        n_total = int(round(np.log2(self.psi.size)))
        if 2 ** n_total != self.psi.size or n_total < 2:
            raise ShapeError("prep state must have 2^(N+1) entries with N >= 1")
        self.n_total = n_total
        self.evol = evol
        if isinstance(evol, BrickWallCircuit):
            if evol.width != n_total - 1:
                raise ShapeError(f"evolution width {evol.width} != {n_total - 1} system qubits")
            self._step_fn = lambda v: evol.apply(v, offset=1)
        else:
            u = evol.to_dense() if isinstance(evol, MPO) else np.asarray(evol, dtype=np.complex128)
            if u.shape != (2 ** (n_total - 1),) * 2:
                raise ShapeError("evolution operator does not match the system size")
            self._step_fn = lambda v: (v.reshape(2, -1) @ u.T).reshape(-1)
        self._cache = {0: self.psi}
        self._last = 0

    def evolved(self, steps: int) -> np.ndarray:
        if steps < self._last:
            v, start = self.psi, 0
        else:
            v, start = self._cache[self._last], self._last
        for _ in range(start, steps):
            v = self._step_fn(v)
        self._cache = {0: self.psi, steps: v}
        self._last = steps
        return v

    def amplitudes(self, steps: int) -> tuple[complex, complex]:
        chi = self.evolved(steps).reshape(2, -1)
        ref = self.psi.reshape(2, -1)
        return complex(np.vdot(ref[0], chi[0])), complex(np.vdot(ref[1], chi[1]))


class MPSBackend:
    """Same contract as ``StatevectorBackend`` on MPS, for wider circuits."""

    def __init__(self, prep, evol, max_bond: int | None = None, cutoff: float = 1e-12):
        self.max_bond, self.cutoff = max_bond, cutoff
        self.psi = _prep_mps(prep, max_bond, cutoff)
        self.n_total = len(self.psi)
        self.evol = evol
        if isinstance(evol, BrickWallCircuit):
            if evol.width != self.n_total - 1:
                raise ShapeError(f"evolution width {evol.width} != {self.n_total - 1} system qubits")
            self._op = None
        else:
            op = evol if isinstance(evol, MPO) else MPO.from_dense(evol)
            self._op = op.embed(self.n_total, 1)
        self._cur, self._last = self.psi, 0

    def _step(self, v: MPS) -> MPS:
        if self._op is None:
            return circuit_to_mps(self.evol, v, self.max_bond, self.cutoff, offset=1)
        return apply_mpo(self._op, v, self.max_bond, self.cutoff)

    def amplitudes(self, steps: int) -> tuple[complex, complex]:
        if steps < self._last:
            self._cur, self._last = self.psi, 0
        while self._last < steps:
            self._cur = self._step(self._cur)
            self._last += 1
        out = []
        for b in (0, 1):
            proj = np.zeros((2, 2))
            proj[b, b] = 1.0
            half = self._cur.copy()
            half._apply_single(proj, 0)
            out.append(complex(inner(self.psi, half)))
        return out[0], out[1]


def _backend_for(prep, evol, backend: str):
    if backend == "statevector":
        return StatevectorBackend(prep, evol)
    if backend == "mps":
        return MPSBackend(prep, evol)
    raise ValueError(f"unknown backend {backend!r}")


def _ideal_m(a0: complex, a1: complex, theta: float) -> float:
    return float(min(1.0, max(0.0, abs(a0 + np.exp(1j * theta) * a1) ** 2)))


def measure_m(circ: ExperimentCircuit, noise: NoiseSpec = NoiseSpec(), rng: np.random.Generator | None = None,
              backend: str = "statevector") -> float:
    """All-zeros probability of one circuit, with noise and optional sampling."""
    a0, a1 = _backend_for(circ.prep, circ.evol, backend).amplitudes(circ.steps)
    n_total = _n_total(circ.prep)
    return _noisy(_ideal_m(a0, a1, circ.theta), circ.steps, n_total, noise, rng)[0]


def _n_total(prep) -> int:
    if isinstance(prep, BrickWallCircuit):
        return prep.width
    if isinstance(prep, MPS):
        return len(prep)
    return int(round(np.log2(np.asarray(prep).size)))


def _noisy(m: float, steps: int, n_total: int, noise: NoiseSpec, rng):
    p = depolarizing_probability(noise.p_step, steps)
    mp = (1.0 - p) * m + p / 2.0 ** n_total
    if noise.exact:
        return mp, None
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    k = int(rng.binomial(noise.shots, min(1.0, max(0.0, mp))))
    return k / noise.shots, k


@dataclass(frozen=True)
class MeasurementRecord:
    step: int
    t: float
    theta: float
    shots: int | None
    count: int | None
    probability: float


@dataclass
class RunLog:
    """Raw measurement records; written as tab-separated text."""

    records: list[MeasurementRecord] = field(default_factory=list)

    COLUMNS = ("step", "t", "theta", "shots", "count", "probability")

    def append(self, rec: MeasurementRecord) -> None:
        self.records.append(rec)

    def write(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, delimiter="\t", lineterminator="\n")
            w.writerow(self.COLUMNS)
            for r in self.records:
                w.writerow([r.step, repr(r.t), repr(r.theta), "" if r.shots is None else r.shots,
                            "" if r.count is None else r.count, repr(r.probability)])

    @classmethod
    def read(cls, path) -> "RunLog":
        log = cls()
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh, delimiter="\t"):
                log.append(MeasurementRecord(
                    int(row["step"]), float(row["t"]), float(row["theta"]),
                    int(row["shots"]) if row["shots"] else None,
                    int(row["count"]) if row["count"] else None,
                    float(row["probability"])))
        return log


class Experiment:
    """Runs the four phases for successive step counts and logs every outcome."""

    def __init__(self, prep, evol, dt: float, noise: NoiseSpec = NoiseSpec(), backend: str = "statevector",
                 log: RunLog | None = None):
        self.prep, self.evol, self.dt, self.noise = prep, evol, dt, noise
        self.backend = _backend_for(prep, evol, backend)
        self.n_total = self.backend.n_total
        self.rng = np.random.default_rng(noise.seed)
        self.log = log if log is not None else RunLog()

    def measure_step(self, step: int, thetas: Iterable[float] = THETAS) -> list[float]:
        a0, a1 = self.backend.amplitudes(step)
        out = []
        for th in thetas:
            _check_theta(th)
            val, k = _noisy(_ideal_m(a0, a1, th), step, self.n_total, self.noise, self.rng)
            self.log.append(MeasurementRecord(step, step * self.dt, float(th), self.noise.shots, k, val))
            out.append(val)
        return out

    def a0sq(self) -> float:
        return ancilla_zero_weight(self.backend.psi)
