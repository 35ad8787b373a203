"""Second-order Trotter MPOs for ``H = sum_b C_b P_b``.

One slice with ``tau = dt / m`` is the symmetric product::

    S(tau) = e^{i C_1 P_1 tau/2} ... e^{i C_K P_K tau/2} e^{i C_K P_K tau/2} ... e^{i C_1 P_1 tau/2}

``sign='reverse'`` returns ``S(tau)^m``, which approximates ``e^{+iH dt}``.
``sign='forward'`` returns its adjoint, approximating ``e^{-iH dt}``.
Terms are used in the order given (``build_hubbard`` lists hopping terms left
to right, then on-site terms, then the identity offset).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import PauliTerm, n_qubits, pauli_exp
from .mps import MPO, apply_gates

__all__ = ["TrotterSpec", "build_trotter_mpo", "build_exact_reference_mpo", "trotter_dense", "REFERENCE_SLICES"]

REFERENCE_SLICES = 100
_SIGNS = ("forward", "reverse")


@dataclass(frozen=True)
class TrotterSpec:
    dt: float
    slices: int = REFERENCE_SLICES
    sign: str = "forward"
    cutoff: float = 1e-12
    max_bond: int | None = None

    def __post_init__(self):
        if self.slices < 1:
            raise ValueError("slices must be >= 1")
        if not np.isfinite(self.dt):
            raise ValueError("dt must be finite")
        if self.sign not in _SIGNS:
            raise ValueError(f"sign must be one of {_SIGNS}")


def _slice_factors(terms: Sequence[PauliTerm], tau: float, sign: str):
    """Local factors of one slice in application order, plus the scalar phase."""
    angle = tau / 2 if sign == "reverse" else -tau / 2
    phase = 1.0 + 0j
    half = []
    for t in terms:
        q, g = pauli_exp(t, angle)
        if q is None:
            phase *= g[0, 0] ** 2
        else:
            half.append((q, g))
    # the slice is a palindrome, so application order is 1..K, K..1 for both signs
    # and negating the angle gives exactly the adjoint
    return half + half[::-1], phase


def fuse_factors(factors, max_span: int = 3):
    """Greedily multiply consecutive local factors whose joint span fits ``max_span``.

    The product is unchanged; only the number of MPO updates drops.
    """
    out: list[tuple[int, np.ndarray]] = []
    for q, g in factors:
        k = int(round(np.log2(g.shape[0])))
        if out:
            q0, g0 = out[-1]
            k0 = int(round(np.log2(g0.shape[0])))
            lo, hi = min(q0, q), max(q0 + k0, q + k)
            if hi - lo <= max_span:
                out[-1] = (lo, _widen(g, q, k, lo, hi) @ _widen(g0, q0, k0, lo, hi))
                continue
        out.append((q, g))
    return out


def _widen(g, q, k, lo, hi):
    return np.kron(np.kron(np.eye(2 ** (q - lo)), g), np.eye(2 ** (hi - q - k)))


def build_trotter_mpo(terms: Sequence[PauliTerm], spec: TrotterSpec, n: int | None = None, max_span: int = 3) -> MPO:
    n = n_qubits(terms) if n is None else n
    op = MPO.identity(n)
    if spec.dt == 0:
        return op
    factors, phase = _slice_factors(terms, spec.dt / spec.slices, spec.sign)
    # consecutive slices share their outermost factor, so fuse across slices too
    factors = fuse_factors(factors * spec.slices, max_span)
    apply_gates(op, factors, side="left", max_bond=spec.max_bond, cutoff=spec.cutoff)
    op._move_center(0)
    op.tensors[0] = op.tensors[0] * phase ** spec.slices
    return op


def build_exact_reference_mpo(terms: Sequence[PauliTerm], dt: float, sign: str = "forward", n: int | None = None,
                              cutoff: float = 1e-12, max_bond: int | None = None) -> MPO:
    """Trotter MPO with ``REFERENCE_SLICES`` slices, used as the exact propagator."""
    return build_trotter_mpo(terms, TrotterSpec(dt, REFERENCE_SLICES, sign, cutoff, max_bond), n)


def trotter_dense(terms: Sequence[PauliTerm], dt: float, slices: int, sign: str = "forward", n: int | None = None) -> np.ndarray:
    """Dense version of ``build_trotter_mpo`` for small systems."""
    n = n_qubits(terms) if n is None else n
    dim = 2 ** n
    factors, phase = _slice_factors(terms, dt / slices, sign)
    s = np.eye(dim, dtype=np.complex128)
    for q, g in factors:
        k = int(round(np.log2(g.shape[0])))
        full = np.kron(np.kron(np.eye(2 ** q), g), np.eye(2 ** (n - q - k)))
        s = full @ s
    return np.linalg.matrix_power(s * phase, slices)
