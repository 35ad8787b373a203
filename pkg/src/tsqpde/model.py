"""1D Hubbard model, Jordan-Wigner Pauli decomposition and exact diagonalization.

Qubit order is spin-interleaved: site ``q`` spin ``s`` (0 = up, 1 = down)
lives on qubit ``2*q + s``.  Occupation ``n = (I - Z)/2``, so an occupied
mode is ``|1>``.  Hopping between neighbouring sites of equal spin spans
three qubits and picks up one Jordan-Wigner ``Z`` on the opposite-spin
qubit in between::

    a_i^+ a_k + a_k^+ a_i = (X_i Z_{i+1} X_k + Y_i Z_{i+1} Y_k) / 2,   k = i + 2
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse
import scipy.sparse.linalg

from .exceptions import ResourceError, ShapeError

__all__ = [
    "PauliTerm",
    "HubbardSpec",
    "EigenSolution",
    "build_hubbard",
    "simplify",
    "n_qubits",
    "pauli_string_matrix",
    "hamiltonian_matrix",
    "exact_eigs",
    "pauli_expm_two_site",
    "pauli_exp",
    "number_operator",
    "sz_operator",
    "select_target_states",
]

_PAULI = {
    "I": np.eye(2, dtype=np.complex128),
    "X": np.array([[0, 1], [1, 0]], dtype=np.complex128),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
    "Z": np.array([[1, 0], [0, -1]], dtype=np.complex128),
}

MAX_QUBITS = 14
DENSE_LIMIT = 12


@dataclass(frozen=True)
class PauliTerm:
    """``coefficient * prod_q P_q``; an empty ``ops`` is the identity."""

    coefficient: float
    ops: tuple[tuple[int, str], ...] = ()

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise ValueError("coefficient must be finite")
        ops = self.ops.items() if isinstance(self.ops, Mapping) else self.ops
        clean = tuple(sorted((int(q), str(p).upper()) for q, p in ops if str(p).upper() != "I"))
        if any(p not in "XYZ" for _, p in clean):
            raise ValueError(f"unknown Pauli label in {clean}")
        if len({q for q, _ in clean}) != len(clean):
            raise ValueError("each qubit may carry at most one Pauli")
        object.__setattr__(self, "ops", clean)
        object.__setattr__(self, "coefficient", float(self.coefficient))

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, _ in self.ops)

    @property
    def is_identity(self) -> bool:
        return not self.ops

    def label(self, n: int) -> str:
        d = dict(self.ops)
        return "".join(d.get(q, "I") for q in range(n))


@dataclass(frozen=True)
class HubbardSpec:
    n_sites: int
    hopping: float = 1.0
    onsite: float = 10.0

    def __post_init__(self):
        if self.n_sites < 1:
            raise ValueError("n_sites must be positive")

    @property
    def n_qubits(self) -> int:
        return 2 * self.n_sites


@dataclass
class EigenSolution:
    energies: np.ndarray
    states: np.ndarray = field(repr=False)  # columns are eigenvectors
    gap: float


def simplify(terms: Sequence[PauliTerm], atol: float = 1e-14) -> list[PauliTerm]:
    """Merge equal Pauli strings (first-occurrence order), drop zero terms."""
    acc: dict[tuple, float] = {}
    for t in terms:
        acc[t.ops] = acc.get(t.ops, 0.0) + t.coefficient
    return [PauliTerm(c, ops) for ops, c in acc.items() if abs(c) > atol]


def build_hubbard(spec: HubbardSpec) -> list[PauliTerm]:
    """Pauli decomposition of the open-chain Hubbard Hamiltonian.

    ``H = -T sum_{q,s} (a+_{q+1,s} a_{q,s} + h.c.) + U sum_q n_up n_dn
    - (U/2) sum_q (n_up + n_dn)``.

    Term order: hopping bonds left to right (spin up, then down; XZX before
    YZY), then on-site terms left to right, then the identity offset.
    """
    T, U = spec.hopping, spec.onsite
    hop: list[PauliTerm] = []
    for q in range(spec.n_sites - 1):
        for s in (0, 1):
            i, k = 2 * q + s, 2 * q + 2 + s
            for p in ("X", "Y"):
                hop.append(PauliTerm(-T / 2, ((i, p), (i + 1, "Z"), (k, p))))
    onsite: list[PauliTerm] = []
    ident: list[PauliTerm] = []
    for q in range(spec.n_sites):
        up, dn = 2 * q, 2 * q + 1
        # U n_up n_dn = U/4 (I - Z_up - Z_dn + Z_up Z_dn)
        # -U/2 (n_up + n_dn) = -U/4 (2I - Z_up - Z_dn)
        raw = [
            PauliTerm(U / 4, ((up, "Z"), (dn, "Z"))),
            PauliTerm(-U / 4, ((up, "Z"),)),
            PauliTerm(-U / 4, ((dn, "Z"),)),
            PauliTerm(U / 4, ((up, "Z"),)),
            PauliTerm(U / 4, ((dn, "Z"),)),
        ]
        onsite.extend(raw)
        ident.extend([PauliTerm(U / 4), PauliTerm(-U / 2)])
    return simplify(hop + onsite + ident)


def n_qubits(terms: Sequence[PauliTerm]) -> int:
    return 1 + max((q for t in terms for q in t.support), default=0)


def pauli_string_matrix(term: PauliTerm, n: int) -> scipy.sparse.csr_matrix:
    """Sparse ``coefficient * P`` on n qubits (qubit 0 most significant)."""
    dim = 2 ** n
    x = np.arange(dim)
    flip = 0
    phase = np.full(dim, term.coefficient, dtype=np.complex128)
    for q, p in term.ops:
        if q >= n:
            raise ShapeError(f"term acts on qubit {q} but n = {n}")
        bit = (x >> (n - 1 - q)) & 1
        if p in "XY":
            flip |= 1 << (n - 1 - q)
        if p == "Z":
            phase *= 1 - 2 * bit
        elif p == "Y":
            phase *= 1j * (1 - 2 * bit)
    return scipy.sparse.csr_matrix((phase, (x ^ flip, x)), shape=(dim, dim))


def hamiltonian_matrix(terms: Sequence[PauliTerm], n: int | None = None, sparse: bool = False):
    n = n_qubits(terms) if n is None else n
    h = scipy.sparse.csr_matrix((2 ** n, 2 ** n), dtype=np.complex128)
    for t in terms:
        h = h + pauli_string_matrix(t, n)
    return h if sparse else h.toarray()


def number_operator(n: int) -> np.ndarray:
    # N = sum_j (I - Z_j)/2
    return hamiltonian_matrix([PauliTerm(n / 2), *(PauliTerm(-0.5, ((j, "Z"),)) for j in range(n))], n)


def sz_operator(n: int) -> np.ndarray:
    # S_z = sum_q (n_up - n_dn)/2 = sum_q (Z_dn - Z_up)/4
    terms = []
    for q in range(n // 2):
        terms.append(PauliTerm(-0.25, ((2 * q, "Z"),)))
        terms.append(PauliTerm(0.25, ((2 * q + 1, "Z"),)))
    return hamiltonian_matrix(terms, n)


def _distinct_gap(energies, tol):
    e0 = energies[0]
    for e in energies[1:]:
        if e - e0 > tol:
            return float(e - e0)
    return float("nan")


def exact_eigs(terms: Sequence[PauliTerm], k: int = 6, n: int | None = None) -> EigenSolution:
    """Lowest ``k`` eigenpairs. ``gap`` is the first *distinct* level spacing."""
    n = n_qubits(terms) if n is None else n
    if n > MAX_QUBITS:
        raise ResourceError(f"{n} qubits exceeds the exact-diagonalization bound of {MAX_QUBITS}")
    dim = 2 ** n
    k = min(k, dim)
    if n <= DENSE_LIMIT:
        w, v = np.linalg.eigh(hamiltonian_matrix(terms, n))
        energies, states = w, v
    else:
        h = hamiltonian_matrix(terms, n, sparse=True)
        w, v = scipy.sparse.linalg.eigsh(h, k=k + 4, which="SA", tol=1e-12)
        order = np.argsort(w)
        energies, states = w[order], v[:, order]
    tol = 1e-8 * max(1.0, abs(energies[0]))
    gap = _distinct_gap(energies, tol)
    return EigenSolution(energies=energies[:k].copy(), states=states[:, :k].copy(), gap=gap)


def _fix_phase(v):
    i = int(np.argmax(np.abs(v)))
    return v * (abs(v[i]) / v[i])


def select_target_states(terms: Sequence[PauliTerm], n: int | None = None, reference=None, tol: float = 1e-8):
    """Ground state and one first-excited state as dense unit vectors.

    A degenerate first excited level is resolved by taking, inside the
    degenerate subspace, the projection of ``reference`` if given, else the
    S_z eigenvector whose eigenvalue is closest to the ground state's
    (the S_z = 0 member of a triplet at half filling).
    Returns ``(psi_g, psi_ex, solution)`` where ``solution`` is the full
    spectrum.
    """
    n = n_qubits(terms) if n is None else n
    sol = exact_eigs(terms, k=2 ** min(n, DENSE_LIMIT), n=n)
    e = sol.energies
    scale = tol * max(1.0, abs(e[0]))
    ground_idx = np.flatnonzero(np.abs(e - e[0]) <= scale)
    ex_idx = np.flatnonzero(np.abs(e - (e[0] + sol.gap)) <= scale)
    psi_g = sol.states[:, ground_idx[0]]
    sub = sol.states[:, ex_idx]
    if len(ex_idx) == 1:
        psi_ex = sub[:, 0]
    elif reference is not None:
        proj = sub @ (sub.conj().T @ np.asarray(reference))
        psi_ex = proj / np.linalg.norm(proj)
    else:
        sz = sz_operator(n)
        sz_g = float(np.real(psi_g.conj() @ sz @ psi_g))
        w, c = np.linalg.eigh(sub.conj().T @ sz @ sub)
        j = int(np.argmin(np.abs(w - sz_g)))
        psi_ex = sub @ c[:, j]
    return _fix_phase(psi_g), _fix_phase(psi_ex), sol


def pauli_exp(term: PauliTerm, angle: float):
    """``exp(1j * angle * C * P)`` on the contiguous span of the term.

    Returns ``(first_qubit, matrix)``; the identity term yields a 1x1 phase
    with ``first_qubit`` None.
    """
    phi = angle * term.coefficient
    if term.is_identity:
        return None, np.array([[np.exp(1j * phi)]])
    lo, hi = term.support[0], term.support[-1]
    d = dict(term.ops)
    p = np.array([[1.0 + 0j]])
    for q in range(lo, hi + 1):
        p = np.kron(p, _PAULI[d.get(q, "I")])
    # P^2 = I for a Pauli string
    return lo, np.cos(phi) * np.eye(p.shape[0]) + 1j * np.sin(phi) * p


def pauli_expm_two_site(term: PauliTerm, angle: float) -> np.ndarray:
    """Dense ``exp(1j * angle * C * P)`` over the term's span (see ``pauli_exp``)."""
    return pauli_exp(term, angle)[1]
