"""Open-boundary matrix product states and operators.

Index conventions
-----------------
* MPS site tensors have legs ``(left, phys, right)``.
* MPO site tensors have legs ``(left, out, in, right)``; as a matrix the
  operator maps ``in`` (column) to ``out`` (row).
* Site 0 is the most significant qubit of the dense statevector, matching a
  row-major reshape of the ``2**n`` vector into ``(2,) * n``.

Objects are treated as immutable values: public operations return new
instances and never modify their inputs.  Site arrays are shared between
copies, so callers must not write into ``tensors[i]`` in place.
"""

from __future__ import annotations

import io
from typing import Iterable, Sequence

import numpy as np

from .exceptions import ShapeError
from .tensor_core import left_split, truncated_svd

__all__ = [
    "MPS",
    "MPO",
    "inner",
    "expectation",
    "apply_mpo",
    "mpo_product",
    "superpose_ancilla",
    "statevector_to_mps",
    "circuit_to_mps",
    "circuit_to_mpo",
    "save",
    "load",
]


class _TensorTrain:
    """Shared canonical-form machinery for MPS and MPO."""

    _nphys = 1

    def __init__(self, tensors: Sequence[np.ndarray], center: int | None = None, truncation_error: float = 0.0):
        tensors = [np.asarray(t, dtype=np.complex128) for t in tensors]
        if not tensors:
            raise ShapeError("a tensor train needs at least one site")
        for i, t in enumerate(tensors):
            if t.ndim != self._nphys + 2:
                raise ShapeError(f"site {i} has {t.ndim} legs, expected {self._nphys + 2}")
        if tensors[0].shape[0] != 1 or tensors[-1].shape[-1] != 1:
            raise ShapeError("boundary bonds must have extent 1")
        for i in range(len(tensors) - 1):
            if tensors[i].shape[-1] != tensors[i + 1].shape[0]:
                raise ShapeError(f"bond mismatch between sites {i} and {i + 1}")
        self.tensors = tensors
        self.center = center
        self.truncation_error = float(truncation_error)

    def __len__(self):
        return len(self.tensors)

    @property
    def length(self) -> int:
        return len(self.tensors)

    @property
    def bond_dims(self) -> list[int]:
        return [t.shape[-1] for t in self.tensors[:-1]]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims, default=1)

    def copy(self):
        new = object.__new__(type(self))
        new.tensors = list(self.tensors)
        new.center = self.center
        new.truncation_error = self.truncation_error
        return new

    # -- in-place helpers, only used on private working copies -------------

    def _flat(self, i):
        t = self.tensors[i]
        return t.reshape(t.shape[0], -1, t.shape[-1])

    def _set_flat(self, i, flat, phys_shape):
        self.tensors[i] = flat.reshape((flat.shape[0],) + phys_shape + (flat.shape[-1],))

    def _phys_shape(self, i):
        return self.tensors[i].shape[1:-1]

    def _shift_right(self, i):
        """QR at site i, absorbing R into site i+1."""
        a = self._flat(i)
        l, d, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l * d, r))
        self._set_flat(i, q.reshape(l, d, q.shape[1]), self._phys_shape(i))
        nxt = self.tensors[i + 1]
        self.tensors[i + 1] = np.tensordot(rr, nxt, axes=(1, 0))

    def _shift_left(self, i):
        """LQ at site i, absorbing L into site i-1."""
        a = self._flat(i)
        l, d, r = a.shape
        q, rr = np.linalg.qr(a.reshape(l, d * r).T)
        # a = rr.T @ q.T
        self._set_flat(i, q.T.reshape(q.shape[1], d, r), self._phys_shape(i))
        prev = self.tensors[i - 1]
        self.tensors[i - 1] = np.tensordot(prev, rr.T, axes=(prev.ndim - 1, 0))

    def _move_center(self, target: int):
        n = len(self.tensors)
        if self.center is None:
            for i in range(target):
                self._shift_right(i)
            for i in range(n - 1, target, -1):
                self._shift_left(i)
        elif self.center < target:
            for i in range(self.center, target):
                self._shift_right(i)
        else:
            for i in range(self.center, target, -1):
                self._shift_left(i)
        self.center = target

    def _norm_at_center(self):
        return float(np.linalg.norm(self.tensors[self.center]))

    def _compress(self, max_bond=None, cutoff=0.0):
        """Left-canonicalise, then truncate right-to-left. Center ends at 0."""
        n = len(self.tensors)
        self._move_center(n - 1)
        total = 0.0
        for i in range(n - 1, 0, -1):
            a = self._flat(i)
            l, d, r = a.shape
            res = truncated_svd(a.reshape(l, d * r), 1, max_bond=max_bond, cutoff=cutoff)
            norm = float(np.sqrt(np.sum(res.s ** 2) + res.truncation_error ** 2))
            if norm > 0:
                total += res.truncation_error / norm
            self._set_flat(i, res.vdag.reshape(-1, d, r), self._phys_shape(i))
            us = res.u * res.s
            prev = self.tensors[i - 1]
            self.tensors[i - 1] = np.tensordot(prev, us, axes=(prev.ndim - 1, 0))
        self.center = 0
        self.truncation_error += total
        return total

    def _apply_local(self, q, nsites, op, max_bond=None, cutoff=0.0, direction="right"):
        """Contract an operator into sites q .. q+nsites-1 and re-split.

        ``op`` maps the merged tensor ``(l, *p_q, ..., *p_last, r)`` to a new
        tensor of the same shape.  The orthogonality center ends on the last
        site of the window ('right') or the first ('left').
        """
        last = q + nsites - 1
        if self.center is None or not q <= self.center <= last:
            self._move_center(q if self.center is None or self.center < q else last)
        theta = self.tensors[q]
        for j in range(q + 1, last + 1):
            theta = np.tensordot(theta, self.tensors[j], axes=(theta.ndim - 1, 0))
        theta = op(theta)
        phys = [self._phys_shape(j) for j in range(q, last + 1)]
        if direction == "right":
            for j in range(nsites - 1):
                res = truncated_svd(theta, 1 + len(phys[j]), max_bond=max_bond, cutoff=cutoff)
                self._record(res)
                self.tensors[q + j] = res.u
                theta = _scale_rows(res.s, res.vdag)
            self.tensors[last] = theta
            self.center = last
        else:
            for j in range(nsites - 1, 0, -1):
                res = truncated_svd(theta, theta.ndim - 1 - len(phys[j]), max_bond=max_bond, cutoff=cutoff)
                self._record(res)
                self.tensors[q + j] = res.vdag
                theta = res.u * res.s
            self.tensors[q] = theta
            self.center = q

    def _record(self, res):
        norm = float(np.sqrt(np.sum(res.s ** 2) + res.truncation_error ** 2))
        if norm > 0:
            self.truncation_error += res.truncation_error / norm

    def _apply_two_site(self, q, op, max_bond=None, cutoff=0.0, direction="right"):
        self._apply_local(q, 2, op, max_bond, cutoff, direction)

    # -- public, value-returning API ----------------------------------------

    def canonicalize(self, center: int = 0):
        new = self.copy()
        new._move_center(center)
        return new

    def compress(self, max_bond: int | None = None, cutoff: float = 0.0):
        new = self.copy()
        new._compress(max_bond=max_bond, cutoff=cutoff)
        return new

    def norm(self) -> float:
        new = self.copy()
        new._move_center(0 if self.center is None else self.center)
        return new._norm_at_center()

    def normalize(self):
        new = self.copy()
        if new.center is None:
            new._move_center(len(new) - 1)
        nrm = new._norm_at_center()
        new.tensors[new.center] = new.tensors[new.center] / nrm
        return new

    def __mul__(self, scalar):
        new = self.copy()
        i = 0 if new.center is None else new.center
        new.tensors[i] = new.tensors[i] * scalar
        return new

    __rmul__ = __mul__


class MPS(_TensorTrain):
    """Matrix product state with site tensors ``(left, 2, right)``."""

    _nphys = 1

    @classmethod
    def product_state(cls, bits: Iterable[int]) -> "MPS":
        tensors = []
        for b in bits:
            t = np.zeros((1, 2, 1), dtype=np.complex128)
            t[0, int(b), 0] = 1.0
            tensors.append(t)
        return cls(tensors, center=0)

    @classmethod
    def zeros(cls, n: int) -> "MPS":
        return cls.product_state([0] * n)

    @classmethod
    def from_dense(cls, v, cutoff: float = 0.0, max_bond: int | None = None) -> "MPS":
        return statevector_to_mps(v, cutoff=cutoff, max_bond=max_bond)

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0]
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=(out.ndim - 1, 0))
        return out.reshape(-1)

    def conj(self) -> "MPS":
        new = self.copy()
        new.tensors = [t.conj() for t in self.tensors]
        return new

    def apply_gate(self, gate, q: int, max_bond=None, cutoff=0.0, direction="right") -> "MPS":
        new = self.copy()
        new._apply_gate(gate, q, max_bond, cutoff, direction)
        return new

    def _apply_gate(self, gate, q, max_bond=None, cutoff=0.0, direction="right"):
        gate = np.asarray(gate)
        ns = _n_gate_sites(gate)
        if ns == 1:
            self._apply_single(gate, q)
            return
        g = gate.reshape((2,) * (2 * ns))

        def op(theta):
            # theta (l, p_1..p_s, r)
            out = np.tensordot(g, theta, axes=(list(range(ns, 2 * ns)), list(range(1, ns + 1))))
            # (o_1..o_s, l, r)
            return np.moveaxis(out, ns, 0)

        self._apply_local(q, ns, op, max_bond, cutoff, direction)

    def _apply_single(self, gate, q):
        self.tensors[q] = np.einsum("oi,lir->lor", np.asarray(gate), self.tensors[q])


class MPO(_TensorTrain):
    """Matrix product operator with site tensors ``(left, out, in, right)``."""

    _nphys = 2

    @classmethod
    def identity(cls, n: int) -> "MPO":
        t = np.eye(2, dtype=np.complex128).reshape(1, 2, 2, 1)
        return cls([t] * n, center=None)

    @classmethod
    def from_dense(cls, op, cutoff: float = 0.0, max_bond: int | None = None) -> "MPO":
        op = np.asarray(op, dtype=np.complex128)
        dim = op.shape[0]
        n = int(round(np.log2(dim)))
        if 2 ** n != dim or op.shape != (dim, dim):
            raise ShapeError(f"operator shape {op.shape} is not 2^n x 2^n")
        t = op.reshape((2,) * (2 * n))
        # interleave (o0, i0, o1, i1, ...)
        order = [k for j in range(n) for k in (j, n + j)]
        t = t.transpose(order).reshape((4,) * n)
        psi = statevector_to_mps(t.reshape(-1), cutoff=cutoff, max_bond=max_bond, phys_dim=4)
        tensors = [a.reshape(a.shape[0], 2, 2, a.shape[-1]) for a in psi.tensors]
        return cls(tensors, center=psi.center, truncation_error=psi.truncation_error)

    @classmethod
    def from_product(cls, factors: Sequence[np.ndarray]) -> "MPO":
        return cls([np.asarray(f, dtype=np.complex128).reshape(1, 2, 2, 1) for f in factors])

    def to_dense(self) -> np.ndarray:
        out = self.tensors[0]
        for t in self.tensors[1:]:
            out = np.tensordot(out, t, axes=(out.ndim - 1, 0))
        n = len(self.tensors)
        out = out.reshape((2,) * (2 * n))
        order = list(range(0, 2 * n, 2)) + list(range(1, 2 * n, 2))
        return out.transpose(order).reshape(2 ** n, 2 ** n)

    def dagger(self) -> "MPO":
        new = self.copy()
        new.tensors = [t.conj().transpose(0, 2, 1, 3) for t in self.tensors]
        return new

    def trace(self) -> complex:
        env = np.ones(1, dtype=np.complex128)
        for t in self.tensors:
            env = env @ np.einsum("looR->lR", t)
        return complex(env[0])

    def frobenius_norm(self) -> float:
        return self.norm()

    def embed(self, n_total: int, offset: int) -> "MPO":
        """Pad with identity sites so this operator acts on sites offset.. of n_total."""
        if offset < 0 or offset + len(self) > n_total:
            raise ShapeError("embedding does not fit")
        eye = np.eye(2, dtype=np.complex128).reshape(1, 2, 2, 1)
        tensors = [eye] * offset + list(self.tensors) + [eye] * (n_total - offset - len(self))
        center = None if self.center is None else self.center + offset
        return MPO(tensors, center=center, truncation_error=self.truncation_error)

    def apply_gate(self, gate, q: int, side: str = "left", max_bond=None, cutoff=0.0, direction="right") -> "MPO":
        """Multiply by a two-qubit gate on sites (q, q+1).

        ``side='left'`` gives ``G @ self``; ``side='right'`` gives ``self @ G``.
        """
        new = self.copy()
        new._apply_gate(gate, q, side, max_bond, cutoff, direction)
        return new

    def _apply_gate(self, gate, q, side="left", max_bond=None, cutoff=0.0, direction="right"):
        gate = np.asarray(gate)
        ns = _n_gate_sites(gate)
        if ns == 1:
            self._apply_single(gate, q, side)
            return
        g = gate.reshape((2,) * (2 * ns))
        outs = [1 + 2 * j for j in range(ns)]
        ins = [2 + 2 * j for j in range(ns)]

        if side == "left":
            def op(theta):
                # theta (l, o_1, i_1, ..., o_s, i_s, r)
                res = np.tensordot(g, theta, axes=(list(range(ns, 2 * ns)), outs))
                # (a_1..a_s, l, i_1..i_s, r)
                order = [ns] + [k for j in range(ns) for k in (j, ns + 1 + j)] + [2 * ns + 1]
                return res.transpose(order)
        else:
            def op(theta):
                res = np.tensordot(theta, g, axes=(ins, list(range(ns))))
                # (l, o_1..o_s, r, c_1..c_s)
                order = [0] + [k for j in range(ns) for k in (1 + j, ns + 2 + j)] + [ns + 1]
                return res.transpose(order)

        self._apply_local(q, ns, op, max_bond, cutoff, direction)

    def _apply_single(self, gate, q, side="left"):
        gate = np.asarray(gate)
        if side == "left":
            self.tensors[q] = np.einsum("ao,loir->lair", gate, self.tensors[q])
        else:
            self.tensors[q] = np.einsum("loir,ic->locr", self.tensors[q], gate)


def _n_gate_sites(gate):
    dim = gate.shape[0]
    ns = int(round(np.log2(dim)))
    if gate.shape != (dim, dim) or 2 ** ns != dim:
        raise ShapeError(f"gate shape {gate.shape} is not 2^k x 2^k")
    return ns


def _scale_rows(s, vdag):
    return s.reshape((-1,) + (1,) * (vdag.ndim - 1)) * vdag


# ---------------------------------------------------------------------------


def _check_lengths(a, b):
    if len(a) != len(b):
        raise ShapeError(f"length mismatch: {len(a)} vs {len(b)}")


def inner(a: MPS, b: MPS) -> complex:
    """``<a|b>`` by left-to-right transfer contraction."""
    _check_lengths(a, b)
    env = np.ones((1, 1), dtype=np.complex128)
    for x, y in zip(a.tensors, b.tensors):
        env = np.tensordot(env, x.conj(), axes=(0, 0))  # (b_l, p, a_r)
        env = np.tensordot(env, y, axes=([0, 1], [0, 1]))  # (a_r, b_r)
    return complex(env[0, 0])


def expectation(bra: MPS, op: MPO, ket: MPS, offset: int = 0) -> complex:
    """``<bra| (I x op x I) |ket>`` with ``op`` acting from site ``offset``."""
    _check_lengths(bra, ket)
    if offset < 0 or offset + len(op) > len(ket):
        raise ShapeError("operator does not fit inside the state")
    env = np.ones((1, 1, 1), dtype=np.complex128)  # (bra, op, ket)
    for j, (x, y) in enumerate(zip(bra.tensors, ket.tensors)):
        k = j - offset
        if 0 <= k < len(op):
            w = op.tensors[k]
            t = np.tensordot(env, x.conj(), axes=(0, 0))  # (o_l, k_l, p, b_r)
            t = np.tensordot(t, w, axes=([0, 2], [0, 1]))  # (k_l, b_r, in, o_r)
            env = np.tensordot(t, y, axes=([0, 2], [0, 1]))  # (b_r, o_r, k_r)
        else:
            t = np.tensordot(env, x.conj(), axes=(0, 0))  # (o, k_l, p, b_r)
            t = np.tensordot(t, y, axes=([1, 2], [0, 1]))  # (o, b_r, k_r)
            env = t.transpose(1, 0, 2)
    return complex(env.reshape(-1)[0])


def _zip_up(upper_tensors, lower_tensors, contract_site, phys_shape, max_bond, cutoff):
    """Left-to-right zip-up of a product of two tensor trains.

    ``contract_site(carry, A, B)`` returns ``(x, *phys, a_r, b_r)``.
    """
    carry = np.ones((1, 1, 1), dtype=np.complex128)
    out = []
    err = 0.0
    n = len(upper_tensors)
    for j in range(n):
        t = contract_site(carry, upper_tensors[j], lower_tensors[j])
        if j == n - 1:
            out.append(t.reshape(t.shape[0], *phys_shape, 1))
            break
        x = t.shape[0]
        ar, br = t.shape[-2], t.shape[-1]
        u, r, trunc = left_split(t.reshape(x, *phys_shape, ar * br), 1 + len(phys_shape), max_bond=max_bond,
                                 cutoff=cutoff)
        norm = float(np.sqrt(np.sum(np.abs(r) ** 2) + trunc ** 2))
        if norm > 0:
            err += trunc / norm
        out.append(u)
        carry = r.reshape(-1, ar, br)
    return out, err


def _mpo_mps_site(carry, w, b):
    # carry (x, w_l, b_l); w (w_l, o, i, w_r); b (b_l, i, b_r)
    t = np.tensordot(carry, w, axes=(1, 0))  # (x, b_l, o, i, w_r)
    t = np.tensordot(t, b, axes=([1, 3], [0, 1]))  # (x, o, w_r, b_r)
    return t


def _mpo_mpo_site(carry, a, b):
    # a (a_l, o, k, a_r); b (b_l, k, i, b_r)
    t = np.tensordot(carry, a, axes=(1, 0))  # (x, b_l, o, k, a_r)
    t = np.tensordot(t, b, axes=([1, 3], [0, 1]))  # (x, o, a_r, i, b_r)
    return t.transpose(0, 1, 3, 2, 4)


def apply_mpo(o: MPO, s: MPS, max_bond: int | None = None, cutoff: float = 0.0) -> MPS:
    """Compressed ``o|s>``; the result accumulates the truncation error."""
    _check_lengths(o, s)
    o_c = o.canonicalize(0)
    s_c = s.canonicalize(0)
    tensors, err = _zip_up(o_c.tensors, s_c.tensors, _mpo_mps_site, (2,), max_bond, cutoff * 0.1)
    res = MPS(tensors, center=len(tensors) - 1, truncation_error=err + o.truncation_error + s.truncation_error)
    res._compress(max_bond=max_bond, cutoff=cutoff)
    return res


def mpo_product(a: MPO, b: MPO, max_bond: int | None = None, cutoff: float = 0.0) -> MPO:
    """Compressed MPO for the operator product ``a @ b``."""
    _check_lengths(a, b)
    a_c = a.canonicalize(0)
    b_c = b.canonicalize(0)
    tensors, err = _zip_up(a_c.tensors, b_c.tensors, _mpo_mpo_site, (2, 2), max_bond, cutoff * 0.1)
    res = MPO(tensors, center=len(tensors) - 1, truncation_error=err + a.truncation_error + b.truncation_error)
    res._compress(max_bond=max_bond, cutoff=cutoff)
    return res


def statevector_to_mps(v, cutoff: float = 0.0, max_bond: int | None = None, phys_dim: int = 2) -> MPS:
    """Exact (at cutoff 0) MPS of a dense vector by successive SVDs."""
    v = np.asarray(v, dtype=np.complex128).reshape(-1)
    n = int(round(np.log(v.size) / np.log(phys_dim))) if v.size > 1 else 0
    if n < 1 or phys_dim ** n != v.size:
        raise ShapeError(f"vector length {v.size} is not a power of {phys_dim}")
    tensors = []
    rest = v.reshape(1, -1)
    err = 0.0
    for _ in range(n - 1):
        left = rest.shape[0]
        res = truncated_svd(rest.reshape(left * phys_dim, -1), 1, max_bond=max_bond, cutoff=cutoff)
        err += res.truncation_error
        tensors.append(res.u.reshape(left, phys_dim, -1))
        rest = res.s[:, None] * res.vdag
    tensors.append(rest.reshape(rest.shape[0], phys_dim, 1))
    return MPS(tensors, center=n - 1, truncation_error=err)


def superpose_ancilla(g: MPS, e: MPS) -> MPS:
    """Normalised, left-orthogonalised ``|0>|g> + |1>|e>`` with the ancilla on site 0."""
    _check_lengths(g, e)
    n = len(g)
    anc = np.zeros((1, 2, 2), dtype=np.complex128)
    anc[0, 0, 0] = 1.0
    anc[0, 1, 1] = 1.0
    tensors = [anc]
    for j, (a, b) in enumerate(zip(g.tensors, e.tensors)):
        la, _, ra = a.shape
        lb, _, rb = b.shape
        if j == n - 1:
            t = np.zeros((la + lb, 2, 1), dtype=np.complex128)
            t[:la] = a
            t[la:] = b
        else:
            t = np.zeros((la + lb, 2, ra + rb), dtype=np.complex128)
            t[:la, :, :ra] = a
            t[la:, :, ra:] = b
        tensors.append(t)
    psi = MPS(tensors)
    psi._move_center(n)
    psi.tensors[n] = psi.tensors[n] / psi._norm_at_center()
    return psi


def circuit_to_mps(circuit, state: MPS, max_bond: int | None = None, cutoff: float = 0.0, offset: int = 0, adjoint: bool = False) -> MPS:
    """Apply a brick-wall circuit (optionally its adjoint) to ``state``.

    ``offset`` shifts the circuit's wire 0 onto site ``offset`` of the state.
    """
    if circuit.width + offset > len(state):
        raise ShapeError(f"circuit width {circuit.width} does not fit a {len(state)}-site state at offset {offset}")
    psi = state.copy()
    seq = [(q + offset, g) for q, g in circuit.gate_sequence(adjoint=adjoint)]
    for (q, gate), direction in zip(seq, _directions(seq)):
        psi._apply_gate(gate, q, max_bond=max_bond, cutoff=cutoff, direction=direction)
    return psi


def circuit_to_mpo(circuit, max_bond: int | None = None, cutoff: float = 0.0, adjoint: bool = False) -> MPO:
    """MPO of the circuit unitary ``L_d ... L_1`` (or its adjoint)."""
    op = MPO.identity(circuit.width)
    apply_gates(op, circuit.gate_sequence(adjoint=adjoint), side="left", max_bond=max_bond, cutoff=cutoff)
    return op


def _directions(seq):
    """Leave the orthogonality center next to the following gate."""
    dirs = []
    for k, (q, _) in enumerate(seq):
        nxt = seq[k + 1][0] if k + 1 < len(seq) else q + 1
        dirs.append("left" if nxt < q else "right")
    return dirs


def apply_gates(train, seq, side=None, max_bond=None, cutoff=0.0):
    """Apply ``(q, gate)`` pairs in order to a private working copy, in place."""
    seq = list(seq)
    for (q, gate), direction in zip(seq, _directions(seq)):
        if side is None:
            train._apply_gate(gate, q, max_bond=max_bond, cutoff=cutoff, direction=direction)
        else:
            train._apply_gate(gate, q, side=side, max_bond=max_bond, cutoff=cutoff, direction=direction)
    return train


# -- serialization ------------------------------------------------------------

_FORMAT_VERSION = 1


def save(obj: _TensorTrain, path) -> None:
    """Write an MPS or MPO to a ``.npz`` container.

    Keys: ``kind`` ('mps'|'mpo'), ``version``, ``n_sites``, ``truncation_error``,
    and ``site_<i>`` holding little-endian complex128 arrays with the leg order
    documented in this module.
    """
    kind = "mps" if isinstance(obj, MPS) else "mpo"
    arrays = {f"site_{i}": np.ascontiguousarray(t, dtype="<c16") for i, t in enumerate(obj.tensors)}
    np.savez(
        path,
        kind=np.array(kind),
        version=np.array(_FORMAT_VERSION),
        n_sites=np.array(len(obj)),
        truncation_error=np.array(obj.truncation_error, dtype="<f8"),
        **arrays,
    )


def load(path):
    with np.load(path) as data:
        kind = str(data["kind"])
        n = int(data["n_sites"])
        tensors = [np.asarray(data[f"site_{i}"], dtype=np.complex128) for i in range(n)]
        err = float(data["truncation_error"])
    cls = MPS if kind == "mps" else MPO
    return cls(tensors, truncation_error=err)


def to_bytes(obj: _TensorTrain) -> bytes:
    buf = io.BytesIO()
    save(obj, buf)
    return buf.getvalue()


def from_bytes(blob: bytes):
    return load(io.BytesIO(blob))


def max_bond_possible(n: int) -> int:
    """Largest useful MPO bond on n sites: ``4**floor(n/2)``."""
    return 4 ** (n // 2)
