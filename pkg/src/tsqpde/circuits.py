"""Brick-wall circuits of nearest-neighbour two-qubit gates.

A gate on wires ``(q, q+1)`` is a 4x4 unitary whose row/column index is
``2*b_q + b_{q+1}``.  Layer ``k`` with offset ``o`` holds gates on pairs
``o, o+2, o+4, ...``.  The circuit unitary is ``L_d ... L_2 L_1`` with layer
1 applied first.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ShapeError
from .tensor_core import polar_unitary

__all__ = ["BrickWallCircuit", "init_brickwall", "apply_gate_dense"]


@dataclass
class BrickWallCircuit:
    width: int
    offsets: list[int]
    gates: list[list[np.ndarray]] = field(repr=False)

    def __post_init__(self):
        if len(self.offsets) != len(self.gates):
            raise ShapeError("one offset per layer is required")
        for k, (o, layer) in enumerate(zip(self.offsets, self.gates)):
            if len(layer) != len(self.pairs(k)):
                raise ShapeError(f"layer {k} has {len(layer)} gates, expected {len(self.pairs(k))}")
        self.gates = [[np.asarray(g, dtype=np.complex128).reshape(4, 4) for g in layer] for layer in self.gates]

    @classmethod
    def identity(cls, width: int, depth: int, first_offset: int = 0) -> "BrickWallCircuit":
        offsets = [(first_offset + k) % 2 for k in range(depth)]
        gates = [[np.eye(4, dtype=np.complex128) for _ in range(offsets[k], width - 1, 2)] for k in range(depth)]
        return cls(width, offsets, gates)

    @property
    def depth(self) -> int:
        return len(self.offsets)

    @property
    def n_gates(self) -> int:
        return sum(len(layer) for layer in self.gates)

    def pairs(self, k: int) -> list[int]:
        return list(range(self.offsets[k], self.width - 1, 2))

    def layers_on_pair(self, q: int) -> list[int]:
        return [k for k in range(self.depth) if q in self.pairs(k)]

    def gate(self, k: int, q: int) -> np.ndarray:
        return self.gates[k][(q - self.offsets[k]) // 2]

    def set_gate(self, k: int, q: int, g) -> None:
        self.gates[k][(q - self.offsets[k]) // 2] = np.asarray(g, dtype=np.complex128)

    def copy(self) -> "BrickWallCircuit":
        return BrickWallCircuit(self.width, list(self.offsets), [[g.copy() for g in layer] for layer in self.gates])

    def gate_sequence(self, adjoint: bool = False) -> list[tuple[int, np.ndarray]]:
        """``(q, gate)`` in application order, snaking through each layer."""
        seq = []
        layers = range(self.depth - 1, -1, -1) if adjoint else range(self.depth)
        for n_done, k in enumerate(layers):
            items = list(zip(self.pairs(k), self.gates[k]))
            if n_done % 2:
                items.reverse()
            for q, g in items:
                seq.append((q, g.conj().T if adjoint else g))
        return seq

    def dagger(self) -> "BrickWallCircuit":
        return BrickWallCircuit(
            self.width,
            list(reversed(self.offsets)),
            [[g.conj().T for g in layer] for layer in reversed(self.gates)],
        )

    def then(self, other: "BrickWallCircuit") -> "BrickWallCircuit":
        """Circuit running ``self`` first and ``other`` afterwards."""
        if other.width != self.width:
            raise ShapeError("cannot concatenate circuits of different widths")
        return BrickWallCircuit(
            self.width,
            list(self.offsets) + list(other.offsets),
            [[g.copy() for g in layer] for layer in self.gates + other.gates],
        )

    def apply(self, psi: np.ndarray, adjoint: bool = False, offset: int = 0) -> np.ndarray:
        """Apply to a dense statevector on ``n >= width + offset`` qubits."""
        psi = np.asarray(psi, dtype=np.complex128)
        n = int(round(np.log2(psi.size)))
        if self.width + offset > n:
            raise ShapeError("circuit does not fit the statevector")
        t = psi.reshape((2,) * n)
        for q, g in self.gate_sequence(adjoint=adjoint):
            t = apply_gate_dense(t, g, q + offset)
        return t.reshape(-1)

    def to_dense(self) -> np.ndarray:
        dim = 2 ** self.width
        out = np.eye(dim, dtype=np.complex128).reshape((2,) * self.width + (dim,))
        for q, g in self.gate_sequence():
            out = apply_gate_dense(out, g, q)
        return out.reshape(dim, dim)

    def is_unitary(self, atol: float = 1e-12) -> bool:
        eye = np.eye(4)
        return all(np.allclose(g.conj().T @ g, eye, atol=atol) for layer in self.gates for g in layer)

    # -- serialization ------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "width": self.width,
            "offsets": list(self.offsets),
            "gates": [[[g.real.tolist(), g.imag.tolist()] for g in layer] for layer in self.gates],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "BrickWallCircuit":
        gates = [[np.asarray(re) + 1j * np.asarray(im) for re, im in layer] for layer in d["gates"]]
        return cls(int(d["width"]), [int(o) for o in d["offsets"]], gates)

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()))

    @classmethod
    def load(cls, path) -> "BrickWallCircuit":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_gate_list(self) -> str:
        """Plain-text gate list for replay in other tools.

        Header line ``# brickwall width=<n> depth=<d>``, then one line per
        gate in application order::

            U2 <layer> <q0> <q1> <re00> <im00> <re01> <im01> ... <re33> <im33>

        Entries are row-major with row/column index ``2*b_q0 + b_q1``.
        """
        lines = [f"# brickwall width={self.width} depth={self.depth}"]
        for k in range(self.depth):
            for q, g in zip(self.pairs(k), self.gates[k]):
                vals = " ".join(f"{z.real:.17g} {z.imag:.17g}" for z in g.reshape(-1))
                lines.append(f"U2 {k} {q} {q + 1} {vals}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_gate_list(cls, text: str) -> "BrickWallCircuit":
        width = None
        layers: dict[int, list[tuple[int, np.ndarray]]] = {}
        for line in text.splitlines():
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                for tok in line[1:].split():
                    if tok.startswith("width="):
                        width = int(tok.split("=")[1])
                continue
            parts = line.split()
            if parts[0] != "U2" or len(parts) != 36:
                raise ValueError(f"malformed gate line: {line[:40]}...")
            k, q0, q1 = int(parts[1]), int(parts[2]), int(parts[3])
            if q1 != q0 + 1:
                raise ValueError("only nearest-neighbour gates are supported")
            vals = np.array([float(x) for x in parts[4:]])
            g = (vals[0::2] + 1j * vals[1::2]).reshape(4, 4)
            layers.setdefault(k, []).append((q0, g))
        if width is None:
            raise ValueError("missing width header")
        offsets, gates = [], []
        for k in sorted(layers):
            items = sorted(layers[k], key=lambda x: x[0])
            offsets.append(items[0][0] % 2)
            gates.append([g for _, g in items])
        return cls(width, offsets, gates)


def apply_gate_dense(t: np.ndarray, g: np.ndarray, q: int) -> np.ndarray:
    """Apply a 4x4 gate to axes (q, q+1) of a tensor with leading qubit axes."""
    g4 = np.asarray(g).reshape(2, 2, 2, 2)
    out = np.tensordot(g4, t, axes=([2, 3], [q, q + 1]))
    return np.moveaxis(out, (0, 1), (q, q + 1))


def init_brickwall(width: int, depth: int, perturbation: float = 0.01, seed=None, first_offset: int = 0) -> BrickWallCircuit:
    """Brick-wall circuit of gates ``polar(I + eps * R)`` near the identity.

    ``R`` has i.i.d. complex normal entries of unit variance drawn from
    ``numpy.random.default_rng(seed)``.
    """
    if depth < 1:
        raise ValueError("depth must be >= 1")
    if perturbation < 0:
        raise ValueError("perturbation must be non-negative")
    rng = np.random.default_rng(seed)
    circ = BrickWallCircuit.identity(width, depth, first_offset)
    if perturbation == 0:
        return circ
    for layer in circ.gates:
        for j in range(len(layer)):
            r = (rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))) / np.sqrt(2)
            layer[j] = polar_unitary(np.eye(4) + perturbation * r)
    return circ
