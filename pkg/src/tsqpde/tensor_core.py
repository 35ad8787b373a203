"""Dense complex tensor kernels.

Tensors are plain ``numpy.ndarray`` objects of dtype ``complex128`` in
row-major (C) layout.  Every reshape in the package groups axes in that
order, so a matrix view ``t.reshape(prod(left), prod(right))`` always has the
leftmost axis as the most significant index.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .exceptions import ContractShapeError, DegenerateSpectrumError, PolarDegenerateError, ShapeError

__all__ = [
    "SVDResult",
    "as_tensor",
    "contract",
    "truncated_svd",
    "left_split",
    "polar_unitary",
    "expm_hermitian",
    "is_unitary",
]


def as_tensor(data) -> np.ndarray:
    t = np.asarray(data, dtype=np.complex128)
    if not np.all(np.isfinite(t)):
        raise ValueError("tensor entries must be finite")
    return t


def contract(a, b, axis_pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Sum over paired axes of ``a`` and ``b``.

    The result carries the unpaired axes of ``a`` followed by those of ``b``.
    """
    a = np.asarray(a)
    b = np.asarray(b)
    axes_a = [p[0] for p in axis_pairs]
    axes_b = [p[1] for p in axis_pairs]
    for i, j in zip(axes_a, axes_b):
        if a.shape[i] != b.shape[j]:
            raise ContractShapeError(
                f"axis {i} of a has extent {a.shape[i]} but axis {j} of b has {b.shape[j]}"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass(frozen=True)
class SVDResult:
    u: np.ndarray
    s: np.ndarray
    vdag: np.ndarray
    truncation_error: float

    @property
    def rank(self) -> int:
        return len(self.s)


def _svd(m: np.ndarray):
    try:
        return np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge; gesvd is slower but robust
        return scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")


def truncated_svd(t, split: int, max_bond: int | None = None, cutoff: float = 0.0) -> SVDResult:
    """SVD of ``t`` viewed as a matrix (axes[:split], axes[split:]).

    Singular values with ``s_k / s_0 <= cutoff`` are discarded, then at most
    ``max_bond`` are kept.  ``u`` has shape ``t.shape[:split] + (k,)`` and
    ``vdag`` has shape ``(k,) + t.shape[split:]``.
    """
    t = np.asarray(t)
    if not 0 < split < t.ndim:
        raise ShapeError(f"split {split} does not partition {t.ndim} axes into two groups")
    left, right = t.shape[:split], t.shape[split:]
    m = t.reshape(int(np.prod(left)), int(np.prod(right)))
    u, s, vh = _svd(m)
    if s.size == 0 or s[0] == 0.0:
        raise DegenerateSpectrumError("cannot decompose an all-zero tensor")
    keep = int(np.count_nonzero(s / s[0] > cutoff))
    keep = max(keep, 1)
    if max_bond is not None:
        keep = min(keep, int(max_bond))
    err = float(np.sqrt(np.sum(s[keep:] ** 2)))
    return SVDResult(
        u=u[:, :keep].reshape(left + (keep,)),
        s=s[:keep],
        vdag=vh[:keep].reshape((keep,) + right),
        truncation_error=err,
    )


def left_split(t, split: int, max_bond: int | None = None, cutoff: float = 0.0) -> tuple[np.ndarray, np.ndarray, float]:
    """Truncated factorization ``t ~ u @ r`` with ``u`` an isometry and ``r = u^dagger t``.

    Equivalent to ``truncated_svd`` followed by ``r = s * vdag``, but only the
    left factor needs to be orthonormal, which lets wide matrices skip the
    full SVD (see ``_gram_frame``).  Directions are ranked by the row norms of
    ``r``; the truncation error is exact for the basis used.  Returns
    ``(u, r, truncation_error)``.
    """
    t = np.asarray(t)
    if not 0 < split < t.ndim:
        raise ShapeError(f"split {split} does not partition {t.ndim} axes into two groups")
    left, right = t.shape[:split], t.shape[split:]
    m = t.reshape(int(np.prod(left)), int(np.prod(right)))
    if not _wide(m):
        res = truncated_svd(t, split, max_bond, cutoff)
        return res.u, res.s.reshape((-1,) + (1,) * len(right)) * res.vdag, res.truncation_error
    scale = float(np.linalg.norm(m))
    if scale == 0.0:
        raise DegenerateSpectrumError("cannot decompose an all-zero tensor")
    v, r = _gram_frame(m, _EPS_FLOOR * scale)
    norms = np.linalg.norm(r, axis=1)
    order = np.argsort(norms)[::-1]
    norms = norms[order]
    keep = max(int(np.count_nonzero(norms / norms[0] > cutoff)), 1)
    if max_bond is not None:
        keep = min(keep, int(max_bond))
    err = float(np.sqrt(np.sum(norms[keep:] ** 2)))
    idx = order[:keep]
    return v[:, idx].reshape(left + (keep,)), r[idx].reshape((keep,) + right), err


# Gram route: at least this many rows and columns >= ratio * rows, where it
# beats a full SVD several times over
_GRAM_MIN = 64
_GRAM_RATIO = 4
# row norms from one eigh of m m^dagger are trustworthy down to ~1e-9 of the
# largest; directions below this fraction are re-resolved in their complement
_RELIABLE = 1e-6
_EPS_FLOOR = 1e-15


def _wide(m) -> bool:
    return m.shape[0] >= _GRAM_MIN and m.shape[1] >= _GRAM_RATIO * m.shape[0]


def _gram_frame(m: np.ndarray, floor: float) -> tuple[np.ndarray, np.ndarray]:
    """Unitary ``v`` (rows x rows) ranking the row space of ``m``, and ``v^dagger m``.

    One ``eigh`` of ``m m^dagger`` resolves the strong directions; the weak
    ones are redone recursively inside the orthonormal complement, so the
    frame stays exactly unitary and singular values far below
    ``sqrt(eps) * s_0`` are still ordered.  Blocks below ``floor`` are
    returned as they are.
    """
    if not _wide(m):
        u, _, _ = np.linalg.svd(m, full_matrices=m.shape[0] > m.shape[1])
        return u, u.conj().T @ m
    _, v = np.linalg.eigh(m @ m.conj().T)
    v = v[:, ::-1]
    r = v.conj().T @ m
    norms = np.linalg.norm(r, axis=1)
    good = norms > _RELIABLE * norms.max()
    if good.all():
        return v, r
    weak, sub = v[:, ~good], r[~good]
    if np.linalg.norm(sub) <= floor:
        return v, r
    y, ry = _gram_frame(sub, floor)
    return np.concatenate([v[:, good], weak @ y], axis=1), np.concatenate([r[good], ry])


def polar_unitary(g, rcond: float = 1e-13) -> np.ndarray:
    """Unitary polar factor ``U V^dagger`` of ``g = U S V^dagger``.

    This is the unitary ``W`` maximising ``Re Tr[g^dagger W]``.
    """
    g = np.asarray(g, dtype=np.complex128)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ShapeError(f"polar_unitary needs a square matrix, got shape {g.shape}")
    u, s, vh = _svd(g)
    if s[0] == 0.0 or s[-1] <= rcond * s[0]:
        raise PolarDegenerateError("matrix is rank deficient; polar factor is not unique")
    return u @ vh


def expm_hermitian(h, angle: float = 1.0) -> np.ndarray:
    """``exp(1j * angle * h)`` for Hermitian ``h`` via eigendecomposition."""
    h = np.asarray(h, dtype=np.complex128)
    w, v = np.linalg.eigh(h)
    return (v * np.exp(1j * angle * w)) @ v.conj().T


def is_unitary(u, atol: float = 1e-12) -> bool:
    u = np.asarray(u)
    return np.allclose(u.conj().T @ u, np.eye(u.shape[0]), atol=atol)
