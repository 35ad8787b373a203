"""Input checks shared by the estimator classes.

sklearn's ``check_array`` rejects complex input, so complex series get their
own helpers here.
"""

from __future__ import annotations

import numpy as np

from .exceptions import InsufficientDataError, ShapeError


def check_complex_series(values, name: str = "values", min_length: int = 1) -> np.ndarray:
    arr = np.asarray(values, dtype=np.complex128)
    if arr.ndim != 1:
        raise ShapeError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if arr.size < min_length:
        raise InsufficientDataError(f"{name} needs at least {min_length} samples, got {arr.size}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def check_steps(steps, n: int) -> np.ndarray:
    arr = np.asarray(steps)
    if arr.shape != (n,):
        raise ShapeError(f"expected {n} step indices, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        if not np.allclose(arr, np.round(arr)):
            raise ValueError("step indices must be integers")
        arr = np.round(arr).astype(int)
    if n > 1 and np.any(np.diff(arr) <= 0):
        raise ValueError("step indices must be strictly increasing")
    return arr.astype(int)


def check_positive(value, name: str, strict: bool = True) -> float:
    v = float(value)
    if not np.isfinite(v) or (v <= 0 if strict else v < 0):
        raise ValueError(f"{name} must be {'positive' if strict else 'non-negative'}, got {value}")
    return v


def check_fitted(est, attr: str) -> None:
    if not hasattr(est, attr):
        raise AttributeError(f"{type(est).__name__} is not fitted yet; call fit first")
