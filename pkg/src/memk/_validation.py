"""Input validation helpers shared by the estimators and the functional API."""

from __future__ import annotations

import numbers

import numpy as np

from .errors import DimensionMismatch


def check_scalar(x, name, *, min_val=None, max_val=None, include_min=True, target_type=numbers.Real):
    """Validate a scalar parameter and return it as a Python number."""
    if isinstance(x, bool) or not isinstance(x, target_type):
        raise TypeError(f"{name} must be {target_type.__name__}, got {type(x).__name__}")
    if not np.isfinite(x):
        raise ValueError(f"{name} must be finite, got {x}")
    if min_val is not None:
        if (include_min and x < min_val) or (not include_min and x <= min_val):
            op = ">=" if include_min else ">"
            raise ValueError(f"{name} must be {op} {min_val}, got {x}")
    if max_val is not None and x > max_val:
        raise ValueError(f"{name} must be <= {max_val}, got {x}")
    return x


def check_1d(values, name="values"):
    arr = np.asarray(values, dtype=float)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_signal_array(X, name="X"):
    """Coerce ``X`` to a 2-D float array of signals, one signal per row."""
    arr = np.asarray(X, dtype=float)
    if arr.ndim == 1:
        arr = arr[None, :]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {arr.shape}")
    if arr.shape[1] < 4:
        raise ValueError(f"{name} needs at least 4 time samples per signal, got {arr.shape[1]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf")
    return arr


def check_square(matrix, name="matrix"):
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise DimensionMismatch(f"{name} must be square, got shape {arr.shape}")
    return arr


def check_same_dimension(*pairs):
    """Each pair is ``(name, n)``; raise if the sizes disagree."""
    sizes = {n for _, n in pairs}
    if len(sizes) > 1:
        desc = ", ".join(f"{name}={n}" for name, n in pairs)
        raise DimensionMismatch(f"dimension mismatch: {desc}")
