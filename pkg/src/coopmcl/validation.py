"""Input checks shared by the functional API and the estimator wrapper."""

from __future__ import annotations

import numbers

import numpy as np

WEIGHT_TOL = 1e-9


def check_random_state(seed) -> np.random.Generator:
    """Turn ``None``, an int, a SeedSequence or a Generator into a Generator.

    A Generator passed in is returned as is, so the caller's stream advances.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None or isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a random Generator from {type(seed).__name__}")


def check_poses(poses, name: str = "poses") -> np.ndarray:
    """Return ``poses`` as a finite float ``(K, 3)`` array with K >= 1."""
    arr = np.asarray(poses, dtype=float)
    if arr.ndim == 1 and arr.shape == (3,):
        arr = arr[None, :]
    if arr.ndim != 2 or arr.shape[1] != 3:
        raise ValueError(f"{name} must have shape (K, 3), got {arr.shape}")
    if arr.shape[0] < 1:
        raise ValueError(f"{name} must contain at least one pose")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains NaN or infinite values")
    return arr


def check_weights(weights, k: int, name: str = "weights") -> np.ndarray:
    """Return ``weights`` as a non-negative length-``k`` array summing to 1."""
    w = np.asarray(weights, dtype=float)
    if w.shape != (k,):
        raise ValueError(f"{name} must have shape ({k},), got {w.shape}")
    if not np.isfinite(w).all() or (w < 0).any():
        raise ValueError(f"{name} must be finite and non-negative")
    total = w.sum()
    if abs(total - 1.0) > WEIGHT_TOL:
        raise ValueError(f"{name} must sum to 1 (+/- {WEIGHT_TOL}), got {total!r}")
    return w


def check_fraction(value, name: str) -> float:
    v = float(value)
    if not 0.0 <= v <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value!r}")
    return v


def check_count(value, name: str, minimum: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(value).__name__}")
    if value < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {value}")
    return int(value)
