"""Input validation helpers shared across modules.

These mirror the ``check_array`` family from scikit-learn: they coerce to
float ndarrays, verify shape and finiteness, and raise ``ValueError`` with a
message naming the offending argument.
"""

from __future__ import annotations

import numbers

import numpy as np

FEAS_TOL = 1e-9


def check_vector(x, name: str, length: int | None = None, allow_empty: bool = False) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not allow_empty and arr.size == 0:
        raise ValueError(f"{name} must not be empty")
    if length is not None and arr.shape[0] != length:
        raise ValueError(f"{name} has length {arr.shape[0]}, expected {length}")
    if not np.all(np.isfinite(arr)):
        bad = int(np.flatnonzero(~np.isfinite(arr))[0])
        raise ValueError(f"{name} contains a non-finite value at index {bad}")
    return arr


def check_matrix(x, name: str, shape: tuple[int | None, int | None] = (None, None)) -> np.ndarray:
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be two-dimensional, got shape {arr.shape}")
    for axis, expected in enumerate(shape):
        if expected is not None and arr.shape[axis] != expected:
            raise ValueError(f"{name} has shape {arr.shape}, expected {shape} (None = any)")
    if not np.all(np.isfinite(arr)):
        row, col = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"{name} contains a non-finite value at ({row}, {col})")
    return arr


def check_probability(p, name: str, open_interval: bool = True) -> float:
    if not isinstance(p, numbers.Real):
        raise TypeError(f"{name} must be a real number, got {type(p).__name__}")
    p = float(p)
    ok = 0.0 < p < 1.0 if open_interval else 0.0 <= p <= 1.0
    if not ok:
        bounds = "(0, 1)" if open_interval else "[0, 1]"
        raise ValueError(f"{name} must lie in {bounds}, got {p}")
    return p


def check_positive(x, name: str, strict: bool = True) -> float:
    if not isinstance(x, numbers.Real) or not np.isfinite(x):
        raise ValueError(f"{name} must be a finite real number, got {x!r}")
    if (strict and x <= 0) or (not strict and x < 0):
        raise ValueError(f"{name} must be {'> 0' if strict else '>= 0'}, got {x}")
    return float(x)


def check_positive_int(x, name: str, minimum: int = 1) -> int:
    if isinstance(x, bool) or not isinstance(x, numbers.Integral):
        raise TypeError(f"{name} must be an integer, got {type(x).__name__}")
    if x < minimum:
        raise ValueError(f"{name} must be >= {minimum}, got {x}")
    return int(x)


def check_random_state(seed) -> np.random.Generator:
    """Turn ``seed`` into a ``numpy.random.Generator``.

    ``None`` is rejected: every sampler in this package must be seeded
    explicitly so that reruns are reproducible.
    """
    if isinstance(seed, np.random.Generator):
        return seed
    if seed is None:
        raise ValueError("an explicit seed is required; wall-clock seeding is not supported")
    if isinstance(seed, (numbers.Integral, np.random.SeedSequence)):
        return np.random.default_rng(seed)
    raise TypeError(f"cannot build a random generator from {seed!r}")


def is_psd(matrix: np.ndarray, tol: float = 1e-10) -> bool:
    if not np.allclose(matrix, matrix.T, atol=1e-12, rtol=1e-10):
        return False
    eig = np.linalg.eigvalsh(matrix)
    scale = max(1.0, float(np.max(np.abs(np.diag(matrix)))) if matrix.size else 1.0)
    return bool(eig.min(initial=0.0) >= -tol * scale)
