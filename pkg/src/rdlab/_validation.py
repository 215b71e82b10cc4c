"""Input validation helpers, in the spirit of ``sklearn.utils.validation``."""

from __future__ import annotations

import numpy as np

from .exceptions import ResourceError

#: Default bound on the number of enumerated blocks (|X|^n) for exact computations.
DEFAULT_BUDGET = 2**24

SUM_TOL = 1e-12


def check_probability_vector(mass, *, tol: float = SUM_TOL, name: str = "mass") -> np.ndarray:
    """Return ``mass`` as a float array after checking it lies on the simplex."""
    arr = np.asarray(mass, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total!r}, not 1 (tol={tol})")
    return arr


def check_stochastic_matrix(rows, *, tol: float = SUM_TOL, name: str = "rows") -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.ndim != 2 or 0 in arr.shape:
        raise ValueError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(sums - 1.0) > tol)
    if bad.size:
        raise ValueError(f"{name}: row {bad[0]} sums to {sums[bad[0]]!r}, not 1")
    return arr


def check_joint_matrix(mass, *, tol: float = SUM_TOL, name: str = "mass") -> np.ndarray:
    arr = np.asarray(mass, dtype=float)
    if arr.ndim != 2 or 0 in arr.shape:
        raise ValueError(f"{name} must be a non-empty 2-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative entries")
    total = arr.sum()
    if abs(total - 1.0) > tol:
        raise ValueError(f"{name} sums to {total!r}, not 1 (tol={tol})")
    return arr


def check_symbols(seq, alphabet_size: int | None = None, *, name: str = "sequence") -> np.ndarray:
    """Validate a sequence of integer symbols in ``range(alphabet_size)``."""
    arr = np.asarray(seq)
    if arr.ndim != 1 or arr.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-d sequence")
    if not np.issubdtype(arr.dtype, np.integer):
        if np.issubdtype(arr.dtype, np.floating) and np.all(arr == np.round(arr)):
            arr = arr.astype(np.int64)
        else:
            raise ValueError(f"{name} must hold integer symbols")
    if np.any(arr < 0):
        raise ValueError(f"{name} has negative symbols")
    if alphabet_size is not None and np.any(arr >= alphabet_size):
        raise ValueError(f"{name} has symbols outside alphabet of size {alphabet_size}")
    return arr.astype(np.int64)


def check_blocks(X, alphabet_size: int, n: int | None = None) -> np.ndarray:
    """Validate a 2-d array of blocks, one block per row."""
    arr = np.asarray(X)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ValueError(f"blocks must be 2-d (n_blocks, n), got shape {arr.shape}")
    if n is not None and arr.shape[1] != n:
        raise ValueError(f"blocks have length {arr.shape[1]}, expected {n}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise ValueError("blocks must hold integer symbols")
    if np.any(arr < 0) or np.any(arr >= alphabet_size):
        raise ValueError(f"block symbols outside alphabet of size {alphabet_size}")
    return arr.astype(np.int64)


def check_budget(count: int, budget: int, what: str, hint: str = "") -> None:
    if count > budget:
        msg = f"{what} needs {count} entries, exceeding the budget of {budget}"
        if hint:
            msg += f"; {hint}"
        raise ResourceError(msg)


def check_random_state(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
