"""Input validation helpers shared by estimators and module functions."""

from __future__ import annotations

import numpy as np

from .exceptions import EmptyTrainingSetError


def ensure_rng(seed_or_rng) -> np.random.Generator:
    """Return a numpy Generator from a seed, an existing Generator, or None."""
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return np.random.default_rng(seed_or_rng)


def check_matrix(X, name: str = "X") -> np.ndarray:
    """Coerce to a 2-D float64 array with at least one row and column."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {X.shape}")
    if X.shape[0] == 0 or X.shape[1] == 0:
        raise ValueError(f"{name} must be non-empty, got shape {X.shape}")
    return X


def check_labels(y, n_rows: int | None = None) -> np.ndarray:
    """Coerce labels to a 1-D int64 vector of non-negative class ids."""
    y = np.asarray(y)
    if y.ndim != 1:
        raise ValueError(f"y must be 1-dimensional, got shape {y.shape}")
    if not np.issubdtype(y.dtype, np.integer):
        rounded = np.rint(np.asarray(y, dtype=np.float64))
        if not np.array_equal(rounded, np.asarray(y, dtype=np.float64)):
            raise ValueError("y must contain integer class ids")
        y = rounded
    y = y.astype(np.int64)
    if y.size and y.min() < 0:
        raise ValueError("class ids must be non-negative")
    if n_rows is not None and y.shape[0] != n_rows:
        raise ValueError(f"X has {n_rows} rows but y has {y.shape[0]}")
    return y


def check_X_y(X, y) -> tuple[np.ndarray, np.ndarray]:
    """Validate a training pair; empty training data is a dedicated error."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X.reshape(-1, 1)
    if X.size == 0 or X.shape[0] == 0:
        raise EmptyTrainingSetError("cannot fit on an empty training set")
    X = check_matrix(X)
    y = check_labels(y, n_rows=X.shape[0])
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN or infinite values")
    return X, y
