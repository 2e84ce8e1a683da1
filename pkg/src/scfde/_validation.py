"""Input validation helpers shared by the estimators and free functions."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.utils.validation import check_array


def check_complex_1d(x, name: str = "x", min_length: int = 1) -> np.ndarray:
    x = np.asarray(x)
    if x.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {x.shape}")
    if x.shape[0] < min_length:
        raise ValueError(f"{name} needs at least {min_length} samples, got {x.shape[0]}")
    x = x.astype(complex, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_complex_2d(x, name: str = "x") -> np.ndarray:
    """Coerce to a finite complex matrix; a 1-D input becomes one column."""
    x = np.asarray(x)
    if x.ndim == 1:
        x = x[:, None]
    if x.ndim != 2:
        raise ValueError(f"{name} must be 1-D or 2-D, got shape {x.shape}")
    x = x.astype(complex, copy=False)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values")
    return x


def check_regressors(X, n_features: int | None = None) -> np.ndarray:
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if n_features is not None and X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} regressor columns, got {X.shape[1]}")
    return X


def check_positive(value, name: str, strict: bool = True) -> float:
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ValueError(f"{name} must be a finite real number, got {value!r}")
    if value < 0 or (strict and value == 0):
        bound = "> 0" if strict else ">= 0"
        raise ValueError(f"{name} must be {bound}, got {value}")
    return float(value)


def check_same_length(a: np.ndarray, b: np.ndarray, names: tuple[str, str]) -> None:
    if a.shape[0] != b.shape[0]:
        raise ValueError(
            f"{names[0]} and {names[1]} differ in length: {a.shape[0]} vs {b.shape[0]}"
        )


def as_generator(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
