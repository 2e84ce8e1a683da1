"""Augmented real-valued regressor windows over an equalized block."""

from __future__ import annotations

import numpy as np

from .._validation import check_complex_1d


def n_features(memory_depth: int) -> int:
    return 4 * memory_depth - 2


def _offsets(memory_depth: int) -> np.ndarray:
    # z_{n+M-1}, ..., z_n, ..., z_{n-M+1}
    return np.arange(memory_depth - 1, -memory_depth, -1)


def build_regressor(z, n: int, memory_depth: int) -> np.ndarray:
    """Window ``[Re z_{n+M-1..n-M+1}, Im z_{n+M-1..n-M+1}]`` with cyclic indexing."""
    z = check_complex_1d(z, "z")
    if memory_depth < 1:
        raise ValueError("memory_depth must be >= 1")
    if z.shape[0] < 2 * memory_depth - 1:
        raise ValueError(f"block of length {z.shape[0]} too short for memory depth {memory_depth}")
    w = z[(n + _offsets(memory_depth)) % z.shape[0]]
    return np.concatenate([w.real, w.imag])


def regressor_matrix(z, memory_depth: int) -> np.ndarray:
    """All windows of a block, one row per symbol index."""
    z = check_complex_1d(z, "z")
    if memory_depth < 1:
        raise ValueError("memory_depth must be >= 1")
    n = z.shape[0]
    if n < 2 * memory_depth - 1:
        raise ValueError(f"block of length {n} too short for memory depth {memory_depth}")
    idx = (np.arange(n)[:, None] + _offsets(memory_depth)[None, :]) % n
    w = z[idx]
    return np.hstack([w.real, w.imag])


def stack_blocks(blocks, memory_depth: int) -> np.ndarray:
    """Regressors for several equalized blocks, each wrapped within itself."""
    return np.vstack([regressor_matrix(b, memory_depth) for b in blocks])


def window_from_regressors(X: np.ndarray, memory_depth: int) -> np.ndarray:
    """Complex window ``z_{n+M-1}, ..., z_{n-M+1}`` recovered from regressor rows."""
    k = 2 * memory_depth - 1
    return X[:, :k] + 1j * X[:, k:2 * k]
