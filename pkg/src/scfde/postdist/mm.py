"""Memoryless modified-metric (MM) detector: one complex gain per constellation point."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_complex_1d, check_same_length
from ..txchain import QamAlphabet

_CHUNK = 8192


def _labels(symbols: np.ndarray, alphabet: QamAlphabet) -> np.ndarray:
    from ..detect import conventional_detect

    lab = conventional_detect(symbols, alphabet)
    if not np.allclose(alphabet.points[lab], symbols, atol=1e-9):
        raise ValueError("training targets must be alphabet points")
    return lab


def mm_fit(z, symbols, alphabet: QamAlphabet, min_hits: int = 20, ring_fallback: bool = True):
    """Conditional mean of ``z / a`` per constellation point.

    Points with fewer than ``min_hits`` training hits share the estimate of
    their amplitude ring (all points with the same ``|a|``).
    """
    z = check_complex_1d(z, "z")
    a = check_complex_1d(symbols, "symbols")
    check_same_length(z, a, ("z", "symbols"))
    lab = _labels(a, alphabet)
    ratio = z / a
    P = alphabet.order
    hits = np.bincount(lab, minlength=P)
    sums = np.bincount(lab, weights=ratio.real, minlength=P) + 1j * np.bincount(lab, weights=ratio.imag, minlength=P)
    table = np.full(P, np.nan + 0j)
    ok = hits >= min_hits
    table[ok] = sums[ok] / hits[ok]
    if not np.all(ok):
        if not ring_fallback:
            raise ValueError(f"{np.count_nonzero(~ok)} constellation points below {min_hits} hits")
        ring = np.round(np.abs(alphabet.points) ** 2 * 1e6).astype(np.int64)
        for r in np.unique(ring[~ok]):
            members = ring == r
            n = hits[members].sum()
            if n == 0:
                raise ValueError("empty amplitude ring: no training data for fallback")
            table[members & ~ok] = sums[members].sum() / n
    return table, hits


def mm_correct(z, table: np.ndarray, alphabet: QamAlphabet) -> np.ndarray:
    """Labels minimising ``|z - table[a] * a|``; ties go to the lowest label."""
    z = np.asarray(z, dtype=complex).ravel()
    centroids = table * alphabet.points
    out = np.empty(z.shape[0], dtype=np.int64)
    for s in range(0, z.shape[0], _CHUNK):
        out[s:s + _CHUNK] = np.argmin(np.abs(z[s:s + _CHUNK, None] - centroids[None, :]), axis=1)
    return out


class MMDetector(ClassifierMixin, BaseEstimator):
    """Estimator form of the per-point gain table; ``predict`` returns labels."""

    def __init__(self, alphabet: QamAlphabet | None = None, min_hits: int = 20):
        self.alphabet = alphabet
        self.min_hits = min_hits

    def fit(self, z, symbols):
        self.table_, self.hits_ = mm_fit(z, symbols, self.alphabet, self.min_hits)
        return self

    @property
    def centroids_(self) -> np.ndarray:
        check_is_fitted(self, "table_")
        return self.table_ * self.alphabet.points

    def predict(self, z):
        check_is_fitted(self, "table_")
        return mm_correct(z, self.table_, self.alphabet)
