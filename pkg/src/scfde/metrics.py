"""Bit error rate, GMI-based achievable rate and outage probability."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binomtest

from ._validation import check_complex_1d, check_complex_2d, check_same_length
from .detect import DetectorParams, dassd_metrics
from .txchain import QamAlphabet

_CHUNK = 4096


@dataclass(frozen=True)
class AirEstimate:
    value: float
    n_samples: int
    stderr: float


def gmi_terms(soft, symbols, params: DetectorParams, alphabet: QamAlphabet,
              means: np.ndarray | None = None) -> np.ndarray:
    """Per-sample ``log2(sum_a' p(y|a') / p(y|a))`` under the Gaussian mismatched PDF.

    ``means`` optionally replaces ``beta * a`` with an arbitrary ``(P, mu)`` table
    of conditional means (used for the constellation-dependent MM metric).
    The PDF normalisation cancels in the ratio, so only the quadratic metrics
    enter, combined with a max-subtracted log-sum-exp.
    """
    A = check_complex_2d(soft, "soft")
    a = check_complex_1d(symbols, "symbols")
    check_same_length(A, a, ("soft", "symbols"))
    cand = alphabet.points if means is None else np.asarray(means, dtype=complex).reshape(alphabet.order, -1)
    if means is None:
        own = a[:, None] * params.beta[None, :]
    else:
        labels = _labels_of(a, alphabet)
        own = cand[labels]
    out = np.empty(A.shape[0])
    for s in range(0, A.shape[0], _CHUNK):
        blk = A[s:s + _CHUNK]
        d_all = dassd_metrics(blk, params, cand)
        d_own = _own_metric(blk, own[s:s + _CHUNK], params)
        out[s:s + _CHUNK] = (logsumexp(-d_all, axis=1) + d_own) / np.log(2.0)
    # the own candidate is inside the sum, so a negative term is rounding error
    return np.maximum(out, 0.0)


def _own_metric(A: np.ndarray, own: np.ndarray, params: DetectorParams) -> np.ndarray:
    from scipy.linalg import solve_triangular

    L = params.whitener()
    E = solve_triangular(L, (A - own).T, lower=True)
    return np.sum(np.abs(E) ** 2, axis=0)


def _labels_of(symbols: np.ndarray, alphabet: QamAlphabet) -> np.ndarray:
    from .detect import conventional_detect

    labels = conventional_detect(symbols, alphabet)
    if not np.allclose(alphabet.points[labels], symbols, atol=1e-9):
        raise ValueError("symbols must be alphabet points")
    return labels


def gmi_air(soft, symbols, params: DetectorParams, alphabet: QamAlphabet,
            means: np.ndarray | None = None) -> AirEstimate:
    """Monte-Carlo mismatched-decoding rate in bits per symbol."""
    t = gmi_terms(soft, symbols, params, alphabet, means)
    n = t.shape[0]
    stderr = float(np.std(t, ddof=1) / np.sqrt(n)) if n > 1 else float("nan")
    return AirEstimate(float(alphabet.bits_per_symbol - np.mean(t)), n, stderr)


@dataclass(frozen=True)
class BerEstimate:
    value: float
    errors: int
    bits: int
    ci_low: float
    ci_high: float

    @property
    def half_width(self) -> float:
        return 0.5 * (self.ci_high - self.ci_low)


def ber(decisions, truth, alphabet: QamAlphabet, confidence: float = 0.95) -> BerEstimate:
    """Bit error rate between label sequences, with a Wilson score interval."""
    d = np.asarray(decisions, dtype=np.int64).ravel()
    t = np.asarray(truth, dtype=np.int64).ravel()
    if d.shape != t.shape:
        raise ValueError(f"decision and truth lengths differ: {d.shape[0]} vs {t.shape[0]}")
    if d.size == 0:
        raise ValueError("empty label sequences")
    errors = int(np.count_nonzero(alphabet.bit_map[d] != alphabet.bit_map[t]))
    return ber_from_counts(errors, d.size * alphabet.bits_per_symbol, confidence)


def ber_from_counts(errors: int, bits: int, confidence: float = 0.95) -> BerEstimate:
    ci = binomtest(errors, bits).proportion_ci(confidence_level=confidence, method="wilson")
    return BerEstimate(errors / bits, errors, bits, float(ci.low), float(ci.high))


@dataclass(frozen=True)
class OutageReport:
    threshold: float
    capacities: np.ndarray
    p_out: float


def outage(per_block_air, threshold: float) -> OutageReport:
    """Fraction of blocks whose instantaneous rate falls below ``threshold``."""
    c = np.asarray([getattr(x, "value", x) for x in per_block_air], dtype=float)
    if c.size == 0:
        raise ValueError("no blocks supplied")
    return OutageReport(float(threshold), c, float(np.mean(c < threshold)))
