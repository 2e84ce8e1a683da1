"""Fractional-delay branch extraction, LS channel acquisition and MMSE FDE."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_1d, check_complex_2d, check_positive
from .signal import ComplexSignal
from .txchain import FrameLayout


@dataclass(frozen=True, eq=False)
class BranchSet:
    """``branches[i, n]`` holds sample ``delay + sps * (start + n) + i`` of the MF output."""

    branches: np.ndarray = field(repr=False)
    start_sample: int
    sps: int

    @property
    def n_symbols(self) -> int:
        return self.branches.shape[1]

    def interleave(self) -> np.ndarray:
        return self.branches.T.ravel()


def split_branches(mf_output: ComplexSignal, layout: FrameLayout | None = None, *,
                   block_start: int = 0, n_symbols: int | None = None,
                   n_cp: int | None = None) -> BranchSet:
    """Decimate the matched-filter output into ``sps`` symbol-rate phases.

    ``block_start`` is the symbol index (within the transmitted stream) where
    the block's cyclic prefix begins; the prefix and suffix are skipped.
    """
    if layout is not None:
        n_cp = layout.n_cp if n_cp is None else n_cp
        n_symbols = layout.n_data if n_symbols is None else n_symbols
    n_cp = 0 if n_cp is None else n_cp
    if n_symbols is None:
        raise ValueError("n_symbols or layout required")
    mu = mf_output.sps
    start = mf_output.delay + mu * (block_start + n_cp)
    stop = start + mu * n_symbols
    if start < 0 or stop > len(mf_output):
        raise ValueError(
            f"MF output of length {len(mf_output)} does not cover samples [{start}, {stop})"
        )
    seg = mf_output.samples[start:stop]
    return BranchSet(seg.reshape(n_symbols, mu).T.copy(), start, mu)


@dataclass(frozen=True, eq=False)
class SymbolRateCsi:
    """Taps ``h[-l_b+1] ... h[l_f-1]`` of one branch's symbol-rate channel."""

    taps: np.ndarray = field(repr=False)
    l_b: int
    l_f: int
    noise_var: float = float("nan")

    @property
    def lags(self) -> np.ndarray:
        return np.arange(-self.l_b + 1, self.l_f)

    def padded(self, n: int) -> np.ndarray:
        """Taps placed circularly in a length-``n`` vector (lag ``l`` at index ``l mod n``)."""
        if n < self.taps.shape[0]:
            raise ValueError(f"block length {n} shorter than CSI length {self.taps.shape[0]}")
        h = np.zeros(n, dtype=complex)
        h[self.lags % n] = self.taps
        return h

    def eigenvalues(self, n: int) -> np.ndarray:
        """Normalised per-bin response ``(1/sqrt(n)) sum_l h_l exp(-j 2 pi k l / n)``."""
        return np.fft.fft(self.padded(n)) / np.sqrt(n)


def training_matrix(ft_symbols, l_b: int, l_f: int, cyclic: bool = False) -> np.ndarray:
    """``A[k, l] = a[k - l + l_b - 1]``, zero-padded (or wrapped) outside the sequence."""
    a = check_complex_1d(ft_symbols, "ft_symbols")
    n = a.shape[0]
    idx = np.arange(n)[:, None] - np.arange(l_b + l_f - 1)[None, :] + l_b - 1
    if cyclic:
        return a[idx % n]
    valid = (idx >= 0) & (idx < n)
    return np.where(valid, a[np.clip(idx, 0, n - 1)], 0.0)


def ls_estimate(ft_symbols, y_fast, l_b: int = 4, l_f: int = 16, cyclic: bool = False,
                max_condition: float = 1e10):
    """Least-squares symbol-rate channel from a known training sequence.

    ``y_fast`` may hold one branch (1-D) or several (rows); one
    :class:`SymbolRateCsi` is returned per row. ``cyclic`` treats the training
    sequence as periodically extended, which is what a block carrying its own
    CP/CS presents to the receiver.
    """
    if l_b < 1 or l_f < 1:
        raise ValueError("l_b and l_f must be >= 1")
    a = check_complex_1d(ft_symbols, "ft_symbols")
    y = np.asarray(y_fast, dtype=complex)
    single = y.ndim == 1
    y = np.atleast_2d(y)
    n_taps = l_b + l_f - 1
    if a.shape[0] < n_taps:
        raise ValueError(f"training length {a.shape[0]} shorter than {n_taps} taps")
    if y.shape[1] != a.shape[0]:
        raise ValueError("y_fast length must equal the training length")
    A = training_matrix(a, l_b, l_f, cyclic)
    gram = A.conj().T @ A
    cond = np.linalg.cond(gram)
    if not np.isfinite(cond) or cond > max_condition:
        raise np.linalg.LinAlgError(f"training matrix is rank deficient (condition number {cond:.3g})")
    cf = cho_factor(gram)
    dof = max(a.shape[0] - n_taps, 1)
    out = []
    # one branch at a time, so a branch's estimate does not depend on which others are requested
    for row in y:
        h = cho_solve(cf, A.conj().T @ row)
        noise = np.sum(np.abs(row - A @ h) ** 2) / dof
        out.append(SymbolRateCsi(h, l_b, l_f, float(noise)))
    return out[0] if single else out


@dataclass(frozen=True, eq=False)
class EqualizedBlock:
    z: np.ndarray = field(repr=False)
    delta: float
    eigenvalues: np.ndarray = field(repr=False)


def fde_equalize(y, csi: SymbolRateCsi, delta: float) -> EqualizedBlock:
    """Unitary DFT, per-bin MMSE weight ``conj(H)/(|H|^2 + delta)``, unitary IDFT.

    ``H`` is the channel DFT, i.e. ``sqrt(N)`` times :meth:`SymbolRateCsi.eigenvalues`,
    so that a distortionless noiseless block is returned unbiased at ``delta = 0``.
    """
    y = check_complex_1d(y, "y")
    delta = check_positive(delta, "delta", strict=False)
    n = y.shape[0]
    lam = csi.eigenvalues(n)
    H = np.sqrt(n) * lam
    den = np.abs(H) ** 2 + delta
    if np.any(den == 0):
        raise ZeroDivisionError("singular equalizer: zero channel bin with delta = 0")
    y_f = np.fft.fft(y, norm="ortho")
    z_f = np.conj(H) / den * y_f
    return EqualizedBlock(np.fft.ifft(z_f, norm="ortho"), delta, lam)


class FDEBank(BaseEstimator, TransformerMixin):
    """Bank of per-phase MMSE equalizers fitted on a fast-time training block.

    Parameters
    ----------
    l_b, l_f : int
        Anticausal and causal CSI extent in symbols.
    delta : float or None
        Regularisation ``N0 / Es``; estimated from the LS residual when None.
    cyclic : bool
        Whether the training block carries its own cyclic extension.
    """

    def __init__(self, l_b: int = 4, l_f: int = 16, delta: float | None = None, cyclic: bool = True):
        self.l_b = l_b
        self.l_f = l_f
        self.delta = delta
        self.cyclic = cyclic

    def fit(self, y_ft, ft_symbols):
        y_ft = check_complex_2d(np.atleast_2d(y_ft), "y_ft")
        self.csi_ = ls_estimate(ft_symbols, y_ft, self.l_b, self.l_f, cyclic=self.cyclic)
        if self.delta is None:
            self.delta_ = np.array([c.noise_var for c in self.csi_])
        else:
            self.delta_ = np.full(len(self.csi_), float(self.delta))
        return self

    def transform(self, y):
        check_is_fitted(self, "csi_")
        y = np.atleast_2d(np.asarray(y, dtype=complex))
        if y.shape[0] != len(self.csi_):
            raise ValueError(f"expected {len(self.csi_)} branches, got {y.shape[0]}")
        return np.stack([fde_equalize(y[i], c, d).z for i, (c, d) in enumerate(zip(self.csi_, self.delta_))])
