"""Nearest-neighbour detection and the distortion-aware symbol-by-symbol detector."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_complex_1d, check_complex_2d, check_same_length
from .txchain import QamAlphabet

_CHUNK = 8192


def conventional_detect(z, alphabet: QamAlphabet) -> np.ndarray:
    """Exhaustive ``argmin |z - a|`` over the alphabet; ties go to the lowest label."""
    z = np.asarray(z, dtype=complex).ravel()
    pts = alphabet.points
    out = np.empty(z.shape[0], dtype=np.int64)
    for s in range(0, z.shape[0], _CHUNK):
        d = np.abs(z[s:s + _CHUNK, None] - pts[None, :])
        out[s:s + _CHUNK] = np.argmin(d, axis=1)
    return out


@dataclass(frozen=True, eq=False)
class DetectorParams:
    beta: np.ndarray = field(repr=False)
    r_eta: np.ndarray = field(repr=False)
    n_train: int = 0
    block_id: int | None = None

    def __post_init__(self):
        b = np.atleast_1d(np.asarray(self.beta, dtype=complex))
        r = np.atleast_2d(np.asarray(self.r_eta, dtype=complex))
        if r.shape != (b.shape[0], b.shape[0]):
            raise ValueError(f"r_eta shape {r.shape} does not match beta length {b.shape[0]}")
        if not np.allclose(r, r.conj().T, atol=1e-12 * max(1.0, np.abs(r).max())):
            raise ValueError("r_eta must be Hermitian")
        object.__setattr__(self, "beta", b)
        object.__setattr__(self, "r_eta", r)

    @property
    def n_branches(self) -> int:
        return self.beta.shape[0]

    def whitener(self) -> np.ndarray:
        """Lower Cholesky factor ``L`` with ``L L^H = R_eta``."""
        try:
            return cholesky(self.r_eta, lower=True)
        except np.linalg.LinAlgError as exc:
            raise np.linalg.LinAlgError("distortion covariance is singular") from exc


def train_dassd(soft, symbols, regularization: float = 1e-9, block_id=None) -> DetectorParams:
    """Vector Bussgang gain and distortion covariance from training pairs.

    ``soft`` is ``(n, mu)``: one soft estimate per branch for each training symbol.
    """
    A = check_complex_2d(soft, "soft")
    a = check_complex_1d(symbols, "symbols")
    check_same_length(A, a, ("soft", "symbols"))
    n, mu = A.shape
    if n < mu + 1:
        raise ValueError(f"need more than {mu} training symbols, got {n}")
    beta = (A.T @ a.conj()) / np.sum(np.abs(a) ** 2)
    E = A - a[:, None] * beta[None, :]
    R = (E.T @ E.conj()) / (n - 1)
    R = 0.5 * (R + R.conj().T)
    R = R + regularization * np.real(np.trace(R)) / mu * np.eye(mu)
    return DetectorParams(beta, R, n_train=n, block_id=block_id)


def dassd_metrics(soft, params: DetectorParams, points: np.ndarray) -> np.ndarray:
    """Whitened quadratic metric for every (sample, candidate) pair, shape ``(n, P)``.

    ``points`` may be a flat alphabet (each candidate scaled by ``beta``) or a
    ``(P, mu)`` array of candidate mean vectors.
    """
    A = check_complex_2d(soft, "soft")
    if A.shape[1] != params.n_branches:
        raise ValueError(f"soft has {A.shape[1]} branches, params expect {params.n_branches}")
    L = params.whitener()
    W = solve_triangular(L, A.T, lower=True).T
    means = np.asarray(points, dtype=complex)
    if means.ndim == 1:
        means = means[:, None] * params.beta[None, :]
    V = solve_triangular(L, means.T, lower=True).T
    # |w - v|^2 = |w|^2 - 2 Re(v^H w) + |v|^2
    wn = np.sum(np.abs(W) ** 2, axis=1)
    vn = np.sum(np.abs(V) ** 2, axis=1)
    cross = W @ V.conj().T
    return wn[:, None] - 2.0 * cross.real + vn[None, :]


def dassd_detect(soft, params: DetectorParams, alphabet: QamAlphabet) -> np.ndarray:
    """Labels minimising the whitened metric; ties go to the lowest label."""
    A = check_complex_2d(soft, "soft")
    out = np.empty(A.shape[0], dtype=np.int64)
    for s in range(0, A.shape[0], _CHUNK):
        out[s:s + _CHUNK] = np.argmin(dassd_metrics(A[s:s + _CHUNK], params, alphabet.points), axis=1)
    return out


class DistortionAwareDetector(BaseEstimator):
    """Estimator wrapper: ``fit`` learns (beta, R_eta), ``predict`` returns labels."""

    def __init__(self, alphabet: QamAlphabet | None = None, regularization: float = 1e-9):
        self.alphabet = alphabet
        self.regularization = regularization

    def fit(self, soft, symbols):
        self.params_ = train_dassd(soft, symbols, self.regularization)
        return self

    def predict(self, soft):
        check_is_fitted(self, "params_")
        return dassd_detect(soft, self.params_, self.alphabet)


def select_branch(soft, symbols, alphabet: QamAlphabet) -> int:
    """Index of the branch with the largest scalar GMI on the training pairs."""
    from .metrics import gmi_air

    A = check_complex_2d(soft, "soft")
    rates = []
    for i in range(A.shape[1]):
        p = train_dassd(A[:, i], symbols)
        rates.append(gmi_air(A[:, i], symbols, p, alphabet).value)
    return int(np.argmax(rates))
