"""Linear-cubic Volterra post-distorter (memory-polynomial style cubic terms)."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_regressors
from .base import PostDistorterMixin, check_targets
from .regressor import n_features, window_from_regressors


def volterra_features(window: np.ndarray, cubic: bool = True) -> np.ndarray:
    """Columns ``z_{n-k}`` followed by ``z_{n-k} |z_{n-l}|^2`` for every lag pair."""
    if not cubic:
        return window
    env = np.abs(window) ** 2
    K = window.shape[1]
    cub = (window[:, :, None] * env[:, None, :]).reshape(window.shape[0], K * K)
    return np.hstack([window, cub])


class VolterraPostDistorter(PostDistorterMixin, RegressorMixin, BaseEstimator):
    """Least-squares linear-cubic model from an equalized window to the symbol."""

    def __init__(self, memory_depth: int = 2, cubic: bool = True, max_condition: float = 1e12):
        self.memory_depth = memory_depth
        self.cubic = cubic
        self.max_condition = max_condition

    def fit(self, X, y):
        X = check_regressors(X, n_features(self.memory_depth))
        y = check_targets(y, X.shape[0])
        Phi = volterra_features(window_from_regressors(X, self.memory_depth), self.cubic)
        if X.shape[0] < 10 * Phi.shape[1]:
            raise ValueError(f"{X.shape[0]} windows fewer than 10x the {Phi.shape[1]} coefficients")
        s = np.linalg.svd(Phi, compute_uv=False)
        ratio = s[0] / s[-1] if s[-1] > 0 else np.inf
        if not ratio <= np.sqrt(self.max_condition):
            cond = ratio**2 if np.isfinite(ratio) and ratio < 1e150 else np.inf
            raise np.linalg.LinAlgError(f"Volterra Gram matrix ill-conditioned (condition number {cond:.3g})")
        self.coef_, *_ = np.linalg.lstsq(Phi, y, rcond=None)
        self.residual_ = float(np.mean(np.abs(Phi @ self.coef_ - y) ** 2))
        self.n_features_in_ = X.shape[1]
        return self

    @property
    def linear_coef_(self) -> np.ndarray:
        return self.coef_[:2 * self.memory_depth - 1]

    @property
    def cubic_coef_(self) -> np.ndarray:
        K = 2 * self.memory_depth - 1
        return self.coef_[K:].reshape(K, K) if self.cubic else np.zeros((K, K), dtype=complex)

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_regressors(X, self.n_features_in_)
        return volterra_features(window_from_regressors(X, self.memory_depth), self.cubic) @ self.coef_
