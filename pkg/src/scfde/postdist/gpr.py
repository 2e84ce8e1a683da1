"""Gaussian-process post-distortion with BLUE fusion across training segments.

Each segment holds an independent GP per quadrature component with an
anisotropic squared-exponential kernel ``sf^2 exp(-sum_d (x_d - y_d)^2 / c_d^2)``.
Hyperparameters are fitted by maximising the log marginal likelihood in the
log domain. One noise level, shared by the I and Q components, is fitted on
the first segment and reused for the others. At prediction time the per-segment posteriors are fused with inverse
variance weights.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import check_regressors
from .base import PostDistorterMixin, check_targets
from .regressor import n_features

JITTER = 1e-8
_PRED_CHUNK = 8192
_LOG_BOUNDS = (np.log(1e-6), np.log(1e4))


def se_kernel(X1: np.ndarray, X2: np.ndarray, sigma_f: float, lengthscales: np.ndarray) -> np.ndarray:
    A = X1 / lengthscales
    B = X2 / lengthscales
    sq = np.sum(A**2, axis=1)[:, None] + np.sum(B**2, axis=1)[None, :] - 2.0 * A @ B.T
    np.maximum(sq, 0.0, out=sq)
    return sigma_f**2 * np.exp(-sq)


def _unpack(theta: np.ndarray, noise_log: float | None):
    if noise_log is None:
        return np.exp(theta[0]), np.exp(theta[1]), np.exp(theta[2:])
    return np.exp(theta[0]), np.exp(noise_log), np.exp(theta[1:])


def neg_log_marginal_likelihood(theta, X, y, noise_log: float | None = None):
    """Negative log evidence and its gradient in log-hyperparameter space.

    ``theta`` is ``[log sf, log sn, log c_1..c_D]``, or without ``log sn`` when
    the noise level is frozen through ``noise_log``.
    """
    sf, sn, c = _unpack(theta, noise_log)
    n = X.shape[0]
    K = se_kernel(X, X, sf, c)
    Ky = K + (sn**2 + JITTER * sf**2) * np.eye(n)
    try:
        cf = cho_factor(Ky, lower=True)
    except LinAlgError:
        return np.inf, np.zeros_like(theta)
    alpha = cho_solve(cf, y)
    logdet = 2.0 * np.sum(np.log(np.diag(cf[0])))
    nll = 0.5 * y @ alpha + 0.5 * logdet + 0.5 * n * np.log(2.0 * np.pi)

    W = np.outer(alpha, alpha) - cho_solve(cf, np.eye(n))
    g_sf = -0.5 * np.sum(W * 2.0 * (K + JITTER * sf**2 * np.eye(n)))
    g_sn = -0.5 * 2.0 * sn**2 * np.trace(W)
    M = W * K
    r = M.sum(axis=1)
    # sum_pq M_pq (x_pd - x_qd)^2 = 2 sum_p x_pd^2 r_p - 2 x_d^T M x_d
    quad = 2.0 * (X**2).T @ r - 2.0 * np.einsum("pd,pq,qd->d", X, M, X)
    g_c = -0.5 * 2.0 * quad / c**2
    if noise_log is None:
        grad = np.concatenate([[g_sf, g_sn], g_c])
    else:
        grad = np.concatenate([[g_sf], g_c])
    return nll, grad


@dataclass(eq=False)
class GprSegmentModel:
    X: np.ndarray = field(repr=False)
    sigma_f: float
    sigma_nu: float
    lengthscales: np.ndarray
    alpha: np.ndarray = field(repr=False)
    k_inv: np.ndarray = field(repr=False)
    y: np.ndarray = field(default=None, repr=False)
    log_likelihood: float = float("nan")
    init_log_likelihood: float = float("nan")

    @property
    def n_train(self) -> int:
        return self.X.shape[0]

    @classmethod
    def from_hyperparameters(cls, X, y, sigma_f, sigma_nu, lengthscales):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        lengthscales = np.asarray(lengthscales, dtype=float)
        n = X.shape[0]
        Ky = se_kernel(X, X, sigma_f, lengthscales) + (sigma_nu**2 + JITTER * sigma_f**2) * np.eye(n)
        try:
            cf = cho_factor(Ky, lower=True)
        except LinAlgError as exc:
            raise LinAlgError("kernel matrix not positive definite after jitter") from exc
        alpha = cho_solve(cf, y)
        k_inv = cho_solve(cf, np.eye(n))
        theta = np.log(np.concatenate([[sigma_f, sigma_nu], lengthscales]))
        ll = -neg_log_marginal_likelihood(theta, X, y)[0]
        return cls(X, float(sigma_f), float(sigma_nu), lengthscales, alpha, k_inv, y, ll)

    def predict(self, Xs: np.ndarray):
        """Posterior mean and predictive variance (noise included)."""
        mean = np.empty(Xs.shape[0])
        var = np.empty(Xs.shape[0])
        for s in range(0, Xs.shape[0], _PRED_CHUNK):
            ks = se_kernel(Xs[s:s + _PRED_CHUNK], self.X, self.sigma_f, self.lengthscales)
            mean[s:s + _PRED_CHUNK] = ks @ self.alpha
            latent = self.sigma_f**2 - np.einsum("ij,ij->i", ks @ self.k_inv, ks)
            var[s:s + _PRED_CHUNK] = np.maximum(latent, 0.0) + self.sigma_nu**2
        return mean, var


def initial_hyperparameters(X: np.ndarray, y: np.ndarray):
    sd = float(np.std(y)) or 1.0
    c = 2.0 * np.sqrt(X.shape[1]) * np.maximum(np.std(X, axis=0), 1e-3)
    return 2.0 * sd, 0.1 * sd, c


def fit_segment(X, y, init=None, sigma_nu: float | None = None, max_iter: int = 200) -> GprSegmentModel:
    """Maximum-likelihood hyperparameters for one GP on one segment."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    sf0, sn0, c0 = initial_hyperparameters(X, y) if init is None else init
    if sigma_nu is None:
        theta0 = np.log(np.concatenate([[sf0, sn0], c0]))
        noise_log = None
    else:
        theta0 = np.log(np.concatenate([[sf0], c0]))
        noise_log = float(np.log(sigma_nu))
    f0 = neg_log_marginal_likelihood(theta0, X, y, noise_log)[0]
    res = minimize(
        neg_log_marginal_likelihood,
        theta0,
        args=(X, y, noise_log),
        jac=True,
        method="L-BFGS-B",
        bounds=[_LOG_BOUNDS] * theta0.size,
        options={"maxiter": max_iter},
    )
    theta = res.x if res.fun <= f0 else theta0
    sf, sn, c = _unpack(theta, noise_log)
    model = GprSegmentModel.from_hyperparameters(X, y, sf, sn, c)
    model.init_log_likelihood = -float(f0)
    return model


def fit_shared_noise(X, ys, max_iter: int = 200) -> list[GprSegmentModel]:
    """Joint fit of one GP per target column with a common noise level.

    The evidence is summed over the targets. A single noise level keeps a
    near-deterministic target from driving its own noise estimate to the
    bound and interpolating.
    """
    X = np.asarray(X, dtype=float)
    ys = [np.asarray(y, dtype=float) for y in ys]
    inits = [initial_hyperparameters(X, y) for y in ys]
    d = X.shape[1] + 1
    sn0 = float(np.mean([sn for _, sn, _ in inits]))
    theta0 = np.concatenate([[np.log(sn0)]] + [np.log(np.concatenate([[sf], c])) for sf, _, c in inits])

    def objective(theta):
        total, grad = 0.0, np.zeros_like(theta)
        for k, y in enumerate(ys):
            own = theta[1 + k * d:1 + (k + 1) * d]
            f, g = neg_log_marginal_likelihood(np.concatenate([own[:1], theta[:1], own[1:]]), X, y)
            if not np.isfinite(f):
                return np.inf, grad
            total += f
            grad[0] += g[1]
            grad[1 + k * d:1 + (k + 1) * d] = np.concatenate([g[:1], g[2:]])
        return total, grad

    f0 = objective(theta0)[0]
    res = minimize(objective, theta0, jac=True, method="L-BFGS-B",
                   bounds=[_LOG_BOUNDS] * theta0.size, options={"maxiter": max_iter})
    theta = res.x if res.fun <= f0 else theta0
    sn = float(np.exp(theta[0]))
    models = []
    for k, y in enumerate(ys):
        own = np.exp(theta[1 + k * d:1 + (k + 1) * d])
        m = GprSegmentModel.from_hyperparameters(X, y, own[0], sn, own[1:])
        theta_k = np.concatenate([theta0[1 + k * d:2 + k * d], theta0[:1], theta0[2 + k * d:1 + (k + 1) * d]])
        m.init_log_likelihood = -float(neg_log_marginal_likelihood(theta_k, X, y)[0])
        models.append(m)
    return models


def blue_fuse(means: np.ndarray, variances: np.ndarray):
    """Inverse-variance (BLUE) combination over axis 0; returns mean, variance, weights."""
    means = np.asarray(means, dtype=float)
    prec = 1.0 / np.asarray(variances, dtype=float)
    w = prec / prec.sum(axis=0, keepdims=True)
    return np.sum(w * means, axis=0), 1.0 / prec.sum(axis=0), w


class GPRPostDistorter(PostDistorterMixin, RegressorMixin, BaseEstimator):
    """Symbol-rate GP regressor from equalized windows to transmitted symbols.

    Parameters
    ----------
    memory_depth : int
        ``M``; windows have ``4M - 2`` real features.
    n_segments : int
        Number of contiguous training segments, each with its own GPs.
    max_iter : int
        Iteration cap of the marginal-likelihood optimiser per GP.
    """

    def __init__(self, memory_depth: int = 2, n_segments: int = 4, max_iter: int = 200):
        self.memory_depth = memory_depth
        self.n_segments = n_segments
        self.max_iter = max_iter

    def fit(self, X, y):
        X = check_regressors(X, n_features(self.memory_depth))
        y = check_targets(y, X.shape[0])
        S = self.n_segments
        if X.shape[0] < S * X.shape[1] * 10:
            raise ValueError(
                f"{X.shape[0]} training windows too few for {S} segments of {X.shape[1]} features"
            )
        bounds = np.linspace(0, X.shape[0], S + 1).astype(int)
        first = slice(bounds[0], bounds[1])
        heads = fit_shared_noise(X[first], (y.real[first], y.imag[first]), max_iter=self.max_iter)
        self.segments_ = {}
        for (part, target), head in zip((("I", y.real), ("Q", y.imag)), heads):
            models = [head]
            for i in range(1, S):
                sl = slice(bounds[i], bounds[i + 1])
                models.append(fit_segment(X[sl], target[sl], sigma_nu=head.sigma_nu, max_iter=self.max_iter))
            self.segments_[part] = models
        self.n_features_in_ = X.shape[1]
        return self

    def predict_components(self, X):
        """Per-component fused means and variances, plus the per-segment ones."""
        check_is_fitted(self, "segments_")
        X = check_regressors(X, self.n_features_in_)
        out = {}
        for part, models in self.segments_.items():
            mv = [m.predict(X) for m in models]
            means = np.array([m for m, _ in mv])
            variances = np.array([v for _, v in mv])
            fused, fused_var, weights = blue_fuse(means, variances)
            out[part] = (fused, fused_var, means, variances, weights)
        return out

    def predict(self, X, return_var: bool = False):
        comp = self.predict_components(X)
        soft = comp["I"][0] + 1j * comp["Q"][0]
        if return_var:
            return soft, comp["I"][1], comp["Q"][1]
        return soft
