"""Augmented real-valued time-delay neural network trained with Levenberg-Marquardt."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .._validation import as_generator, check_regressors
from .base import PostDistorterMixin, check_targets
from .regressor import n_features


def activation(x):
    """Tangent-sigmoid ``2 / (1 + exp(-2x)) - 1`` (numerically, ``tanh``)."""
    return np.tanh(x)


@dataclass(eq=False)
class NnModel:
    W1: np.ndarray = field(repr=False)
    b1: np.ndarray = field(repr=False)
    w_I: np.ndarray = field(repr=False)
    w_Q: np.ndarray = field(repr=False)
    b2_I: float = 0.0
    b2_Q: float = 0.0

    @property
    def hidden(self) -> int:
        return self.W1.shape[0]

    @property
    def n_params(self) -> int:
        h, d = self.W1.shape
        return h * d + 3 * h + 2

    def pack(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w_I, self.w_Q, [self.b2_I, self.b2_Q]])

    @classmethod
    def unpack(cls, theta: np.ndarray, hidden: int, n_in: int) -> "NnModel":
        i = hidden * n_in
        W1 = theta[:i].reshape(hidden, n_in)
        b1 = theta[i:i + hidden]
        w_I = theta[i + hidden:i + 2 * hidden]
        w_Q = theta[i + 2 * hidden:i + 3 * hidden]
        return cls(W1.copy(), b1.copy(), w_I.copy(), w_Q.copy(), float(theta[-2]), float(theta[-1]))


def nn_forward(model: NnModel, X) -> np.ndarray:
    """Complex soft symbols ``Omega_I + j Omega_Q`` for each regressor row."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    h = activation(X @ model.W1.T + model.b1)
    return (h @ model.w_I + model.b2_I) + 1j * (h @ model.w_Q + model.b2_Q)


def output_jacobian(model: NnModel, X: np.ndarray):
    """Outputs and their Jacobian w.r.t. the packed parameters.

    Rows ``0..N-1`` are the in-phase outputs, ``N..2N-1`` the quadrature ones.
    """
    N, D = X.shape
    H = model.hidden
    h = activation(X @ model.W1.T + model.b1)
    dh = 1.0 - h**2
    out = np.concatenate([h @ model.w_I + model.b2_I, h @ model.w_Q + model.b2_Q])
    J = np.zeros((2 * N, model.n_params))
    for row, w in ((slice(0, N), model.w_I), (slice(N, 2 * N), model.w_Q)):
        g = dh * w
        J[row, :H * D] = (g[:, :, None] * X[:, None, :]).reshape(N, H * D)
        J[row, H * D:H * D + H] = g
    J[:N, H * D + H:H * D + 2 * H] = h
    J[N:, H * D + 2 * H:H * D + 3 * H] = h
    J[:N, -2] = 1.0
    J[N:, -1] = 1.0
    return out, J


def cost(model: NnModel, X: np.ndarray, y: np.ndarray) -> float:
    """Half mean squared error over both components."""
    e = nn_forward(model, X) - y
    return float(0.5 * np.mean(e.real**2 + e.imag**2))


def init_model(hidden: int, n_in: int, rng) -> NnModel:
    rng = as_generator(rng)
    r1 = np.sqrt(6.0 / (n_in + hidden))
    r2 = np.sqrt(6.0 / (hidden + 2))
    return NnModel(
        W1=rng.uniform(-r1, r1, (hidden, n_in)),
        b1=np.zeros(hidden),
        w_I=rng.uniform(-r2, r2, hidden),
        w_Q=rng.uniform(-r2, r2, hidden),
    )


@dataclass
class LmHistory:
    costs: list = field(default_factory=list)
    damping: list = field(default_factory=list)
    rejected: int = 0


def lm_train(model: NnModel, X: np.ndarray, y: np.ndarray, epochs: int = 200, lambda_init: float = 1e-3,
             lambda_max: float = 1e10, tol: float = 1e-14):
    """Levenberg-Marquardt on the half-MSE cost; returns the best model and the history.

    Damping grows tenfold on a rejected step and shrinks tenfold on an
    accepted one. Training stops after ``epochs`` accepted steps, when the
    damping exceeds ``lambda_max``, or when the cost drops below ``tol``.
    """
    N = X.shape[0]
    target = np.concatenate([y.real, y.imag])
    theta = model.pack()
    H, D = model.W1.shape
    lam = lambda_init
    out, J = output_jacobian(model, X)
    e = out - target
    c = 0.5 * np.mean(e[:N] ** 2 + e[N:] ** 2)
    hist = LmHistory(costs=[c], damping=[lam])
    eye = np.eye(theta.size)
    for _ in range(epochs):
        JtJ = J.T @ J
        g = J.T @ e
        accepted = False
        while lam <= lambda_max:
            try:
                step = np.linalg.solve(JtJ + lam * eye, -g)
            except np.linalg.LinAlgError:
                lam *= 10.0
                continue
            cand = NnModel.unpack(theta + step, H, D)
            out_c, J_c = output_jacobian(cand, X)
            e_c = out_c - target
            c_new = 0.5 * np.mean(e_c[:N] ** 2 + e_c[N:] ** 2)
            if c_new < c:
                theta, model, J, e, c = theta + step, cand, J_c, e_c, c_new
                lam = max(lam / 10.0, 1e-20)
                accepted = True
                break
            hist.rejected += 1
            lam *= 10.0
        if not accepted:
            break
        hist.costs.append(c)
        hist.damping.append(lam)
        if c < tol:
            break
    return model, hist


class NNPostDistorter(PostDistorterMixin, RegressorMixin, BaseEstimator):
    """Single-hidden-layer ARVTDNN regressor with joint I/Q outputs.

    Parameters
    ----------
    memory_depth : int
        ``M``; the input layer has ``4M - 2`` units.
    hidden : int
        Neurons in the hidden layer.
    epochs : int
        Maximum number of accepted LM steps.
    lambda_init : float
        Initial LM damping.
    random_state : int or None
        Seed for the uniform Glorot initialisation.
    """

    def __init__(self, memory_depth: int = 2, hidden: int = 30, epochs: int = 200,
                 lambda_init: float = 1e-3, random_state=0):
        self.memory_depth = memory_depth
        self.hidden = hidden
        self.epochs = epochs
        self.lambda_init = lambda_init
        self.random_state = random_state

    def fit(self, X, y):
        X = check_regressors(X, n_features(self.memory_depth))
        y = check_targets(y, X.shape[0])
        model = init_model(self.hidden, X.shape[1], self.random_state)
        if X.shape[0] < 10 * model.n_params:
            raise ValueError(
                f"{X.shape[0]} training windows fewer than 10x the {model.n_params} weights"
            )
        self.model_, self.history_ = lm_train(model, X, y, self.epochs, self.lambda_init)
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_regressors(X, self.n_features_in_)
        return nn_forward(self.model_, X)
