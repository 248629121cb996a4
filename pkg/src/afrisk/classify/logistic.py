"""L2-regularised logistic regression fitted by damped Newton iterations."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from ..cohort import Cohort
from ..errors import DivergedError, ValidationError
from .base import feature_block, scalar_or_array, training_block
from .codec import FeatureMatrixCodec


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    l2_lambda: float
    codec: FeatureMatrixCodec
    source_names: list[str]
    converged: bool = True
    grad_norm: float = 0.0
    n_iter: int = 0
    loss_history: list[float] = field(default_factory=list)

    @property
    def names(self) -> list[str]:
        return self.codec.names

    def decision_function(self, data) -> np.ndarray:
        X = feature_block(data, self.names, self.source_names)
        return self.codec.encode(X) @ self.weights + self.intercept

    def predict_proba(self, data):
        return scalar_or_array(data, expit(self.decision_function(data)))


def logistic_objective(theta: np.ndarray, Z: np.ndarray, y: np.ndarray, lam: float):
    """Mean negative log-likelihood plus ``lam/2 * |w|^2`` and its gradient.

    ``theta = [intercept, w...]``; the intercept is not penalised.
    """
    b, w = theta[0], theta[1:]
    z = Z @ w + b
    loss = float(np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * lam * (w @ w))
    r = expit(z) - y
    n = y.size
    grad = np.concatenate([[r.sum() / n], Z.T @ r / n + lam * w])
    return loss, grad


def _hessian(theta, Z, y, lam):
    p = expit(Z @ theta[1:] + theta[0])
    s = p * (1.0 - p)
    Zb = np.hstack([np.ones((Z.shape[0], 1)), Z])
    H = (Zb * s[:, None]).T @ Zb / y.size
    H[1:, 1:] += lam * np.eye(Z.shape[1])
    return H


def fit_logistic(Z: np.ndarray, y: np.ndarray, l2_lambda: float = 1e-3, tol: float = 1e-6,
                 max_iter: int = 500):
    """Newton's method with backtracking (Armijo) line search.

    Returns ``(theta, info)`` where ``info`` carries the loss after every
    accepted step, the final gradient infinity-norm and a converged flag.
    """
    theta = np.zeros(Z.shape[1] + 1)
    prior = np.clip(y.mean(), 1e-12, 1 - 1e-12)
    theta[0] = np.log(prior / (1 - prior))
    loss, grad = logistic_objective(theta, Z, y, l2_lambda)
    history = [loss]
    gnorm = float(np.abs(grad).max())
    it = 0
    while gnorm > tol and it < max_iter:
        it += 1
        H = _hessian(theta, Z, y, l2_lambda)
        try:
            step = np.linalg.solve(H + 1e-12 * np.eye(H.shape[0]), grad)
        except np.linalg.LinAlgError:
            step = grad
        if not np.all(np.isfinite(step)) or grad @ step <= 0:
            step = grad
        t = 1.0
        accepted = False
        for _ in range(60):
            cand = theta - t * step
            new_loss, new_grad = logistic_objective(cand, Z, y, l2_lambda)
            if not np.isfinite(new_loss):
                raise DivergedError("non-finite loss during logistic regression fit")
            if new_loss <= loss - 1e-4 * t * (grad @ step):
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
        theta, loss, grad = cand, new_loss, new_grad
        history.append(loss)
        gnorm = float(np.abs(grad).max())
    return theta, {"loss_history": history, "grad_norm": gnorm, "converged": gnorm <= tol,
                   "n_iter": it}


def train_logistic(train: Cohort, features, l2_lambda: float = 1e-3, tol: float = 1e-6,
                   max_iter: int = 500) -> LogisticModel:
    """Fit logistic regression on the selected variables of ``train``.

    Continuous variables are z-scored and nominal ones one-hot encoded, both
    with parameters learned from ``train``.
    """
    if l2_lambda < 0:
        raise ValidationError("l2_lambda must be >= 0")
    names, X, y = training_block(train, features)
    codec = FeatureMatrixCodec.fit(X, names, train.schema)
    theta, info = fit_logistic(codec.encode(X), y, l2_lambda, tol, max_iter)
    if not info["converged"]:
        warnings.warn(f"logistic regression stopped with gradient norm {info['grad_norm']:.3g} "
                      f"> tol {tol}", RuntimeWarning, stacklevel=2)
    return LogisticModel(theta[1:], float(theta[0]), l2_lambda, codec, list(train.schema.names),
                         info["converged"], info["grad_norm"], info["n_iter"], info["loss_history"])


def predict_logistic(model: LogisticModel, data):
    """P(AF) for a record (float) or a cohort (array)."""
    return model.predict_proba(data)
