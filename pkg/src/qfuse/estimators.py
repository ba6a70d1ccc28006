"""scikit-learn style estimators wrapping the unified solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin, TransformerMixin
from sklearn.utils.multiclass import check_classification_targets
from sklearn.utils.validation import check_array, check_is_fitted, validate_data

from .model import (Dataset, Loss, Task, build_flsa, build_unified_classification,
                    build_unified_regression)
from .solver import SolverConfig, solve

__all__ = ["QuantileFusedLasso", "QuantileFusedSVM", "FusedLassoSignalApproximator"]


class _SolverParams:
    """Shared solver hyperparameters; the estimators below mix this in."""

    def _config(self):
        return SolverConfig(eta_factor=self.eta_factor, mu_init=self.mu, adaptive_mu=self.adaptive_mu,
                            eps1=self.tol, eps2=self.tol, max_iter=self.max_iter,
                            trace_every=self.trace_every)

    def _check_width(self, X):
        if X.shape[1] < 2:
            raise ValueError(
                f"n_features = {X.shape[1]}; the fusion penalty needs at least 2 features")

    def _store(self, rep):
        self.coef_ = np.asarray(rep.coefficients.beta).copy()
        self.intercept_ = rep.coefficients.beta0
        self.n_iter_ = rep.iterations
        self.converged_ = rep.converged
        self.report_ = rep


class QuantileFusedLasso(_SolverParams, RegressorMixin, BaseEstimator):
    """Quantile regression with an l1 and a fused (total-variation) penalty.

    Parameters
    ----------
    tau : float, default=0.5
        Quantile level in [0, 1].
    lambda1 : float, default=0.01
        Weight of ``||beta||_1``.
    lambda2 : float, default=0.01
        Weight of ``sum_j |beta_j - beta_{j-1}|``.
    loss : {"quantile", "least_squares", "square_root", "hinge"}, default="quantile"
    mu : float, default=0.1
        Initial augmented-Lagrangian weight.
    adaptive_mu : bool, default=True
    eta_factor : float, default=0.8
    tol : float, default=1e-4
        Used for both the absolute and relative stopping tolerance.
    max_iter : int, default=10000
    trace_every : int, default=0
        Trace stride kept on ``report_``; 0 keeps no traces.

    Attributes
    ----------
    coef_ : ndarray of shape (n_features,)
    intercept_ : float
    n_iter_ : int
    converged_ : bool
    report_ : SolveReport
    """

    def __init__(self, tau=0.5, lambda1=0.01, lambda2=0.01, loss="quantile", mu=0.1,
                 adaptive_mu=True, eta_factor=0.8, tol=1e-4, max_iter=10000, trace_every=0):
        self.tau = tau
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.loss = loss
        self.mu = mu
        self.adaptive_mu = adaptive_mu
        self.eta_factor = eta_factor
        self.tol = tol
        self.max_iter = max_iter
        self.trace_every = trace_every

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=np.float64)
        self._check_width(X)
        prob = build_unified_regression(Dataset(X, y), self.tau, self.lambda1, self.lambda2,
                                        Loss(self.loss))
        self._store(solve(prob, self._config()))
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return self.intercept_ + X @ self.coef_


class QuantileFusedSVM(_SolverParams, ClassifierMixin, BaseEstimator):
    """Binary linear classifier with the pinball loss and a fused-Lasso penalty.

    ``tau = 0`` gives the hinge-loss fused SVM. Any two class labels are
    accepted; ``classes_[1]`` is treated as the positive class.

    Parameters
    ----------
    tau : float, default=0.5
        Pinball parameter in [0, 1].
    lambda1, lambda2 : float, default=0.01
        Penalties on the pinball-loss scale.
    mu, adaptive_mu, eta_factor, tol, max_iter, trace_every
        As in :class:`QuantileFusedLasso`.
    """

    def __init__(self, tau=0.5, lambda1=0.01, lambda2=0.01, mu=0.1, adaptive_mu=True,
                 eta_factor=0.8, tol=1e-4, max_iter=10000, trace_every=0):
        self.tau = tau
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.mu = mu
        self.adaptive_mu = adaptive_mu
        self.eta_factor = eta_factor
        self.tol = tol
        self.max_iter = max_iter
        self.trace_every = trace_every

    def fit(self, X, y):
        X, y = validate_data(self, X, y, dtype=np.float64)
        check_classification_targets(y)
        self._check_width(X)
        self.classes_, idx = np.unique(y, return_inverse=True)
        if self.classes_.size != 2:
            raise ValueError(
                f"Only binary classification is supported; got {self.classes_.size} class(es)")
        signs = np.where(idx == 1, 1.0, -1.0)
        prob = build_unified_classification(Dataset(X, signs, Task.CLASSIFICATION), self.tau,
                                            self.lambda1, self.lambda2)
        self._store(solve(prob, self._config()))
        return self

    def decision_function(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return self.intercept_ + X @ self.coef_

    def predict(self, X):
        # sign(0) counts as the positive class
        f = self.decision_function(X)
        return self.classes_[(f >= 0).astype(int)]

    def __sklearn_tags__(self):
        tags = super().__sklearn_tags__()
        tags.classifier_tags.multi_class = False
        return tags


class FusedLassoSignalApproximator(TransformerMixin, BaseEstimator):
    """Denoise 1-D signals with the fused Lasso (identity design).

    Each row of ``X`` is one signal. ``transform`` solves one problem per
    row and returns the fitted signals; nothing learned in ``fit`` is
    reused, but ``fit`` denoises the training rows to record the largest
    iteration count in ``n_iter_``.

    Parameters
    ----------
    tau : float, default=0.5
    lambda1 : float, default=0.01
    lambda2 : float, default=0.1
    loss : str, default="quantile"
    mu, adaptive_mu, eta_factor, tol, max_iter
        Solver settings as in :class:`QuantileFusedLasso`.
    """

    def __init__(self, tau=0.5, lambda1=0.01, lambda2=0.1, loss="quantile", mu=0.1,
                 adaptive_mu=True, eta_factor=0.8, tol=1e-4, max_iter=10000):
        self.tau = tau
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.loss = loss
        self.mu = mu
        self.adaptive_mu = adaptive_mu
        self.eta_factor = eta_factor
        self.tol = tol
        self.max_iter = max_iter

    def fit(self, X, y=None):
        X = validate_data(self, X, dtype=np.float64)
        self.n_iter_ = int(self._denoise(X)[1].max())
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = validate_data(self, X, reset=False, dtype=np.float64)
        return self._denoise(X)[0]

    def _denoise(self, X):
        if X.shape[1] < 2:
            raise ValueError(f"n_features = {X.shape[1]}; signals need at least 2 samples")
        cfg = SolverConfig(eta_factor=self.eta_factor, mu_init=self.mu,
                           adaptive_mu=self.adaptive_mu, eps1=self.tol, eps2=self.tol,
                           max_iter=self.max_iter, trace_every=0)
        out = np.empty_like(X)
        iters = np.empty(X.shape[0], dtype=int)
        for i, row in enumerate(X):
            prob = build_flsa(row, self.tau, self.lambda1, self.lambda2, Loss(self.loss))
            rep = solve(prob, cfg)
            out[i] = rep.coefficients.beta
            iters[i] = rep.iterations
        return out, iters


def denoise(signal, **params):
    """Convenience: denoise a single 1-D signal."""
    sig = check_array(np.asarray(signal, dtype=np.float64).reshape(1, -1))
    return FusedLassoSignalApproximator(**params).fit_transform(sig)[0]
