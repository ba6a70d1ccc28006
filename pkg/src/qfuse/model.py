"""Problem types and the regression/classification unification.

Both quantile fused-Lasso regression and pinball-loss fused-Lasso SVM are
mapped onto a single problem

    min_{b0, b}  loss(ybar - gamma * b0 - X b) + lambda1 * ||b||_1
                 + lambda2 * sum_j |b_j - b_{j-1}|

where for regression ``ybar = y`` and ``gamma = 1``, and for classification
``ybar = 1``, ``gamma = y`` and every row of ``X`` is multiplied by its label.
The pinball loss with parameter ``tau`` equals ``(1 + tau)`` times the check
loss at level ``1 / (1 + tau)``, so classification also rescales the quantile
level and both penalties.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .linops import DesignOperator

__all__ = [
    "Task",
    "Loss",
    "DesignKind",
    "Dataset",
    "UnifiedProblem",
    "Coefficients",
    "check_loss",
    "pinball_loss",
    "build_unified_regression",
    "build_unified_classification",
    "build_flsa",
    "loss_value",
    "penalty_value",
    "objective",
    "predict",
]


class Task(str, enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class Loss(str, enum.Enum):
    """Loss applied to the residual ``r = ybar - Xbar @ (b0, b)``.

    ``QUANTILE`` is ``(1/n) sum rho_tau(r_i)``. The other three are the
    unscaled extensions: ``sum r_i**2``, ``||r||_2`` and ``sum max(0, r_i)``.
    """

    QUANTILE = "quantile"
    LEAST_SQUARES = "least_squares"
    SQUARE_ROOT = "square_root"
    HINGE = "hinge"


class DesignKind(str, enum.Enum):
    DENSE = "dense"
    IDENTITY = "identity"


def _readonly(a):
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


def _check_tau(tau):
    if not (0.0 <= tau <= 1.0):
        raise ValueError(f"tau must lie in [0, 1], got {tau}")


def _check_penalties(lambda1, lambda2):
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError(
            f"penalties must be non-negative, got lambda1={lambda1}, lambda2={lambda2}")


@dataclass(frozen=True)
class Dataset:
    """Observed features ``X`` (n x p) and responses ``y``.

    For classification every label must be exactly -1 or +1.
    """

    X: np.ndarray
    y: np.ndarray
    task: Task = Task.REGRESSION

    def __post_init__(self):
        X = _readonly(self.X)
        y = _readonly(self.y).ravel()
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        n, p = X.shape
        if n < 1 or p < 1:
            raise ValueError(f"X must have at least one row and one column, got {X.shape}")
        if y.shape[0] != n:
            raise ValueError(f"y has {y.shape[0]} entries but X has {n} rows")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("X and y must be finite")
        task = Task(self.task)
        if task is Task.CLASSIFICATION and not np.all(np.abs(y) == 1.0):
            bad = np.flatnonzero(np.abs(y) != 1.0)[:5]
            raise ValueError(f"classification labels must be -1 or +1; offending rows {bad.tolist()}")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "task", task)

    @property
    def n(self):
        return self.X.shape[0]

    @property
    def p(self):
        return self.X.shape[1]


@dataclass(frozen=True)
class Coefficients:
    beta0: float
    beta: np.ndarray

    def __post_init__(self):
        beta = _readonly(self.beta).ravel()
        beta0 = float(self.beta0)
        if not (np.isfinite(beta0) and np.all(np.isfinite(beta))):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "beta0", beta0)

    @property
    def p(self):
        return self.beta.shape[0]


@dataclass(frozen=True)
class UnifiedProblem:
    """Canonical solver input.

    For a dense design ``X`` holds the feature block and ``gamma`` the
    intercept column of ``Xbar = [gamma | X]``. For the identity design
    (signal approximation) both are ``None``; then ``n == p`` and there is
    no intercept.
    """

    ybar: np.ndarray
    X: np.ndarray | None
    gamma: np.ndarray | None
    tau: float = 0.5
    lambda1: float = 0.0
    lambda2: float = 0.0
    loss: Loss = Loss.QUANTILE
    design_kind: DesignKind = DesignKind.DENSE
    _design: DesignOperator = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        _check_tau(self.tau)
        _check_penalties(self.lambda1, self.lambda2)
        ybar = _readonly(self.ybar).ravel()
        kind = DesignKind(self.design_kind)
        if kind is DesignKind.IDENTITY:
            if self.X is not None or self.gamma is not None:
                raise ValueError("identity design takes no X and no intercept column")
            design = DesignOperator.identity(ybar.shape[0])
        else:
            if self.X is None or self.gamma is None:
                raise ValueError("dense design needs both X and gamma")
            X = _readonly(self.X)
            gamma = _readonly(self.gamma).ravel()
            if X.ndim != 2 or X.shape[0] != ybar.shape[0] or gamma.shape[0] != ybar.shape[0]:
                raise ValueError(
                    f"inconsistent shapes: X {X.shape}, gamma {gamma.shape}, ybar {ybar.shape}")
            object.__setattr__(self, "X", X)
            object.__setattr__(self, "gamma", gamma)
            design = DesignOperator.dense(X, gamma)
        object.__setattr__(self, "ybar", ybar)
        object.__setattr__(self, "tau", float(self.tau))
        object.__setattr__(self, "lambda1", float(self.lambda1))
        object.__setattr__(self, "lambda2", float(self.lambda2))
        object.__setattr__(self, "loss", Loss(self.loss))
        object.__setattr__(self, "design_kind", kind)
        object.__setattr__(self, "_design", design)

    @property
    def n(self):
        return self.ybar.shape[0]

    @property
    def p(self):
        return self._design.p

    @property
    def has_intercept(self):
        return self.design_kind is DesignKind.DENSE

    @property
    def design(self):
        return self._design

    @property
    def Xbar(self):
        """Dense ``[gamma | X]``; the identity design has no intercept column."""
        if self.design_kind is DesignKind.IDENTITY:
            return np.eye(self.n)
        return np.column_stack([self.gamma, self.X])

    def with_params(self, **changes):
        """Copy with some of ``tau``, ``lambda1``, ``lambda2``, ``loss`` replaced."""
        kw = dict(ybar=self.ybar, X=self.X, gamma=self.gamma, tau=self.tau,
                  lambda1=self.lambda1, lambda2=self.lambda2, loss=self.loss,
                  design_kind=self.design_kind)
        kw.update(changes)
        return UnifiedProblem(**kw)


def check_loss(u, tau):
    """Quantile check loss ``rho_tau(u) = u * (tau - I(u < 0))``."""
    u = np.asarray(u, dtype=np.float64)
    return u * (tau - (u < 0))


def pinball_loss(u, tau):
    """Margin-based pinball loss of ``u = 1 - y F``: ``u`` if ``u >= 0`` else ``-tau * u``."""
    u = np.asarray(u, dtype=np.float64)
    return np.where(u >= 0, u, -tau * u)


def build_unified_regression(d, tau=0.5, lambda1=0.0, lambda2=0.0, loss=Loss.QUANTILE):
    """Map a regression dataset to the unified problem (prepend a ones column)."""
    if d.task is not Task.REGRESSION:
        raise ValueError("build_unified_regression needs a regression dataset")
    _check_tau(tau)
    _check_penalties(lambda1, lambda2)
    return UnifiedProblem(ybar=d.y, X=d.X, gamma=np.ones(d.n), tau=tau,
                          lambda1=lambda1, lambda2=lambda2, loss=loss)


def build_unified_classification(d, tau=0.5, lambda1=0.0, lambda2=0.0, loss=Loss.QUANTILE):
    """Map a pinball-loss classification dataset to the unified problem.

    The design becomes ``diag(y) @ [1 | X]``, the response a vector of ones,
    the quantile level ``1 / (1 + tau)`` and each penalty ``lambda / (1 + tau)``.
    Minimizers coincide with those of the pinball-loss objective.
    """
    if d.task is not Task.CLASSIFICATION:
        raise ValueError("build_unified_classification needs a classification dataset")
    _check_tau(tau)
    _check_penalties(lambda1, lambda2)
    scale = 1.0 + tau
    return UnifiedProblem(ybar=np.ones(d.n), X=d.y[:, None] * d.X, gamma=d.y.copy(),
                          tau=1.0 / scale, lambda1=lambda1 / scale,
                          lambda2=lambda2 / scale, loss=loss)


def build_flsa(signal, tau=0.5, lambda1=0.0, lambda2=0.0, loss=Loss.QUANTILE):
    """Signal-approximation problem: identity design, no intercept."""
    _check_tau(tau)
    _check_penalties(lambda1, lambda2)
    return UnifiedProblem(ybar=signal, X=None, gamma=None, tau=tau, lambda1=lambda1,
                          lambda2=lambda2, loss=loss, design_kind=DesignKind.IDENTITY)


def loss_value(loss, r, tau):
    """Value of the loss term at residual vector ``r``."""
    r = np.asarray(r, dtype=np.float64)
    loss = Loss(loss)
    if loss is Loss.QUANTILE:
        return float(np.mean(check_loss(r, tau)))
    if loss is Loss.LEAST_SQUARES:
        return float(r @ r)
    if loss is Loss.SQUARE_ROOT:
        return float(np.linalg.norm(r))
    if loss is Loss.HINGE:
        return float(np.sum(np.maximum(r, 0.0)))
    raise ValueError(f"unknown loss {loss!r}")


def penalty_value(beta, lambda1, lambda2):
    beta = np.asarray(beta, dtype=np.float64)
    return float(lambda1 * np.abs(beta).sum() + lambda2 * np.abs(np.diff(beta)).sum())


def _as_coefficients(c):
    if isinstance(c, Coefficients):
        return c
    c = np.asarray(c, dtype=np.float64).ravel()
    return Coefficients(c[0], c[1:])


def objective(prob, c):
    """Unified objective at coefficients ``c`` (``Coefficients`` or ``[b0, b...]``).

    For the identity design the intercept must be zero.
    """
    c = _as_coefficients(c)
    if c.p != prob.p:
        raise ValueError(f"coefficient length {c.p} does not match problem width {prob.p}")
    if not prob.has_intercept and c.beta0 != 0.0:
        raise ValueError("identity-design problems have no intercept")
    r = prob.ybar - prob.design.fitted(c.beta0, c.beta)
    return loss_value(prob.loss, r, prob.tau) + penalty_value(c.beta, prob.lambda1, prob.lambda2)


def predict(X, c, task=Task.REGRESSION):
    """Linear predictor ``b0 + X b``; for classification its sign, with ``sign(0) = +1``."""
    c = _as_coefficients(c)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != c.p:
        raise ValueError(f"X has {X.shape[1]} features, coefficients have {c.p}")
    f = c.beta0 + X @ c.beta
    if Task(task) is Task.CLASSIFICATION:
        return np.where(f >= 0, 1.0, -1.0)
    return f
