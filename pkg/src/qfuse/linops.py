"""Matrix-free linear operators used by the solver.

Nothing here materializes the difference matrix: every application is an
O(p) pass, and dense designs are only touched through matrix-vector
products.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "DifferenceOperator",
    "DesignOperator",
    "StackedGram",
    "PowerResult",
    "diff_apply",
    "diff_adjoint",
    "gram_apply",
    "power_method",
]


def diff_apply(beta):
    """``(F beta)_j = beta_j - beta_{j+1}`` for j = 1..p-1."""
    beta = np.asarray(beta, dtype=np.float64)
    if beta.shape[0] < 2:
        raise ValueError("the difference operator needs p >= 2")
    return beta[:-1] - beta[1:]


def diff_adjoint(v):
    """``F^T v``: a length p-1 vector mapped back to length p."""
    v = np.asarray(v, dtype=np.float64)
    out = np.zeros(v.shape[0] + 1)
    out[:-1] += v
    out[1:] -= v
    return out


@dataclass(frozen=True)
class DifferenceOperator:
    """First-difference operator ``F`` of shape (p-1, p): 1 on the diagonal, -1 above it."""

    p: int

    def __post_init__(self):
        if self.p < 2:
            raise ValueError(f"the difference operator needs p >= 2, got {self.p}")

    @property
    def shape(self):
        return (self.p - 1, self.p)

    def apply(self, beta):
        return diff_apply(beta)

    def adjoint(self, v):
        return diff_adjoint(v)

    def todense(self):
        F = np.zeros(self.shape)
        idx = np.arange(self.p - 1)
        F[idx, idx] = 1.0
        F[idx, idx + 1] = -1.0
        return F


class DesignOperator:
    """Design ``Xbar = [gamma | X]`` or the identity (no intercept).

    Use the :meth:`dense` and :meth:`identity` constructors.
    """

    def __init__(self, X, gamma, n, p):
        self.X = X
        self.gamma = gamma
        self.n = n
        self.p = p

    @classmethod
    def dense(cls, X, gamma):
        X = np.ascontiguousarray(X, dtype=np.float64)
        gamma = np.asarray(gamma, dtype=np.float64).ravel()
        if X.ndim != 2 or gamma.shape[0] != X.shape[0]:
            raise ValueError(f"gamma length {gamma.shape[0]} does not match X {X.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(gamma))):
            raise ValueError("design entries must be finite")
        return cls(X, gamma, X.shape[0], X.shape[1])

    @classmethod
    def identity(cls, p):
        return cls(None, None, p, p)

    @property
    def is_identity(self):
        return self.X is None

    @property
    def has_intercept(self):
        return self.gamma is not None

    def matvec(self, beta):
        """``X @ beta`` (feature block only)."""
        if self.X is None:
            return np.array(beta, dtype=np.float64, copy=True)
        return self.X @ beta

    def rmatvec(self, r):
        """``X.T @ r``; ``r`` may be 1-D or an (n, k) block."""
        if self.X is None:
            return np.array(r, dtype=np.float64, copy=True)
        return self.X.T @ r

    def fitted(self, beta0, beta):
        """``X @ beta + gamma * beta0``."""
        out = self.matvec(beta)
        if self.gamma is not None and beta0 != 0.0:
            out = out + self.gamma * beta0
        return out

    def todense(self):
        """Dense ``Xbar`` (with the intercept column first when present)."""
        if self.X is None:
            return np.eye(self.n)
        return np.column_stack([self.gamma, self.X])


class StackedGram:
    """The operator ``mu1 * Xbar^T Xbar + mu2 * Fbar^T Fbar`` on ``(b0, b)``.

    ``Fbar = [0 | F]`` leaves the intercept out of the fusion term. Without
    an intercept (identity design) the operator acts on ``b`` alone.
    """

    def __init__(self, design, diff, mu1, mu2):
        if mu1 <= 0 or mu2 <= 0:
            raise ValueError("mu1 and mu2 must be positive")
        if diff.p != design.p:
            raise ValueError("difference operator and design disagree on p")
        self.design = design
        self.diff = diff
        self.mu1 = float(mu1)
        self.mu2 = float(mu2)

    @property
    def dim(self):
        return self.design.p + (1 if self.design.has_intercept else 0)

    def apply(self, tilde_beta):
        tilde_beta = np.asarray(tilde_beta, dtype=np.float64)
        if tilde_beta.shape[0] != self.dim:
            raise ValueError(f"expected a vector of length {self.dim}, got {tilde_beta.shape[0]}")
        d = self.design
        if d.has_intercept:
            b0, beta = tilde_beta[0], tilde_beta[1:]
            fit = d.fitted(b0, beta)
            head = [self.mu1 * (d.gamma @ fit)]
        else:
            beta = tilde_beta
            fit = d.matvec(beta)
            head = []
        tail = self.mu1 * d.rmatvec(fit) + self.mu2 * self.diff.adjoint(self.diff.apply(beta))
        return np.concatenate([head, tail])

    def todense(self):
        Xbar = self.design.todense()
        F = self.diff.todense()
        if self.design.has_intercept:
            F = np.column_stack([np.zeros(F.shape[0]), F])
        return self.mu1 * Xbar.T @ Xbar + self.mu2 * F.T @ F


def gram_apply(g, tilde_beta):
    return g.apply(tilde_beta)


@dataclass(frozen=True)
class PowerResult:
    estimate: float
    iterations: int
    converged: bool


def power_method(op, tol=1e-2, max_iter=100, seed=0):
    """Estimate the largest eigenvalue of a symmetric PSD operator.

    ``op`` is a square array or any object with ``apply`` and ``dim``.
    Iteration stops once the Rayleigh quotient changes by at most ``tol``
    relative to its current value. The start vector is the normalized
    all-ones vector plus a small fixed-seed perturbation, so it is not
    orthogonal to the dominant eigenvector in symmetric cases.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(op, np.ndarray):
        A = op
        apply, dim = (lambda x: A @ x), A.shape[0]
    else:
        apply, dim = op.apply, op.dim
    rng = np.random.default_rng(seed)
    x = np.ones(dim) / np.sqrt(dim)
    e = rng.standard_normal(dim)
    x = x + 0.1 * e / np.linalg.norm(e)
    x /= np.linalg.norm(x)
    est = 0.0
    for k in range(1, max_iter + 1):
        y = apply(x)
        new = float(x @ y)
        norm = np.linalg.norm(y)
        if norm == 0.0:
            return PowerResult(0.0, k, True)
        x = y / norm
        if k > 1 and abs(new - est) <= tol * abs(new):
            return PowerResult(new, k, True)
        est = new
    warnings.warn(f"power method did not reach tol={tol} in {max_iter} iterations",
                  RuntimeWarning, stacklevel=2)
    return PowerResult(est, max_iter, False)
