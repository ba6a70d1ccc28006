"""K-fold cross-validation over ``(mu, lambda1, lambda2)``."""

from __future__ import annotations

import itertools
import os
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from sklearn.model_selection import KFold, StratifiedKFold

from .model import (Dataset, Loss, Task, build_unified_classification,
                    build_unified_regression, check_loss, predict)
from .solver import SolverConfig, SolverDivergenceError, solve

__all__ = ["Grid", "CVResult", "cross_validate", "max_workers"]


def _default_lambdas():
    return tuple(round(0.01 * k, 2) for k in range(1, 101))


@dataclass(frozen=True)
class Grid:
    """Search grid. ``lambda2_values`` defaults to ``lambda_values``."""

    mu_values: tuple = (0.01, 0.1, 1.0)
    lambda_values: tuple = field(default_factory=_default_lambdas)
    folds: int = 5
    lambda2_values: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "mu_values", tuple(float(m) for m in self.mu_values))
        object.__setattr__(self, "lambda_values", tuple(float(v) for v in self.lambda_values))
        if self.lambda2_values is not None:
            object.__setattr__(self, "lambda2_values",
                               tuple(float(v) for v in self.lambda2_values))
        if not self.mu_values or not self.lambda_values or self.lambda2_values == ():
            raise ValueError("grid axes must be non-empty")
        vals = self.mu_values + self.lambda_values + (self.lambda2_values or ())
        if min(vals) <= 0:
            raise ValueError("grid values must be positive")
        if self.folds < 2:
            raise ValueError("need at least 2 folds")

    def points(self):
        """Grid points as ``(mu, lambda1, lambda2)`` in a fixed order."""
        l2 = self.lambda2_values or self.lambda_values
        return list(itertools.product(self.mu_values, self.lambda_values, l2))


@dataclass
class CVResult:
    mu: float
    lambda1: float
    lambda2: float
    score: float
    table: list

    def as_rows(self):
        return [dict(r) for r in self.table]


def max_workers():
    """Worker cap from ``QFUSE_THREADS`` (default: CPU count)."""
    env = os.environ.get("QFUSE_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise ValueError(f"QFUSE_THREADS must be an integer, got {env!r}") from None
        return max(1, n)
    return os.cpu_count() or 1


def _splits(d, folds, seed):
    if d.n < folds:
        raise ValueError(f"need at least {folds} samples for {folds}-fold CV, got {d.n}")
    if d.task is Task.CLASSIFICATION:
        _, counts = np.unique(d.y, return_counts=True)
        if counts.size > 1 and counts.min() >= folds:
            return list(StratifiedKFold(folds, shuffle=True, random_state=seed).split(d.X, d.y))
    return list(KFold(folds, shuffle=True, random_state=seed).split(d.X))


def _fold_score(d, train, test, tau, mu, lam1, lam2, cfg, loss):
    Xtr, ytr = d.X[train], d.y[train]
    if d.task is Task.CLASSIFICATION:
        if np.unique(ytr).size < 2:
            return None
        sub = Dataset(Xtr, ytr, Task.CLASSIFICATION)
        # grid values are solver-side penalties; undo the 1/(1+tau) rescaling
        prob = build_unified_classification(sub, tau, lam1 * (1 + tau), lam2 * (1 + tau), loss)
    else:
        prob = build_unified_regression(Dataset(Xtr, ytr), tau, lam1, lam2, loss)
    rep = solve(prob, replace(cfg, mu_init=mu))
    if d.task is Task.CLASSIFICATION:
        pred = predict(d.X[test], rep.coefficients, Task.CLASSIFICATION)
        return float(np.mean(pred != d.y[test]))
    resid = d.y[test] - predict(d.X[test], rep.coefficients)
    return float(np.mean(check_loss(resid, tau)))


def cross_validate(d, grid=None, tau=0.5, cfg=None, loss=Loss.QUANTILE, seed=42, n_jobs=None):
    """Pick ``(mu, lambda1, lambda2)`` by K-fold cross-validation.

    Regression is scored by the mean held-out check loss at ``tau`` and
    classification by the held-out misclassification rate. Ties (within
    1e-12 relative) go to the smallest ``lambda1``, then ``lambda2``, then
    ``mu``. Classification folds whose training part has one class are
    skipped with a warning.

    Parameters
    ----------
    d : Dataset
    grid : Grid, optional
    tau : float
        Quantile level (regression) or pinball parameter (classification).
    cfg : SolverConfig, optional
        Base solver settings; ``mu_init`` is overridden per grid point.
    loss : Loss
    seed : int
        Fold-assignment seed.
    n_jobs : int, optional
        Worker threads; defaults to :func:`max_workers`.

    Returns
    -------
    CVResult
    """
    grid = grid or Grid()
    cfg = cfg or SolverConfig()
    splits = _splits(d, grid.folds, seed)
    points = grid.points()

    def run(point):
        mu, l1, l2 = point
        scores = []
        for i, (tr, te) in enumerate(splits):
            try:
                s = _fold_score(d, tr, te, tau, mu, l1, l2, cfg, loss)
            except SolverDivergenceError as exc:
                warnings.warn(f"grid point {point}, fold {i}: {exc}", RuntimeWarning, stacklevel=2)
                s = None
            if s is None:
                warnings.warn(f"fold {i} skipped at grid point {point}", RuntimeWarning,
                              stacklevel=2)
                continue
            scores.append(s)
        return scores

    workers = n_jobs or max_workers()
    if workers > 1 and len(points) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            fold_scores = list(pool.map(run, points))
    else:
        fold_scores = [run(pt) for pt in points]

    table = []
    for (mu, l1, l2), sc in zip(points, fold_scores):
        score = float(np.mean(sc)) if sc else float("nan")
        table.append({"mu": mu, "lambda1": l1, "lambda2": l2, "score": score,
                      "folds_used": len(sc)})
    finite = [r for r in table if np.isfinite(r["score"])]
    if not finite:
        raise RuntimeError("every grid point failed or was skipped")
    best = min(r["score"] for r in finite)
    slack = 1e-12 * max(1.0, abs(best))
    winner = min((r for r in finite if r["score"] <= best + slack),
                 key=lambda r: (r["lambda1"], r["lambda2"], r["mu"]))
    return CVResult(winner["mu"], winner["lambda1"], winner["lambda2"], winner["score"], table)
