"""Closed-form proximal maps for the penalty and loss pieces.

Each map returns ``argmin_z f(z) + (mu / 2) * ||z - z0||^2`` for its ``f``.
All are pure functions of their arguments.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ProxScale",
    "soft_threshold",
    "quantile_prox",
    "l2_norm_prox",
    "hinge_prox",
    "ls_r_update",
]


@dataclass(frozen=True)
class ProxScale:
    """Quadratic weight ``mu``, sample count ``n`` and quantile level ``tau``."""

    mu: float
    n: int = 1
    tau: float = 0.5

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu}")
        if self.n < 1:
            raise ValueError(f"n must be at least 1, got {self.n}")
        if not (0.0 <= self.tau <= 1.0):
            raise ValueError(f"tau must lie in [0, 1], got {self.tau}")


def soft_threshold(z0, kappa):
    """Prox of ``kappa * ||z||_1`` with unit weight: ``sign(z0) * max(|z0| - kappa, 0)``."""
    if kappa < 0:
        raise ValueError("kappa must be non-negative")
    z0 = np.asarray(z0, dtype=np.float64)
    return np.sign(z0) * np.maximum(np.abs(z0) - kappa, 0.0)


def quantile_prox(z0, scale):
    """Prox of ``(1/n) sum rho_tau(z_i)`` with weight ``mu``."""
    z0 = np.asarray(z0, dtype=np.float64)
    nmu = scale.n * scale.mu
    return np.maximum(z0 - scale.tau / nmu, np.minimum(0.0, z0 + (1.0 - scale.tau) / nmu))


def l2_norm_prox(z0, mu):
    """Prox of ``||z||_2`` (block soft thresholding); zero inside the ball of radius ``1/mu``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    z0 = np.asarray(z0, dtype=np.float64)
    norm = np.linalg.norm(z0)
    if norm <= 1.0 / mu:
        return np.zeros_like(z0)
    return z0 * (1.0 - 1.0 / (mu * norm))


def hinge_prox(z0, mu):
    """Prox of ``sum max(0, z_i)``: ``min(z0, max(0, |z0| - 1/mu))``."""
    if not mu > 0:
        raise ValueError("mu must be positive")
    z0 = np.asarray(z0, dtype=np.float64)
    return np.minimum(z0, np.maximum(0.0, np.abs(z0) - 1.0 / mu))


def ls_r_update(w, mu1):
    """Minimizer of ``||r||^2 + (mu1/2) ||r - w||^2``."""
    if not mu1 > 0:
        raise ValueError("mu1 must be positive")
    w = np.asarray(w, dtype=np.float64)
    return mu1 * w / (2.0 + mu1)
