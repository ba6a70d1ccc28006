"""Seeded synthetic data for the classification and regression experiments.

Every generator takes an integer ``seed`` and builds its own
``numpy.random.Generator``, so identical arguments give bit-identical
output.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .model import Dataset, Task

__all__ = [
    "NoiseKind",
    "NoiseSpec",
    "sample_noise",
    "toeplitz_cholesky",
    "gen_two_gaussians",
    "gen_highdim_classes",
    "gen_blocky_regression",
    "default_pulse_signal",
    "gen_pulse",
]

MU_POS = np.array([0.5, -3.0])
MU_NEG = np.array([-0.5, 3.0])
SIGMA_DIAG = np.array([0.2, 3.0])
NOISE_COV = np.array([[1.0, -0.8], [-0.8, 1.0]])


class NoiseKind(str, enum.Enum):
    NORMAL = "normal"
    STUDENT_T = "student_t"
    CAUCHY = "cauchy"
    MIXED_NORMAL = "mixed_normal"


@dataclass(frozen=True)
class NoiseSpec:
    """Additive noise distribution.

    ``sigma`` scales the normal case; ``df`` is the Student-t degrees of
    freedom; the mixture draws N(0, sigma1^2) with probability ``weight``
    and N(0, sigma2^2) otherwise.
    """

    kind: NoiseKind = NoiseKind.NORMAL
    sigma: float = 1.0
    df: float = 2.0
    weight: float = 0.9
    sigma1: float = 1.0
    sigma2: float = 5.0

    def __post_init__(self):
        object.__setattr__(self, "kind", NoiseKind(self.kind))
        if min(self.sigma, self.df, self.sigma1, self.sigma2) <= 0:
            raise ValueError("noise parameters must be positive")
        if not 0 < self.weight < 1:
            raise ValueError("mixture weight must lie in (0, 1)")

    @classmethod
    def parse(cls, name):
        """Build from a short name: ``normal``, ``t``, ``cauchy`` or ``mixed``."""
        aliases = {"normal": NoiseKind.NORMAL, "t": NoiseKind.STUDENT_T,
                   "student_t": NoiseKind.STUDENT_T, "cauchy": NoiseKind.CAUCHY,
                   "mixed": NoiseKind.MIXED_NORMAL, "mixed_normal": NoiseKind.MIXED_NORMAL}
        try:
            return cls(aliases[name])
        except KeyError:
            raise ValueError(f"unknown noise kind {name!r}") from None


def sample_noise(spec, size, rng):
    k = spec.kind
    if k is NoiseKind.NORMAL:
        return spec.sigma * rng.standard_normal(size)
    if k is NoiseKind.STUDENT_T:
        return rng.standard_t(spec.df, size)
    if k is NoiseKind.CAUCHY:
        return rng.standard_cauchy(size)
    pick = rng.random(size) < spec.weight
    z = rng.standard_normal(size)
    return np.where(pick, spec.sigma1 * z, spec.sigma2 * z)


def _n_noise(n, alpha):
    if not 0 <= alpha < 1:
        raise ValueError(f"noise ratio must lie in [0, 1), got {alpha}")
    # round half up, so 2.5 -> 3
    return int(np.floor(alpha * n + 0.5))


def _balanced_labels(k, rng):
    y = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
    return rng.permutation(y)


def gen_two_gaussians(n, alpha=0.0, seed=0, return_noise_mask=False):
    """Two elongated Gaussian classes in the plane, optionally with label noise.

    The clean points come in (near) equal numbers from N(mu+, S) and
    N(mu-, S) with mu+ = (0.5, -3), mu- = (-0.5, 3), S = diag(0.2, 3). The
    last ``round(alpha * n)`` rows are noise points drawn from a correlated
    standard Gaussian at the origin with labels from a fair coin. The
    optimal boundary is ``x2 = 2.5 x1``.
    """
    if n < 2:
        raise ValueError("need n >= 2")
    rng = np.random.default_rng(seed)
    m = _n_noise(n, alpha)
    k = n - m
    y_clean = _balanced_labels(k, rng)
    mu = np.where(y_clean[:, None] > 0, MU_POS, MU_NEG)
    X_clean = mu + rng.standard_normal((k, 2)) * np.sqrt(SIGMA_DIAG)
    L = np.linalg.cholesky(NOISE_COV)
    X_noise = rng.standard_normal((m, 2)) @ L.T
    y_noise = rng.choice([-1.0, 1.0], size=m)
    d = Dataset(np.vstack([X_clean, X_noise]), np.concatenate([y_clean, y_noise]),
                Task.CLASSIFICATION)
    if return_noise_mask:
        return d, np.arange(n) >= k
    return d


def _block_cov(p, rho, active=10):
    S = np.eye(p)
    a = min(active, p)
    S[:a, :a] = rho
    S[np.arange(a), np.arange(a)] = 1.0
    return S


def gen_highdim_classes(n, p, rho=0.5, alpha=0.0, seed=0):
    """High-dimensional two-class data where only the first 10 features matter.

    Class means are +-(1,...,1,0,...,0) with ten ones; the covariance has an
    equicorrelated 10 x 10 block (off-diagonal ``rho``) and identity
    elsewhere. A fraction ``alpha`` of rows are noise points from N(0, S)
    with random labels, placed last.
    """
    if p <= 10:
        raise ValueError("need p > 10")
    if not -1.0 / 9.0 < rho < 1.0:
        raise ValueError(f"rho must lie in (-1/9, 1) for a valid covariance, got {rho}")
    rng = np.random.default_rng(seed)
    m = _n_noise(n, alpha)
    k = n - m
    L10 = np.linalg.cholesky(_block_cov(10, rho))

    def draw(rows):
        Z = rng.standard_normal((rows, p))
        Z[:, :10] = Z[:, :10] @ L10.T
        return Z

    y_clean = _balanced_labels(k, rng)
    X = draw(n)
    X[:k, :10] += y_clean[:, None]
    y_noise = rng.choice([-1.0, 1.0], size=m)
    return Dataset(X, np.concatenate([y_clean, y_noise]), Task.CLASSIFICATION)


def toeplitz_cholesky(p, r=0.5):
    """Lower Cholesky factor of the Toeplitz matrix with entries ``r**|i-j|``."""
    idx = np.arange(p)
    return np.linalg.cholesky(r ** np.abs(idx[:, None] - idx[None, :]))


def gen_blocky_regression(n=720, p=2560, groups=80, active=10, noise=None, seed=0):
    """Correlated Gaussian design with a sparse, piecewise-constant truth.

    Rows are N(0, Omega) with ``Omega_ij = 0.5**|i-j|``, then each column is
    rescaled to Euclidean norm ``sqrt(n)``. The ``p`` coordinates are split
    into ``groups`` consecutive blocks; ``active`` blocks chosen at random
    get a common U[-3, 3] value.

    Returns
    -------
    data : Dataset
    beta_star : ndarray of shape (p,)
    """
    if groups < 1 or p % groups:
        raise ValueError(f"groups ({groups}) must divide p ({p})")
    if not 0 <= active <= groups:
        raise ValueError("active must lie between 0 and groups")
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(seed)
    L = toeplitz_cholesky(p)
    X = rng.standard_normal((n, p)) @ L.T
    X *= np.sqrt(n) / np.linalg.norm(X, axis=0)
    size = p // groups
    chosen = np.sort(rng.choice(groups, size=active, replace=False))
    beta = np.zeros(p)
    for g in chosen:
        beta[g * size:(g + 1) * size] = rng.uniform(-3.0, 3.0)
    eps = sample_noise(noise, n, rng)
    y = eps if active == 0 else X @ beta + eps
    return Dataset(X, y, Task.REGRESSION), beta


def default_pulse_signal(n=1000):
    """Sparse piecewise-constant pulse train with pulses of varying width."""
    beta = np.zeros(n)
    # (start, width, height) as fractions of n
    for start, width, height in [(0.08, 0.02, 2.0), (0.2, 0.06, -1.5), (0.38, 0.01, 3.0),
                                 (0.5, 0.1, 1.0), (0.7, 0.03, -2.5), (0.85, 0.05, 1.5)]:
        a = int(start * n)
        b = max(a + 1, int((start + width) * n))
        beta[a:b] = height
    return beta


def gen_pulse(beta_star=None, noise=None, seed=0, scale=0.2):
    """Noisy pulse signal ``y = beta_star + scale * eps``."""
    beta_star = default_pulse_signal() if beta_star is None else np.asarray(beta_star, float)
    noise = noise or NoiseSpec()
    rng = np.random.default_rng(seed)
    return beta_star + scale * sample_noise(noise, beta_star.shape[0], rng)
