"""Brute-force reference minimizers for tiny problems and scalar prox objectives.

These are deliberately simple and slow. They exist to check the closed-form
and iterative code paths against something that shares none of their logic.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .model import Coefficients, Loss, check_loss

__all__ = [
    "OracleConfig",
    "OracleResult",
    "oracle_solve",
    "scalar_prox_oracle",
    "l2_prox_oracle",
    "SCALAR_OBJECTIVES",
]

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class OracleConfig:
    """Nested-grid settings.

    Each round evaluates a ``points_per_axis``-point grid per axis on a box
    centred at the incumbent; the box side shrinks by ``shrink`` per round.
    """

    coarse_range: tuple = (-10.0, 10.0)
    refinement_rounds: int = 6
    points_per_axis: int = 41
    shrink: float = 4.0
    n_max: int = 10
    dim_max: int = 4
    chunk: int = 200_000

    def __post_init__(self):
        lo, hi = self.coarse_range
        if not hi > lo:
            raise ValueError("coarse_range must be increasing")
        if self.points_per_axis < 3 or self.points_per_axis % 2 == 0:
            raise ValueError("points_per_axis must be odd and >= 3")
        if self.refinement_rounds < 1 or self.shrink <= 1:
            raise ValueError("need at least one round and shrink > 1")


@dataclass
class OracleResult:
    coefficients: Coefficients
    value: float
    history: list = field(default_factory=list)
    spacing: float = float("nan")
    error_bound: float = float("nan")


def _loss_rows(loss, r, tau):
    if loss is Loss.QUANTILE:
        return check_loss(r, tau).mean(axis=-1)
    if loss is Loss.LEAST_SQUARES:
        return np.einsum("...i,...i->...", r, r)
    if loss is Loss.SQUARE_ROOT:
        return np.sqrt(np.einsum("...i,...i->...", r, r))
    return np.maximum(r, 0.0).sum(axis=-1)


def _penalty_rows(prob, beta):
    pen = prob.lambda1 * np.abs(beta).sum(axis=1)
    if beta.shape[1] > 1:
        pen = pen + prob.lambda2 * np.abs(np.diff(beta, axis=1)).sum(axis=1)
    return pen


def _profiles_intercept(prob):
    return prob.has_intercept and prob.loss in (Loss.QUANTILE, Loss.HINGE)


def _batch_objective(prob, pts):
    """Objective at each grid row, plus the intercept used for it.

    Rows are ``(b0, b)`` in general. When the loss is piecewise linear and
    there is an intercept, rows hold ``b`` only and ``b0`` is minimized
    exactly: the objective is then piecewise linear and convex in ``b0``
    with kinks at ``z_i / gamma_i``, so a kink attains the minimum.
    """
    if not prob.has_intercept:
        r = prob.ybar[None, :] - pts
        return _loss_rows(prob.loss, r, prob.tau) + _penalty_rows(prob, pts), np.zeros(len(pts))
    if not _profiles_intercept(prob):
        r = prob.ybar[None, :] - pts @ np.column_stack([prob.gamma, prob.X]).T
        return _loss_rows(prob.loss, r, prob.tau) + _penalty_rows(prob, pts[:, 1:]), pts[:, 0]
    gamma = prob.gamma
    z = prob.ybar[None, :] - pts @ prob.X.T
    nz = np.flatnonzero(gamma)
    if nz.size == 0:
        cand = np.zeros((len(pts), 1))
    else:
        cand = z[:, nz] / gamma[nz]
    r = z[:, None, :] - cand[:, :, None] * gamma[None, None, :]
    vals = _loss_rows(prob.loss, r, prob.tau)
    j = np.argmin(vals, axis=1)
    rows = np.arange(len(pts))
    return vals[rows, j] + _penalty_rows(prob, pts), cand[rows, j]


def _lipschitz(prob, incumbent):
    """Sup-norm-to-value Lipschitz constant of the objective (local for least squares)."""
    Xbar = prob.design.todense()
    row_l1 = np.abs(Xbar).sum(axis=1)
    p = prob.p
    pen = prob.lambda1 * p + 2.0 * prob.lambda2 * max(p - 1, 0)
    if prob.loss is Loss.QUANTILE:
        return float(max(prob.tau, 1 - prob.tau) * row_l1.mean()) + pen
    if prob.loss is Loss.HINGE:
        return float(row_l1.sum()) + pen
    if prob.loss is Loss.SQUARE_ROOT:
        return float(np.linalg.norm(Xbar, axis=0).sum()) + pen
    r = prob.ybar - Xbar @ incumbent
    return float(2.0 * (np.abs(r) @ row_l1)) + pen


def oracle_solve(prob, cfg=None):
    """Nested-grid minimization of the objective over ``(b0, b)``.

    Returns an :class:`OracleResult` with the incumbent, its value, the
    best value after each round, the final grid spacing and a bound on the
    gap to the true minimum that holds when the minimizer lies in the final
    box.
    """
    cfg = cfg or OracleConfig()
    dim = prob.p + (1 if prob.has_intercept else 0)
    if dim > cfg.dim_max or prob.n > cfg.n_max:
        raise ValueError(
            f"oracle limited to n <= {cfg.n_max} and {cfg.dim_max} unknowns, got n={prob.n}, "
            f"{dim} unknowns")
    profiled = _profiles_intercept(prob)
    gdim = prob.p if profiled else dim
    chunk = max(1, cfg.chunk // (prob.n if profiled else 1))
    lo, hi = cfg.coarse_range
    center = np.full(gdim, (lo + hi) / 2.0)
    half = (hi - lo) / 2.0
    m = cfg.points_per_axis
    best_x, best_b0, best_v = None, 0.0, np.inf
    history = []
    spacing = np.nan
    for _ in range(cfg.refinement_rounds):
        axes = np.linspace(-half, half, m)
        spacing = axes[1] - axes[0]
        grids = np.meshgrid(*([axes] * gdim), indexing="ij")
        offsets = np.stack([g.ravel() for g in grids], axis=1)
        for start in range(0, offsets.shape[0], chunk):
            pts = center + offsets[start:start + chunk]
            vals, b0s = _batch_objective(prob, pts)
            i = int(np.argmin(vals))
            if vals[i] < best_v:
                best_v, best_x, best_b0 = float(vals[i]), pts[i].copy(), float(b0s[i])
        history.append(best_v)
        center = best_x
        half /= cfg.shrink
    if profiled:
        full = np.concatenate([[best_b0], best_x])
    else:
        full = best_x
    bound = _lipschitz(prob, full) * spacing / 2.0
    if prob.has_intercept:
        coef = Coefficients(full[0], full[1:])
    else:
        coef = Coefficients(0.0, full)
    return OracleResult(coef, best_v, history, float(spacing), float(bound))


# -- scalar prox objectives ------------------------------------------------------
# Each entry maps params -> (f, right_derivative). All objectives are strictly
# convex, so the minimizer is the leftmost point with a non-negative right
# derivative.

def _quad(mu, z0):
    return (lambda z: 0.5 * mu * (z - z0) ** 2), (lambda z: mu * (z - z0))


def _make_quadratic(params, z0):
    mu = params.get("mu", 2.0)
    return _quad(mu, z0)


def _make_soft(params, z0):
    kappa = params["kappa"]
    f, df = _quad(1.0, z0)
    return (lambda z: kappa * abs(z) + f(z)), (lambda z: (kappa if z >= 0 else -kappa) + df(z))


def _make_quantile(params, z0):
    mu, tau, n = params["mu"], params["tau"], params.get("n", 1)
    f, df = _quad(mu, z0)
    return ((lambda z: float(check_loss(z, tau)) / n + f(z)),
            (lambda z: (tau if z >= 0 else tau - 1.0) / n + df(z)))


def _make_hinge(params, z0):
    mu = params["mu"]
    f, df = _quad(mu, z0)
    return (lambda z: max(0.0, z) + f(z)), (lambda z: (1.0 if z >= 0 else 0.0) + df(z))


def _make_least_squares(params, z0):
    mu = params["mu"]
    f, df = _quad(mu, z0)
    return (lambda z: z * z + f(z)), (lambda z: 2.0 * z + df(z))


SCALAR_OBJECTIVES = {
    "quadratic": _make_quadratic,
    "soft": _make_soft,
    "quantile": _make_quantile,
    "hinge": _make_hinge,
    "least_squares": _make_least_squares,
}


def _bracket(f, z0):
    step = 1.0
    for _ in range(200):
        a, b = z0 - step, z0 + step
        m = 0.5 * (a + b)
        if f(a) >= f(m) <= f(b):
            return a, b
        step *= 2.0
    raise RuntimeError(f"could not bracket a minimizer around {z0}")


def scalar_prox_oracle(objective_id, params, z0, tol=1e-12):
    """Minimizer of a registered scalar prox objective.

    A golden-section search narrows an expanding bracket, then bisection on
    the sign of the analytic right derivative finishes the job. Golden
    section alone stalls near ``sqrt(machine eps)`` relative accuracy.

    Parameters
    ----------
    objective_id : str
        Key of :data:`SCALAR_OBJECTIVES`.
    params : dict
        Objective parameters (``mu``, ``tau``, ``n``, ``kappa`` as needed).
    z0 : float
        Prox centre.
    """
    try:
        make = SCALAR_OBJECTIVES[objective_id]
    except KeyError:
        raise ValueError(f"unknown objective {objective_id!r}") from None
    z0 = float(z0)
    f, dplus = make(params, z0)
    a, b = _bracket(f, z0)
    c, d = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-6 * max(1.0, abs(a) + abs(b)):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = f(d)
    # widen slightly so the root of dplus is strictly inside
    w = 10.0 * (b - a) + 1e-9
    lo, hi = a - w, b + w
    if dplus(lo) >= 0 or dplus(hi) < 0:
        raise RuntimeError("golden-section bracket lost the minimizer")
    for _ in range(400):
        if hi - lo <= tol * max(1.0, abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if dplus(mid) >= 0:
            hi = mid
        else:
            lo = mid
    return hi


def l2_prox_oracle(z0, mu):
    """Minimizer of ``||z|| + mu/2 ||z - z0||^2``.

    The minimizer lies on the ray through ``z0``, so this reduces to the
    scalar problem ``min_{t >= 0} t + mu/2 (t - ||z0||)^2``.
    """
    z0 = np.asarray(z0, dtype=np.float64)
    nrm = float(np.linalg.norm(z0))
    if nrm == 0.0:
        return np.zeros_like(z0)
    # |t| + mu/2 (t - nrm)^2 has its minimizer at t >= 0 already, so the
    # constraint is inactive; divide through by mu to match the "soft" form
    t = scalar_prox_oracle("soft", {"kappa": 1.0 / mu}, nrm)
    return z0 * (t / nrm)
