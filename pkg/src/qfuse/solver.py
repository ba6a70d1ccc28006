"""Linearized multi-block ADMM for the unified fused-Lasso problem.

The problem is split as

    min  loss(r) + lambda1 ||b||_1 + lambda2 ||b_F||_1
    s.t. X b + gamma b0 + r = ybar,   F b = b_F

(``b_F`` is called ``b`` below, the coefficients ``beta``). Each iteration
takes one linearized proximal step in ``(beta0, beta)``, then closed-form
updates of ``b`` and ``r``, then the two dual ascent steps. ``mu1 = mu2 =
mu`` throughout.

Residual naming follows the published rule: the quantity called *primal
residual* here is built from the change in ``(b, r)`` (the conventional
dual residual), and the *dual residual* is the constraint violation. The
adaptive-``mu`` rule and the stopping test use these names consistently.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .linops import DifferenceOperator, StackedGram, diff_adjoint, diff_apply, power_method
from .model import Coefficients, Loss, check_loss, loss_value
from .prox import ProxScale, hinge_prox, l2_norm_prox, ls_r_update, quantile_prox, soft_threshold

__all__ = [
    "SolverConfig",
    "SolverState",
    "Residuals",
    "Termination",
    "SolveReport",
    "SolverDivergenceError",
    "linearized_gradient",
    "update_beta0",
    "update_beta",
    "update_b",
    "update_r",
    "update_duals",
    "compute_residuals",
    "adapt_mu",
    "stop_thresholds",
    "check_stop",
    "h_norm_step",
    "spectral_radius",
    "solve",
]


class SolverDivergenceError(FloatingPointError):
    """Raised when an iterate stops being finite."""

    def __init__(self, iteration, detail=""):
        self.iteration = iteration
        msg = f"non-finite iterate at iteration {iteration}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)


class Termination(str, enum.Enum):
    CONVERGED = "Converged"
    MAX_ITER = "MaxIter"


@dataclass(frozen=True)
class SolverConfig:
    """Tuning constants for :func:`solve`.

    Parameters
    ----------
    eta_factor : float
        Linearization weight as a multiple of the estimated spectral radius
        of the stacked Gram operator. Must exceed 0.75; values >= 1 give the
        classical convergence guarantee.
    mu_init : float
        Initial augmented-Lagrangian weight.
    adaptive_mu : bool
        Apply the residual-balancing rule for ``mu`` until ``mu_freeze_iter``.
    c1, c2 : float
        Imbalance ratio that triggers a change and the multiplicative step.
    eps1, eps2 : float
        Absolute and relative stopping tolerances.
    max_iter : int
        Iteration cap.
    trace_every : int
        Record traces every this many iterations (0 disables).
    power_tol, power_max_iter : float, int
        Power-method settings for the spectral-radius estimate.
    """

    eta_factor: float = 0.8
    mu_init: float = 0.1
    adaptive_mu: bool = True
    c1: float = 10.0
    c2: float = 2.0
    mu_freeze_iter: int = 1000
    eps1: float = 1e-4
    eps2: float = 1e-4
    max_iter: int = 10000
    trace_every: int = 1
    power_tol: float = 1e-2
    power_max_iter: int = 100

    def __post_init__(self):
        if not self.eta_factor > 0.75:
            raise ValueError(f"eta_factor must exceed 0.75, got {self.eta_factor}")
        if not (self.c1 > 1 and self.c2 > 1):
            raise ValueError("c1 and c2 must exceed 1")
        if not self.mu_init > 0:
            raise ValueError("mu_init must be positive")
        if self.eps1 < 0 or self.eps2 < 0:
            raise ValueError("tolerances must be non-negative")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.trace_every < 0:
            raise ValueError("trace_every must be non-negative")


@dataclass(frozen=True)
class SolverState:
    """One iterate: primal ``(beta0, beta, b, r)``, duals ``(u, v)`` and ``mu``."""

    beta0: float
    beta: np.ndarray
    b: np.ndarray
    r: np.ndarray
    u: np.ndarray
    v: np.ndarray
    mu: float
    k: int = 0

    @classmethod
    def zeros(cls, n, p, mu):
        return cls(0.0, np.zeros(p), np.zeros(p - 1), np.zeros(n), np.zeros(n),
                   np.zeros(p - 1), mu, 0)


@dataclass(frozen=True)
class Residuals:
    primal: float
    dual: float


@dataclass
class SolveReport:
    coefficients: Coefficients
    iterations: int
    termination: Termination
    objective_trace: list = field(default_factory=list)
    primal_trace: list = field(default_factory=list)
    dual_trace: list = field(default_factory=list)
    h_step_trace: list = field(default_factory=list)
    mu_trace: list = field(default_factory=list)
    trace_iterations: list = field(default_factory=list)
    final_state: SolverState | None = None
    rho: float = float("nan")
    eta: float = float("nan")

    @property
    def converged(self):
        return self.termination is Termination.CONVERGED


# -- single-step kernels -----------------------------------------------------

def linearized_gradient(prob, state):
    """Gradient of the smooth part of the ``(beta0, beta)`` subproblem at ``state``.

    Returns a vector of length p+1 (intercept entry first); without an
    intercept the first entry is 0.
    """
    d = prob.design
    mu = state.mu
    fit_res = d.fitted(state.beta0, state.beta) - prob.ybar + state.r - state.u / mu
    fus_res = diff_apply(state.beta) - state.b - state.v / mu
    g0 = mu * float(d.gamma @ fit_res) if d.has_intercept else 0.0
    tail = mu * d.rmatvec(fit_res) + mu * diff_adjoint(fus_res)
    return np.concatenate([[g0], tail])


def update_beta0(beta0, g0, eta):
    if not eta > 0:
        raise ValueError("eta must be positive")
    return beta0 - g0 / eta


def update_beta(beta, g_tail, eta, lambda1):
    if not eta > 0:
        raise ValueError("eta must be positive")
    return soft_threshold(np.asarray(beta) - np.asarray(g_tail) / eta, lambda1 / eta)


def update_b(f_beta, v, lambda2, mu2):
    """Fusion auxiliary update from ``F beta^{k+1}`` and the fusion dual."""
    if not mu2 > 0:
        raise ValueError("mu2 must be positive")
    return soft_threshold(np.asarray(f_beta) - np.asarray(v) / mu2, lambda2 / mu2)


def update_r(w, loss, tau, mu1):
    """Residual-block update: the prox of the loss at ``w = ybar - fitted + u/mu1``."""
    w = np.asarray(w, dtype=np.float64)
    loss = Loss(loss)
    if loss is Loss.QUANTILE:
        return quantile_prox(w, ProxScale(mu1, w.shape[0], tau))
    if loss is Loss.LEAST_SQUARES:
        return ls_r_update(w, mu1)
    if loss is Loss.SQUARE_ROOT:
        return l2_norm_prox(w, mu1)
    if loss is Loss.HINGE:
        return hinge_prox(w, mu1)
    raise ValueError(f"unknown loss {loss!r}")


def update_duals(u, v, fit_violation, fusion_violation, mu1, mu2):
    """Dual ascent: ``u - mu1 * (Xb + gamma b0 + r - ybar)``, ``v - mu2 * (F b - b_F)``."""
    return u - mu1 * np.asarray(fit_violation), v - mu2 * np.asarray(fusion_violation)


def _primal_residual(mu, gamma_dr, xt_dr, ft_db):
    tail = mu * (xt_dr + ft_db)
    return math.sqrt((mu * gamma_dr) ** 2 + float(tail @ tail))


def _dual_residual(fit_violation, fusion_violation):
    return math.sqrt(float(fit_violation @ fit_violation) + float(fusion_violation @ fusion_violation))


def compute_residuals(prob, prev, state):
    """Residuals between consecutive iterates, using ``state.mu``."""
    d = prob.design
    dr = prev.r - state.r
    db = state.b - prev.b
    gamma_dr = float(d.gamma @ dr) if d.has_intercept else 0.0
    primal = _primal_residual(state.mu, gamma_dr, d.rmatvec(dr), diff_adjoint(db))
    fit_violation = d.fitted(state.beta0, state.beta) + state.r - prob.ybar
    fusion_violation = diff_apply(state.beta) - state.b
    return Residuals(primal, _dual_residual(fit_violation, fusion_violation))


def adapt_mu(res, mu, k, cfg):
    """Residual-balancing update of ``mu``; ``mu`` is frozen from ``cfg.mu_freeze_iter`` on."""
    if not cfg.adaptive_mu or k >= cfg.mu_freeze_iter:
        return mu
    if cfg.c1 * res.primal < res.dual:
        return mu * cfg.c2
    if res.primal > cfg.c1 * res.dual:
        return mu / cfg.c2
    return mu


def _thresholds(cfg, n, p, dim, gamma_u, xt_u_ft_v, fitted_sq, fbeta_sq, b_sq, r_sq):
    primal_tol = math.sqrt(dim) * cfg.eps1 + cfg.eps2 * math.sqrt(
        gamma_u ** 2 + float(xt_u_ft_v @ xt_u_ft_v))
    dual_tol = math.sqrt(n + p - 1) * cfg.eps1 + cfg.eps2 * math.sqrt(
        max(fitted_sq + fbeta_sq, b_sq + r_sq, float(n)))
    return primal_tol, dual_tol


def stop_thresholds(prob, state, cfg):
    """Primal and dual tolerances at ``state``."""
    d = prob.design
    fitted = d.fitted(state.beta0, state.beta)
    fbeta = diff_apply(state.beta)
    gamma_u = float(d.gamma @ state.u) if d.has_intercept else 0.0
    dim = prob.p + (1 if d.has_intercept else 0)
    return _thresholds(cfg, prob.n, prob.p, dim, gamma_u,
                       d.rmatvec(state.u) + diff_adjoint(state.v),
                       float(fitted @ fitted), float(fbeta @ fbeta),
                       float(state.b @ state.b), float(state.r @ state.r))


def check_stop(prob, res, state, cfg):
    """True when both residuals are at or below their tolerances."""
    primal_tol, dual_tol = stop_thresholds(prob, state, cfg)
    return res.primal <= primal_tol and res.dual <= dual_tol


def _h_step(eta, mu, d_tilde_sq, d_fit_sq, d_fbeta_sq, db_sq, dr_sq, du_sq, dv_sq):
    return (eta * d_tilde_sq - mu * (d_fit_sq + d_fbeta_sq)
            + mu * (db_sq + dr_sq) + (du_sq + dv_sq) / mu)


def h_norm_step(prob, prev, state, eta):
    """``||w^k - w^{k+1}||_H^2`` with ``H = diag(eta I - Xt^T Xt, mu I, I / mu)``.

    ``Xt^T Xt`` is the stacked Gram operator at ``state.mu``; ``H`` is
    positive semidefinite once ``eta`` is at least its spectral radius.
    """
    d = prob.design
    mu = state.mu
    dbeta = state.beta - prev.beta
    dbeta0 = state.beta0 - prev.beta0
    d_fit = d.fitted(dbeta0, dbeta)
    d_fb = diff_apply(dbeta)
    sq = lambda a: float(a @ a)
    return _h_step(eta, mu, dbeta0 ** 2 + sq(dbeta), sq(d_fit), sq(d_fb),
                   sq(state.b - prev.b), sq(state.r - prev.r),
                   sq(state.u - prev.u), sq(state.v - prev.v))


def spectral_radius(prob, tol=1e-2, max_iter=100):
    """Power-method estimate of the largest eigenvalue of ``Xbar^T Xbar + Fbar^T Fbar``.

    With ``mu1 = mu2 = mu`` the stacked Gram operator is exactly ``mu``
    times this, so one estimate serves every value of ``mu``.
    """
    g = StackedGram(prob.design, DifferenceOperator(prob.p), 1.0, 1.0)
    return power_method(g, tol=tol, max_iter=max_iter).estimate


# -- driver --------------------------------------------------------------------

def solve(prob, cfg=None):
    """Run the linearized ADMM from the all-zero starting point.

    Returns a :class:`SolveReport`. Raises :class:`SolverDivergenceError`
    if an iterate becomes non-finite.
    """
    cfg = cfg or SolverConfig()
    d = prob.design
    diff = DifferenceOperator(prob.p)
    n, p = prob.n, prob.p
    ybar = prob.ybar
    gamma = d.gamma
    icpt = d.has_intercept
    dim = p + (1 if icpt else 0)
    tau, lam1, lam2, loss = prob.tau, prob.lambda1, prob.lambda2, prob.loss

    rho = spectral_radius(prob, cfg.power_tol, cfg.power_max_iter)
    mu = cfg.mu_init
    eta = cfg.eta_factor * mu * rho

    beta0 = 0.0
    beta = np.zeros(p)
    b = np.zeros(p - 1)
    r = np.zeros(n)
    u = np.zeros(n)
    v = np.zeros(p - 1)
    xb = np.zeros(n)
    fbeta = np.zeros(p - 1)
    xt_u = np.zeros(p)
    # fit_res = X beta + gamma beta0 - ybar + r - u / mu
    fit_res = -ybar
    xt_fit = d.rmatvec(fit_res)

    report = SolveReport(Coefficients(0.0, beta), 0, Termination.MAX_ITER)
    every = cfg.trace_every
    termination = Termination.MAX_ITER
    k = 0
    for k in range(cfg.max_iter):
        # (beta0, beta): one linearized proximal step
        g_tail = mu * xt_fit + mu * diff_adjoint(fbeta - b - v / mu)
        beta_new = update_beta(beta, g_tail, eta, lam1)
        if icpt:
            beta0_new = update_beta0(beta0, mu * float(gamma @ fit_res), eta)
        else:
            beta0_new = 0.0
        xb_new = d.matvec(beta_new)
        fitted = xb_new + gamma * beta0_new if icpt else xb_new
        fbeta_new = diff_apply(beta_new)

        b_new = update_b(fbeta_new, v, lam2, mu)
        r_new = update_r(ybar - fitted + u / mu, loss, tau, mu)

        fit_viol = fitted + r_new - ybar
        fus_viol = fbeta_new - b_new
        u_new, v_new = update_duals(u, v, fit_viol, fus_viol, mu, mu)

        # one pass over X for both X^T (r^k - r^{k+1}) and X^T u^{k+1}
        dr = r - r_new
        db = b_new - b
        xt_pair = d.rmatvec(np.column_stack([dr, u_new]))
        xt_dr, xt_u_new = xt_pair[:, 0], xt_pair[:, 1]
        ft_v_new = diff_adjoint(v_new)

        res = Residuals(
            _primal_residual(mu, float(gamma @ dr) if icpt else 0.0, xt_dr, diff_adjoint(db)),
            _dual_residual(fit_viol, fus_viol))
        if not (math.isfinite(res.primal) and math.isfinite(res.dual)
                and math.isfinite(beta0_new) and np.all(np.isfinite(beta_new))):
            raise SolverDivergenceError(k + 1, f"eta={eta:.3g}, mu={mu:.3g}")

        if every and (k + 1) % every == 0:
            dbeta = beta_new - beta
            dbeta0 = beta0_new - beta0
            d_fit = (xb_new - xb) + (gamma * dbeta0 if icpt else 0.0)
            d_fb = fbeta_new - fbeta
            du = u_new - u
            dv = v_new - v
            report.h_step_trace.append(_h_step(
                eta, mu, dbeta0 ** 2 + float(dbeta @ dbeta), float(d_fit @ d_fit),
                float(d_fb @ d_fb), float(db @ db), float(dr @ dr),
                float(du @ du), float(dv @ dv)))
            resid = ybar - fitted
            report.objective_trace.append(
                loss_value(loss, resid, tau) + lam1 * float(np.abs(beta_new).sum())
                + lam2 * float(np.abs(fbeta_new).sum()))
            report.primal_trace.append(res.primal)
            report.dual_trace.append(res.dual)
            report.mu_trace.append(mu)
            report.trace_iterations.append(k + 1)

        primal_tol, dual_tol = _thresholds(
            cfg, n, p, dim, float(gamma @ u_new) if icpt else 0.0, xt_u_new + ft_v_new,
            float(fitted @ fitted), float(fbeta_new @ fbeta_new),
            float(b_new @ b_new), float(r_new @ r_new))

        mu_next = mu
        converged = res.primal <= primal_tol and res.dual <= dual_tol
        if not converged:
            mu_next = adapt_mu(res, mu, k, cfg)

        # next fit_res = fit_viol - u_new / mu_next, and X^T fit_viol = X^T (u - u_new) / mu
        fit_res = fit_viol - u_new / mu_next
        xt_fit = (xt_u - xt_u_new) / mu - xt_u_new / mu_next

        beta0, beta, b, r, u, v = beta0_new, beta_new, b_new, r_new, u_new, v_new
        xb, fbeta, xt_u = xb_new, fbeta_new, xt_u_new
        if mu_next != mu:
            mu = mu_next
            eta = cfg.eta_factor * mu * rho
        if converged:
            termination = Termination.CONVERGED
            break

    report.coefficients = Coefficients(beta0, beta)
    report.iterations = k + 1
    report.termination = termination
    report.final_state = SolverState(beta0, beta, b, r, u, v, mu, k + 1)
    report.rho = rho
    report.eta = eta
    return report


def objective_at(prob, state):
    """Objective value at the primal part of ``state``."""
    resid = prob.ybar - prob.design.fitted(state.beta0, state.beta)
    if prob.loss is Loss.QUANTILE:
        lv = float(np.mean(check_loss(resid, prob.tau)))
    else:
        lv = loss_value(prob.loss, resid, prob.tau)
    return lv + prob.lambda1 * float(np.abs(state.beta).sum()) + prob.lambda2 * float(
        np.abs(np.diff(state.beta)).sum())
