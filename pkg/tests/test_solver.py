import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import qfuse.solver as solver_mod
from qfuse.linops import DifferenceOperator
from qfuse.model import (Dataset, Loss, build_flsa, build_unified_regression, check_loss,
                         objective)
from qfuse.oracle import oracle_solve, scalar_prox_oracle
from qfuse.solver import (Residuals, SolverConfig, SolverDivergenceError, SolverState,
                          Termination, adapt_mu, check_stop, compute_residuals, h_norm_step,
                          linearized_gradient, solve, stop_thresholds, update_b, update_beta,
                          update_beta0, update_duals, update_r)


def _random_state(rng, n, p, mu=0.7):
    return SolverState(rng.normal(), rng.normal(size=p), rng.normal(size=p - 1),
                       rng.normal(size=n), rng.normal(size=n), rng.normal(size=p - 1), mu)


def _tiny(rng, n=4, p=3, tau=0.3, l1=0.2, l2=0.1, loss=Loss.QUANTILE):
    return build_unified_regression(Dataset(rng.normal(size=(n, p)), rng.normal(size=n)),
                                    tau, l1, l2, loss)


def _stacked(prob, state):
    """Dense Xt and yt of the linearized subproblem."""
    mu = state.mu
    p = prob.p
    Fbar = np.column_stack([np.zeros(p - 1), DifferenceOperator(p).todense()])
    Xt = np.vstack([np.sqrt(mu) * prob.Xbar, np.sqrt(mu) * Fbar])
    yt = np.concatenate([np.sqrt(mu) * (prob.ybar - state.r + state.u / mu),
                         np.sqrt(mu) * (state.b + state.v / mu)])
    return Xt, yt


class TestConfig:
    def test_defaults(self):
        c = SolverConfig()
        assert (c.eta_factor, c.c1, c.c2, c.mu_freeze_iter, c.eps1, c.eps2, c.max_iter) == (
            0.8, 10.0, 2.0, 1000, 1e-4, 1e-4, 10000)

    @pytest.mark.parametrize("kw", [dict(eta_factor=0.75), dict(c1=1.0), dict(c2=0.5),
                                    dict(mu_init=0.0), dict(max_iter=0), dict(trace_every=-1)])
    def test_invalid(self, kw):
        with pytest.raises(ValueError):
            SolverConfig(**kw)


class TestKernels:
    def test_gradient_matches_dense(self):
        rng = np.random.default_rng(0)
        prob = _tiny(rng)
        st_ = _random_state(rng, prob.n, prob.p)
        Xt, yt = _stacked(prob, st_)
        bt = np.concatenate([[st_.beta0], st_.beta])
        np.testing.assert_allclose(linearized_gradient(prob, st_), Xt.T @ (Xt @ bt - yt),
                                   rtol=1e-12, atol=1e-12)

    def test_beta0_examples(self):
        assert update_beta0(0.0, 0.0, 3.0) == 0.0
        assert update_beta0(2.5, 3.0, 3.0) == 1.5
        with pytest.raises(ValueError):
            update_beta0(0.0, 1.0, 0.0)

    def test_beta_examples(self):
        np.testing.assert_allclose(update_beta([1.0, -2.0], [0.5, 1.0], 2.0, 0.0), [0.75, -2.5])
        np.testing.assert_array_equal(update_beta([0.3, -0.2], [0.0, 0.0], 1.0, 0.5), [0, 0])

    def test_beta_step_minimizes_surrogate(self):
        # per component: lambda1 |b| + g (b - bk) + eta/2 (b - bk)^2
        rng = np.random.default_rng(1)
        bk, g, eta, lam = rng.normal(size=4), rng.normal(size=4), 2.3, 0.4
        got = update_beta(bk, g, eta, lam)
        for i in range(4):
            ref = scalar_prox_oracle("soft", {"kappa": lam / eta}, bk[i] - g[i] / eta)
            assert abs(got[i] - ref) <= 1e-10

    def test_b_examples(self):
        np.testing.assert_array_equal(update_b([1.0, -2.0], [0.0, 0.0], 0.0, 1.0), [1.0, -2.0])
        assert update_b([1.0], [0.0], 0.5, 1.0)[0] == 0.5
        np.testing.assert_allclose(update_b([0.0, 0.0], [1.0, -3.0], 1.0, 2.0), [0.0, 1.0])

    @pytest.mark.parametrize("loss", list(Loss))
    def test_r_zero(self, loss):
        np.testing.assert_array_equal(update_r(np.zeros(3), loss, 0.4, 1.3), np.zeros(3))

    def test_r_examples(self):
        assert update_r([1.0], Loss.QUANTILE, 0.5, 1.0)[0] == pytest.approx(0.5, abs=1e-12)
        assert update_r([2.0], Loss.HINGE, 0.5, 1.0)[0] == pytest.approx(1.0, abs=1e-12)
        with pytest.raises(ValueError):
            update_r([1.0], "huber", 0.5, 1.0)

    def test_duals(self):
        u, v = np.array([1.0, 2.0]), np.array([3.0])
        u2, v2 = update_duals(u, v, np.zeros(2), np.zeros(1), 0.5, 0.5)
        np.testing.assert_array_equal(u2, u)
        np.testing.assert_array_equal(v2, v)
        u3, _ = update_duals(u, v, np.full(2, 0.1), np.zeros(1), 2.0, 2.0)
        np.testing.assert_allclose(u3, u - 0.2)


class TestResiduals:
    def test_identical_and_feasible(self):
        rng = np.random.default_rng(2)
        prob = _tiny(rng)
        s = _random_state(rng, prob.n, prob.p)
        assert compute_residuals(prob, s, s).primal == 0.0
        beta = rng.normal(size=prob.p)
        r = prob.ybar - prob.design.fitted(0.3, beta)
        feas = SolverState(0.3, beta, np.diff(-beta), r, s.u, s.v, 1.0)
        assert compute_residuals(prob, s, feas).dual == pytest.approx(0.0, abs=1e-12)

    def test_dense_recompute(self):
        rng = np.random.default_rng(3)
        prob = _tiny(rng)
        a, b = _random_state(rng, prob.n, prob.p), _random_state(rng, prob.n, prob.p, mu=0.7)
        X, g = prob.X, prob.gamma
        F = DifferenceOperator(prob.p).todense()
        mu = b.mu
        dr, db = a.r - b.r, b.b - a.b
        primal = np.sqrt((mu * g @ dr) ** 2 + np.sum((mu * X.T @ dr + mu * F.T @ db) ** 2))
        dual = np.sqrt(np.sum((X @ b.beta + g * b.beta0 + b.r - prob.ybar) ** 2)
                       + np.sum((F @ b.beta - b.b) ** 2))
        res = compute_residuals(prob, a, b)
        assert res.primal == pytest.approx(primal, rel=1e-12)
        assert res.dual == pytest.approx(dual, rel=1e-12)


class TestAdaptMu:
    cfg = SolverConfig()

    def test_rules(self):
        assert adapt_mu(Residuals(1.0, 100.0), 0.1, 0, self.cfg) == 0.2
        assert adapt_mu(Residuals(100.0, 1.0), 0.1, 0, self.cfg) == 0.05
        assert adapt_mu(Residuals(1.0, 5.0), 0.1, 0, self.cfg) == 0.1

    def test_freeze(self):
        assert adapt_mu(Residuals(1.0, 100.0), 0.1, 1000, self.cfg) == 0.1
        assert adapt_mu(Residuals(1.0, 100.0), 0.1, 5, SolverConfig(adaptive_mu=False)) == 0.1


class TestStop:
    def test_saddle_and_start(self):
        rng = np.random.default_rng(4)
        prob = _tiny(rng)
        s = _random_state(rng, prob.n, prob.p)
        assert check_stop(prob, Residuals(0.0, 0.0), s, SolverConfig())
        rep = solve(prob, SolverConfig(max_iter=1))
        assert rep.termination is Termination.MAX_ITER

    def test_inclusive_boundary(self):
        rng = np.random.default_rng(5)
        prob = _tiny(rng)
        s = _random_state(rng, prob.n, prob.p)
        cfg = SolverConfig()
        pt, dt = stop_thresholds(prob, s, cfg)
        assert check_stop(prob, Residuals(pt, dt), s, cfg)
        assert not check_stop(prob, Residuals(np.nextafter(pt, np.inf), dt), s, cfg)


def test_one_iteration_by_hand():
    X = np.array([[1.0, 2.0], [0.5, -1.0]])
    y = np.array([1.0, -0.5])
    prob = build_unified_regression(Dataset(X, y), 0.5, 0.1, 0.2)
    cfg = SolverConfig(max_iter=1, adaptive_mu=False, mu_init=0.5)
    rep = solve(prob, cfg)
    mu, eta = 0.5, rep.eta
    # hand trace from the all-zero start
    fit_res = -y
    g0 = mu * np.ones(2) @ fit_res
    g = mu * X.T @ fit_res
    b0 = -g0 / eta
    beta = np.sign(-g / eta) * np.maximum(np.abs(g / eta) - 0.1 / eta, 0)
    fb = np.array([beta[0] - beta[1]])
    b = np.sign(fb) * np.maximum(np.abs(fb) - 0.2 / mu, 0)
    w = y - X @ beta - b0
    r = np.maximum(w - 0.5 / (2 * mu), np.minimum(0, w + 0.5 / (2 * mu)))
    u = -mu * (X @ beta + b0 + r - y)
    v = -mu * (fb - b)
    s = rep.final_state
    assert s.beta0 == pytest.approx(b0, abs=1e-14)
    np.testing.assert_allclose(s.beta, beta, atol=1e-14)
    np.testing.assert_allclose(s.b, b, atol=1e-14)
    np.testing.assert_allclose(s.r, r, atol=1e-14)
    np.testing.assert_allclose(s.u, u, atol=1e-14)
    np.testing.assert_allclose(s.v, v, atol=1e-14)


def test_intercept_only_quantile():
    rng = np.random.default_rng(6)
    y = rng.normal(size=41)
    prob = build_unified_regression(Dataset(rng.normal(size=(41, 3)), y), 0.25, 50.0, 0.0)
    rep = solve(prob, SolverConfig(eps1=1e-7, eps2=1e-7, max_iter=50000))
    np.testing.assert_allclose(rep.coefficients.beta, 0.0, atol=1e-8)
    # 41 points at tau = 0.25: the unique minimizer is the 11th order statistic
    assert rep.coefficients.beta0 == pytest.approx(np.sort(y)[10], abs=1e-3)


def test_identity_interpolates():
    y = np.array([0.5, -1.0, 2.0, 2.0, 3.5])
    rep = solve(build_flsa(y, 0.5, 0.0, 0.0))
    assert rep.converged
    np.testing.assert_allclose(rep.coefficients.beta, y, atol=1e-3)
    assert objective(build_flsa(y), rep.coefficients) <= 1e-3


@pytest.mark.parametrize("seed", range(5))
def test_matches_oracle(seed):
    rng = np.random.default_rng(100 + seed)
    prob = _tiny(rng, n=int(rng.integers(3, 10)), p=2, tau=float(rng.uniform()),
                 l1=float(rng.uniform()), l2=float(rng.uniform()))
    ref = oracle_solve(prob).value
    got = objective(prob, solve(prob).coefficients)
    assert got <= ref + 1e-3 * (1 + abs(ref))


def test_trace_stride():
    rng = np.random.default_rng(7)
    prob = _tiny(rng, n=30, p=5)
    rep = solve(prob, SolverConfig(max_iter=100, eps1=0, eps2=0, trace_every=10))
    assert rep.iterations == 100
    assert len(rep.objective_trace) == len(rep.primal_trace) == len(rep.h_step_trace) == 10
    rep = solve(prob, SolverConfig(max_iter=100, eps1=0, eps2=0, trace_every=0))
    assert rep.objective_trace == []


def test_traces_match_recomputation():
    rng = np.random.default_rng(8)
    prob = _tiny(rng, n=20, p=4)
    rep = solve(prob, SolverConfig(max_iter=30, eps1=0, eps2=0))
    # objective at the final iterate equals the last trace entry
    assert rep.objective_trace[-1] == pytest.approx(objective(prob, rep.coefficients), rel=1e-12)


def _violations(prob, s):
    fit = prob.design.fitted(s.beta0, s.beta) + s.r - prob.ybar
    return fit, np.diff(-s.beta) - s.b


@pytest.mark.parametrize("seed", range(4))
def test_feasibility_bounded_by_stop_rule(seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(60, 10))
    prob = build_unified_regression(Dataset(X, X[:, 2] + rng.normal(size=60)), 0.5, 0.02, 0.02)
    rep = solve(prob)
    assert rep.converged
    fit, fus = _violations(prob, rep.final_state)
    _, dual_tol = stop_thresholds(prob, rep.final_state, SolverConfig())
    assert np.sqrt(fit @ fit + fus @ fus) <= dual_tol


@pytest.mark.xfail(strict=True, reason="default stopping rule admits sup-norm violations above 1e-3")
def test_feasible_within_1e3_default_tolerance():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(60, 10))
    prob = build_unified_regression(Dataset(X, X[:, 2] + rng.normal(size=60)), 0.5, 0.02, 0.02)
    rep = solve(prob)
    assert rep.converged
    fit, fus = _violations(prob, rep.final_state)
    assert max(np.abs(fit).max(), np.abs(fus).max()) <= 1e-3


def test_divergence_guard(monkeypatch):
    rng = np.random.default_rng(10)
    prob = _tiny(rng, n=20, p=4)
    calls = []
    real = solver_mod.update_r

    def poisoned(w, *a, **k):
        calls.append(1)
        out = real(w, *a, **k)
        return out * np.nan if len(calls) == 3 else out

    monkeypatch.setattr(solver_mod, "update_r", poisoned)
    with pytest.raises(SolverDivergenceError) as exc:
        solve(prob, SolverConfig(adaptive_mu=False))
    assert exc.value.iteration == 3


@pytest.mark.parametrize("loss", [Loss.LEAST_SQUARES, Loss.SQUARE_ROOT, Loss.HINGE])
def test_other_losses_match_oracle(loss):
    rng = np.random.default_rng(11)
    prob = _tiny(rng, n=6, p=2, l1=0.3, l2=0.2, loss=loss)
    ref = oracle_solve(prob).value
    rep = solve(prob, SolverConfig(eps1=1e-6, eps2=1e-6, max_iter=50000))
    assert objective(prob, rep.coefficients) <= ref + 1e-3 * (1 + abs(ref))


def test_h_norm_helper_matches_trace():
    rng = np.random.default_rng(12)
    prob = _tiny(rng, n=15, p=4)
    cfg = SolverConfig(max_iter=2, eps1=0, eps2=0, adaptive_mu=False)
    one = solve(prob, SolverConfig(max_iter=1, eps1=0, eps2=0, adaptive_mu=False)).final_state
    rep = solve(prob, cfg)
    assert h_norm_step(prob, one, rep.final_state, rep.eta) == pytest.approx(
        rep.h_step_trace[-1], rel=1e-9)


@settings(max_examples=15)
@given(st.integers(0, 10_000))
def test_h_norm_monotone_when_frozen(seed):
    rng = np.random.default_rng(seed)
    prob = _tiny(rng, n=25, p=6, tau=0.5, l1=0.05, l2=0.05)
    cfg = SolverConfig(eta_factor=1.05, adaptive_mu=False, max_iter=300, eps1=0, eps2=0,
                       power_tol=1e-10, power_max_iter=5000)
    h = np.array(solve(prob, cfg).h_step_trace)
    assert np.all(np.diff(h) <= 1e-10 * max(1.0, h[0]))


@pytest.mark.xfail(strict=True, reason="LADMM is not a descent method on the primal objective")
def test_objective_nonincreasing_once_feasible():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(40, 8))
    prob = build_unified_regression(Dataset(X, X[:, 1] + rng.normal(size=40)), 0.5, 0.05, 0.05)
    rep = solve(prob, SolverConfig(adaptive_mu=False, eps1=1e-7, eps2=1e-7, max_iter=3000))
    obj, dual = np.array(rep.objective_trace), np.array(rep.dual_trace)
    feasible = (dual[1:] < 1e-4) & (dual[:-1] < 1e-4)
    assert np.all(np.diff(obj)[feasible] <= 1e-8)
