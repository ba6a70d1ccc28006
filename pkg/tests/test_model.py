import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from qfuse.model import (Coefficients, Dataset, DesignKind, Loss, Task, UnifiedProblem,
                         build_flsa, build_unified_classification, build_unified_regression,
                         check_loss, objective, pinball_loss, predict)


def test_regression_transform():
    d = Dataset([[2.0], [3.0]], [5.0, 7.0])
    prob = build_unified_regression(d, 0.5)
    np.testing.assert_array_equal(prob.Xbar, [[1, 2], [1, 3]])
    np.testing.assert_array_equal(prob.ybar, [5, 7])
    assert build_unified_regression(d, 0.0).tau == 0.0


def test_regression_validation():
    d = Dataset([[2.0], [3.0]], [5.0, 7.0])
    build_unified_regression(d, 0.5, 1.1, 0.0)
    with pytest.raises(ValueError):
        build_unified_regression(d, 0.5, -0.1, 0.0)
    with pytest.raises(ValueError):
        build_unified_regression(d, 1.5)
    with pytest.raises(ValueError):
        build_unified_classification(d)


def test_classification_transform():
    d = Dataset([[2.0], [3.0]], [1.0, -1.0], Task.CLASSIFICATION)
    prob = build_unified_classification(d, 1.0, 1.0, 1.0)
    np.testing.assert_array_equal(prob.Xbar, [[1, 2], [-1, -3]])
    np.testing.assert_array_equal(prob.ybar, [1, 1])
    assert (prob.tau, prob.lambda1, prob.lambda2) == (0.5, 0.5, 0.5)
    hinge = build_unified_classification(d, 0.0, 0.3, 0.2)
    assert (hinge.tau, hinge.lambda1, hinge.lambda2) == (1.0, 0.3, 0.2)


def test_bad_labels():
    with pytest.raises(ValueError, match="-1 or \\+1"):
        Dataset([[1.0], [2.0]], [1.0, 0.0], Task.CLASSIFICATION)


def test_dataset_shape_errors():
    with pytest.raises(ValueError):
        Dataset([[1.0, 2.0]], [1.0, 2.0])
    with pytest.raises(ValueError):
        Dataset([[np.nan, 1.0]], [1.0])


def test_objective_examples():
    prob = UnifiedProblem(ybar=[2.0], X=[[1.0]], gamma=[1.0], tau=0.5)
    assert objective(prob, Coefficients(1.0, [1.0])) == 0.0
    prob = UnifiedProblem(ybar=[0.0], X=[[0.0]], gamma=[1.0], tau=0.3)
    assert objective(prob, Coefficients(1.0, [0.0])) == pytest.approx(0.7)
    rng = np.random.default_rng(0)
    y = rng.normal(size=5)
    prob = build_unified_regression(Dataset(rng.normal(size=(5, 3)), y), 0.25, 1.0, 1.0)
    assert objective(prob, np.zeros(4)) == pytest.approx(np.mean(check_loss(y, 0.25)))


def test_objective_dimension_mismatch():
    prob = UnifiedProblem(ybar=[2.0], X=[[1.0, 1.0]], gamma=[1.0])
    with pytest.raises(ValueError):
        objective(prob, Coefficients(0.0, [1.0]))


def test_identity_problem():
    prob = build_flsa([1.0, 2.0, 3.0])
    assert prob.design_kind is DesignKind.IDENTITY and not prob.has_intercept
    assert prob.n == prob.p == 3
    with pytest.raises(ValueError):
        objective(prob, Coefficients(1.0, [0, 0, 0]))
    with pytest.raises(ValueError):
        UnifiedProblem(ybar=[1.0, 2.0], X=np.eye(2), gamma=None, design_kind="identity")


def test_predict():
    c = Coefficients(1.0, [2.0, 3.0])
    assert predict([[1.0, 1.0]], c)[0] == 6.0
    assert predict([[1.0, 1.0]], c, Task.CLASSIFICATION)[0] == 1.0
    assert predict([[1.0, 1.0]], Coefficients(0.0, [0.0, 0.0]), Task.CLASSIFICATION)[0] == 1.0
    with pytest.raises(ValueError):
        predict([[1.0]], c)


def test_immutable():
    prob = build_flsa([1.0, 2.0])
    with pytest.raises(Exception):
        prob.tau = 0.1
    with pytest.raises(ValueError):
        prob.ybar[0] = 3.0


def test_coefficients_finite():
    with pytest.raises(ValueError):
        Coefficients(np.inf, [0.0])


cls_data = st.integers(2, 8).flatmap(lambda n: st.tuples(
    hnp.arrays(float, (n, 3), elements=st.floats(-5, 5)),
    hnp.arrays(float, n, elements=st.sampled_from([-1.0, 1.0])),
    hnp.arrays(float, 4, elements=st.floats(-3, 3)),
    st.floats(0, 1), st.floats(0, 2), st.floats(0, 2)))


@given(cls_data)
def test_classification_round_trip(args):
    X, y, c, tau, l1, l2 = args
    prob = build_unified_classification(Dataset(X, y, Task.CLASSIFICATION), tau, l1, l2)
    u = 1.0 - y * (c[0] + X @ c[1:])
    direct = (np.mean(pinball_loss(u, tau)) + l1 * np.abs(c[1:]).sum()
              + l2 * np.abs(np.diff(c[1:])).sum())
    assert objective(prob, c) * (1 + tau) == pytest.approx(direct, rel=1e-12, abs=1e-12)


@given(cls_data, hnp.arrays(float, 4, elements=st.floats(-3, 3)),
       st.sampled_from(list(Loss)))
def test_objective_convex(args, c2, loss):
    X, y, c1, tau, l1, l2 = args
    prob = build_unified_regression(Dataset(X, y), tau, l1, l2, loss)
    mid = objective(prob, (c1 + c2) / 2)
    assert mid <= (objective(prob, c1) + objective(prob, c2)) / 2 + 1e-10
