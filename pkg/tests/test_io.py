import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qfuse.io import (DataFormatError, dumps_json, emit_report, fmt_float, load_dataset,
                      load_signal, read_coefficients_csv, write_coefficients_csv)
from qfuse.model import Coefficients, Dataset, Task, build_unified_regression
from qfuse.solver import SolverConfig, solve


def _write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


def test_csv_example(tmp_path):
    d = load_dataset(_write(tmp_path, "d.csv", "y,x1\n1,2\n-1,3\n"), "csv")
    assert (d.n, d.p) == (2, 1)
    np.testing.assert_array_equal(d.X[:, 0], [2.0, 3.0])
    np.testing.assert_array_equal(d.y, [1.0, -1.0])


def test_libsvm_example(tmp_path):
    d = load_dataset(_write(tmp_path, "d.svm", "+1 3:0.5\n-1 1:2\n"), "libsvm",
                     Task.CLASSIFICATION, n_features=4)
    np.testing.assert_array_equal(d.X[0], [0, 0, 0.5, 0])
    np.testing.assert_array_equal(d.y, [1.0, -1.0])


def test_ragged_csv_reports_line(tmp_path):
    with pytest.raises(DataFormatError) as exc:
        load_dataset(_write(tmp_path, "d.csv", "y,x1,x2\n1,2,3\n1,2\n4,5,6\n"))
    assert exc.value.line == 3


@pytest.mark.parametrize("text,fmt,line", [
    ("a,x1\n1,2\n", "csv", 1),
    ("y,x1\n1,abc\n", "csv", 2),
    ("y,x1\n", "csv", 2),
    ("1 0:2\n", "libsvm", 1),
    ("1 2:1\n1 x\n", "libsvm", 2),
])
def test_malformed(tmp_path, text, fmt, line):
    with pytest.raises(DataFormatError) as exc:
        load_dataset(_write(tmp_path, "d", text), fmt)
    assert exc.value.line == line


def test_classification_labels_checked(tmp_path):
    with pytest.raises(DataFormatError, match="line|:3:"):
        load_dataset(_write(tmp_path, "d.csv", "y,x1,x2\n1,0,0\n2,1,1\n"), "csv",
                     Task.CLASSIFICATION)


def test_libsvm_width_too_small(tmp_path):
    with pytest.raises(DataFormatError):
        load_dataset(_write(tmp_path, "d.svm", "1 5:1\n"), "libsvm", n_features=3)


def test_signal_with_and_without_header(tmp_path):
    np.testing.assert_array_equal(load_signal(_write(tmp_path, "a", "y\n1\n2.5\n")), [1, 2.5])
    np.testing.assert_array_equal(load_signal(_write(tmp_path, "b", "1\n2\n3\n")), [1, 2, 3])
    with pytest.raises(DataFormatError):
        load_signal(_write(tmp_path, "c", "y\n1\n"))


def test_fmt_float():
    assert fmt_float(0.1) == "0.10000000000000001"
    assert fmt_float(float("nan")) == "null"
    assert float(fmt_float(1 / 3)) == 1 / 3


def test_json_encoder():
    text = dumps_json({"a": [0.1, 2, None, True, float("inf")], "b": np.float64(0.5)})
    doc = json.loads(text)
    assert doc == {"a": [0.1, 2, None, True, None], "b": 0.5}
    assert "0.10000000000000001" in text


@settings(max_examples=50)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=6),
       st.floats(allow_nan=False, allow_infinity=False))
def test_coefficient_csv_round_trip(tmp_path_factory, beta, beta0):
    path = tmp_path_factory.mktemp("rt") / "c.csv"
    write_coefficients_csv(Coefficients(beta0, np.array(beta)), path)
    back = read_coefficients_csv(path)
    assert back.beta0 == beta0
    assert list(back.beta) == beta


def _small_report(**cfg):
    rng = np.random.default_rng(0)
    X = rng.normal(size=(20, 3))
    prob = build_unified_regression(Dataset(X, X[:, 0]), 0.5, 0.01, 0.01)
    return solve(prob, SolverConfig(**cfg))


def test_report_json_schema(tmp_path):
    path = tmp_path / "r.json"
    emit_report(_small_report(), path, "json")
    doc = json.loads(path.read_text())
    assert set(doc) == {"coefficients", "iterations", "termination", "traces"}
    assert set(doc["traces"]) == {"objective", "primal", "dual", "h_step"}
    assert doc["termination"] == "Converged"
    assert len(doc["coefficients"]["beta"]) == 3


def test_trace_csv_stride(tmp_path):
    path = tmp_path / "t.csv"
    emit_report(_small_report(max_iter=100, eps1=0, eps2=0, trace_every=10), path, "csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "iteration,objective,primal,dual,h_step,mu"
    assert len(lines) == 11 and lines[1].startswith("10,") and lines[-1].startswith("100,")


def test_emit_unknown_format(tmp_path):
    with pytest.raises(ValueError):
        emit_report(_small_report(), tmp_path / "x", "xml")
