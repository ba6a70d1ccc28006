"""Dataset loaders and deterministic report writers."""

from __future__ import annotations

import csv
import json
import math

import numpy as np

from .model import Dataset, Task

__all__ = [
    "DataFormatError",
    "load_dataset",
    "load_signal",
    "dumps_json",
    "write_json",
    "write_coefficients_csv",
    "read_coefficients_csv",
    "write_trace_csv",
    "write_rows_csv",
    "report_to_dict",
    "emit_report",
    "fmt_float",
]


class DataFormatError(ValueError):
    """Malformed input file; ``line`` is 1-based."""

    def __init__(self, path, line, msg):
        self.path = str(path)
        self.line = line
        super().__init__(f"{path}:{line}: {msg}")


def fmt_float(x):
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if not math.isfinite(x):
        return "null"
    return format(x, ".17g")


def _encode(obj, indent, level):
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return fmt_float(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, level + 1)}"
                 for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(isinstance(v, (int, float, np.integer, np.floating)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent, level + 1) for v in obj) + "\n" + end + "]"
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return json.dumps(obj.value)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps_json(obj, indent=2):
    """JSON text with every float at 17 significant digits and non-finite floats as null.

    Key order is preserved, so equal inputs give byte-identical output.
    """
    return _encode(obj, indent, 0) + "\n"


def write_json(obj, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_json(obj))


def _parse_float(tok, path, line):
    try:
        return float(tok)
    except ValueError:
        raise DataFormatError(path, line, f"not a number: {tok!r}") from None


def _check_labels(y, task, path, lines):
    if task is Task.CLASSIFICATION:
        bad = np.flatnonzero(np.abs(y) != 1.0)
        if bad.size:
            raise DataFormatError(path, lines[bad[0]], f"label {y[bad[0]]:g} is not -1 or +1")


def _load_csv(path, task):
    rows, lines = [], []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFormatError(path, 1, "empty file") from None
        if not header or header[0].strip() != "y":
            raise DataFormatError(path, 1, "header must start with a 'y' column")
        width = len(header)
        if width < 2:
            raise DataFormatError(path, 1, "need at least one feature column")
        for row in reader:
            ln = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != width:
                raise DataFormatError(path, ln, f"expected {width} fields, got {len(row)}")
            rows.append([_parse_float(c.strip(), path, ln) for c in row])
            lines.append(ln)
    if not rows:
        raise DataFormatError(path, 2, "no data rows")
    A = np.array(rows)
    _check_labels(A[:, 0], task, path, lines)
    return Dataset(A[:, 1:], A[:, 0], task)


def _load_libsvm(path, task, n_features=None):
    labels, entries, lines = [], [], []
    max_idx = 0
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            toks = text.split()
            labels.append(_parse_float(toks[0], path, ln))
            row = {}
            for tok in toks[1:]:
                idx_s, sep, val_s = tok.partition(":")
                if not sep:
                    raise DataFormatError(path, ln, f"expected index:value, got {tok!r}")
                try:
                    idx = int(idx_s)
                except ValueError:
                    raise DataFormatError(path, ln, f"bad feature index {idx_s!r}") from None
                if idx < 1:
                    raise DataFormatError(path, ln, f"feature indices are 1-based, got {idx}")
                row[idx] = _parse_float(val_s, path, ln)
                max_idx = max(max_idx, idx)
            entries.append(row)
            lines.append(ln)
    if not labels:
        raise DataFormatError(path, 1, "no data rows")
    p = max_idx if n_features is None else n_features
    if p < max_idx:
        raise DataFormatError(path, lines[-1], f"feature index {max_idx} exceeds width {p}")
    X = np.zeros((len(labels), p))
    for i, row in enumerate(entries):
        for idx, val in row.items():
            X[i, idx - 1] = val
    y = np.array(labels)
    _check_labels(y, task, path, lines)
    return Dataset(X, y, task)


def load_dataset(path, fmt="csv", task=Task.REGRESSION, n_features=None):
    """Read a dataset.

    CSV files have a header whose first column is ``y``; LIBSVM files hold
    ``label idx:val ...`` lines with 1-based indices and are densified.
    ``n_features`` fixes the LIBSVM width (default: largest index seen).
    """
    task = Task(task)
    if fmt == "csv":
        return _load_csv(path, task)
    if fmt == "libsvm":
        return _load_libsvm(path, task, n_features)
    raise ValueError(f"unknown format {fmt!r}")


def load_signal(path):
    """One-column signal: a CSV with a single header line, or bare numbers."""
    vals = []
    with open(path, encoding="utf-8") as fh:
        for ln, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text:
                continue
            tok = text.split(",")[0].strip()
            if ln == 1:
                try:
                    float(tok)
                except ValueError:
                    continue
            vals.append(_parse_float(tok, path, ln))
    if len(vals) < 2:
        raise DataFormatError(path, 1, "signal needs at least two values")
    return np.array(vals)


def write_coefficients_csv(coef, path):
    """``index,value`` rows; index 0 is the intercept, 1..p the coefficients."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("index,value\n")
        fh.write(f"0,{fmt_float(coef.beta0)}\n")
        for j, b in enumerate(coef.beta, start=1):
            fh.write(f"{j},{fmt_float(b)}\n")


def read_coefficients_csv(path):
    from .model import Coefficients
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))[1:]
    vals = {int(i): float(v) for i, v in rows}
    return Coefficients(vals[0], [vals[j] for j in range(1, len(vals))])


def write_trace_csv(report, path):
    """One row per recorded iteration."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("iteration,objective,primal,dual,h_step,mu\n")
        for row in zip(report.trace_iterations, report.objective_trace, report.primal_trace,
                       report.dual_trace, report.h_step_trace, report.mu_trace):
            fh.write(str(row[0]) + "," + ",".join(fmt_float(v) for v in row[1:]) + "\n")


def write_rows_csv(rows, path):
    """List of flat dicts to CSV; columns follow the first row's key order."""
    if not rows:
        raise ValueError("no rows to write")
    cols = list(rows[0])
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(cols) + "\n")
        for r in rows:
            out = []
            for c in cols:
                v = r.get(c, "")
                if isinstance(v, (float, np.floating)):
                    out.append(fmt_float(v))
                else:
                    out.append(str(v))
            fh.write(",".join(out) + "\n")


def report_to_dict(report):
    c = report.coefficients
    return {
        "coefficients": {"beta0": c.beta0, "beta": c.beta.tolist()},
        "iterations": report.iterations,
        "termination": report.termination.value,
        "traces": {
            "objective": list(report.objective_trace),
            "primal": list(report.primal_trace),
            "dual": list(report.dual_trace),
            "h_step": list(report.h_step_trace),
        },
    }


def emit_report(report, path, fmt="json"):
    """Write a solve report (JSON) or its traces (CSV)."""
    if fmt == "json":
        write_json(report_to_dict(report), path)
    elif fmt == "csv":
        write_trace_csv(report, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
