"""Command-line interface: ``qfuse {solve,cv,gen,bench,flsa}``.

Exit status is 0 on success, 1 on bad input data or solver failure, 2 on
usage errors and 3 when ``solve``/``flsa`` stop at the iteration cap
without ``--allow-maxiter``.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .bench import EXPERIMENTS, run_experiment
from .datagen import (NoiseSpec, default_pulse_signal, gen_blocky_regression,
                      gen_highdim_classes, gen_pulse, gen_two_gaussians)
from .io import (DataFormatError, emit_report, fmt_float, load_dataset, load_signal,
                 report_to_dict, write_coefficients_csv, write_json, write_rows_csv)
from .model import Loss, Task, build_flsa, build_unified_classification, build_unified_regression
from .solver import SolverConfig, SolverDivergenceError, Termination, solve
from .tuning import Grid, cross_validate

__all__ = ["RunManifest", "build_parser", "parse_args", "main"]

EXIT_DATA = 1
EXIT_USAGE = 2
EXIT_MAXITER = 3


@dataclass
class RunManifest:
    command: str
    inputs: list = field(default_factory=list)
    output: str | None = None
    solver: SolverConfig = field(default_factory=SolverConfig)
    grid: Grid | None = None
    seed: int = 42
    options: dict = field(default_factory=dict)


def _tau(text):
    v = float(text)
    if not 0.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"tau must lie in [0, 1], got {v}")
    return v


def _nonneg(text):
    v = float(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"must be non-negative, got {v}")
    return v


def _pos(text):
    v = float(text)
    if not v > 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _pos_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be a positive integer, got {v}")
    return v


def _eta(text):
    v = float(text)
    if not v > 0.75:
        raise argparse.ArgumentTypeError(f"eta factor must exceed 0.75, got {v}")
    return v


def _float_list(text):
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None
    if not vals or min(vals) <= 0:
        raise argparse.ArgumentTypeError("values must be positive")
    return vals


def _add_solver_flags(p):
    g = p.add_argument_group("solver")
    g.add_argument("--mu", type=_pos, default=0.1, help="initial penalty weight (default 0.1)")
    g.add_argument("--eps1", type=_nonneg, default=1e-4, help="absolute tolerance")
    g.add_argument("--eps2", type=_nonneg, default=1e-4, help="relative tolerance")
    g.add_argument("--max-iter", type=_pos_int, default=10000)
    g.add_argument("--eta-factor", type=_eta, default=0.8)
    g.add_argument("--no-adaptive-mu", dest="adaptive_mu", action="store_false",
                   help="keep mu fixed")
    g.add_argument("--trace-every", type=int, default=1, help="trace stride, 0 disables")


def _add_problem_flags(p, task=True):
    if task:
        p.add_argument("--task", choices=[t.value for t in Task], default="regression")
    p.add_argument("--tau", type=_tau, default=0.5)
    p.add_argument("--lambda1", type=_nonneg, default=0.01)
    p.add_argument("--lambda2", type=_nonneg, default=0.01)
    p.add_argument("--loss", choices=[lo.value for lo in Loss], default="quantile")


def _add_input_flags(p):
    p.add_argument("--input", required=True, help="dataset path")
    p.add_argument("--format", choices=["csv", "libsvm"], default="csv")
    p.add_argument("--n-features", type=_pos_int, default=None,
                   help="LIBSVM width (default: largest index)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="qfuse", description="Quantile fused-Lasso regression and classification.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("--seed", type=int, default=42)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    seed_parent = argparse.ArgumentParser(add_help=False)
    # accepted after the subcommand too; only overrides when given
    seed_parent.add_argument("--seed", type=int, default=argparse.SUPPRESS)

    s = sub.add_parser("solve", help="fit one problem", parents=[seed_parent])
    _add_input_flags(s)
    _add_problem_flags(s)
    _add_solver_flags(s)
    s.add_argument("--output", help="JSON report path (default: stdout)")
    s.add_argument("--coef-csv", help="write coefficients as index,value")
    s.add_argument("--trace-csv", help="write per-iteration traces")
    s.add_argument("--allow-maxiter", action="store_true",
                   help="exit 0 even if the iteration cap is hit")

    c = sub.add_parser("cv", help="cross-validate (mu, lambda1, lambda2)", parents=[seed_parent])
    _add_input_flags(c)
    c.add_argument("--task", choices=[t.value for t in Task], default="regression")
    c.add_argument("--tau", type=_tau, default=0.5)
    c.add_argument("--loss", choices=[lo.value for lo in Loss], default="quantile")
    c.add_argument("--mu-values", type=_float_list, default=[0.01, 0.1, 1.0])
    c.add_argument("--lambda-values", type=_float_list, default=None,
                   help="comma-separated (default 0.01..1 step 0.01)")
    c.add_argument("--lambda2-values", type=_float_list, default=None)
    c.add_argument("--folds", type=int, default=5)
    _add_solver_flags(c)
    c.add_argument("--output", help="JSON path (default: stdout)")
    c.add_argument("--table-csv", help="write the full score table")

    g = sub.add_parser("gen", help="generate a synthetic dataset", parents=[seed_parent])
    g.add_argument("--example", required=True,
                   choices=["two-gaussians", "highdim", "blocky", "pulse"])
    g.add_argument("--n", type=_pos_int, default=None)
    g.add_argument("--p", type=_pos_int, default=None)
    g.add_argument("--alpha", type=float, default=0.0, help="noise-point ratio")
    g.add_argument("--rho", type=float, default=0.5)
    g.add_argument("--groups", type=_pos_int, default=80)
    g.add_argument("--active", type=int, default=10)
    g.add_argument("--noise", choices=["normal", "t", "cauchy", "mixed"], default="normal")
    g.add_argument("--output", required=True, help="CSV path")
    g.add_argument("--truth", help="write the true coefficients/signal here")

    b = sub.add_parser("bench", help="run a replicated experiment", parents=[seed_parent])
    b.add_argument("--experiment", required=True, choices=sorted(EXPERIMENTS))
    b.add_argument("--reps", type=_pos_int, default=1)
    b.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="override an experiment parameter (repeatable)")
    b.add_argument("--timing", action="store_true", help="record wall times")
    b.add_argument("--output", help="JSON path (default: stdout)")
    b.add_argument("--csv", help="also write the table as CSV")

    f = sub.add_parser("flsa", help="denoise a single signal column", parents=[seed_parent])
    f.add_argument("--input", required=True, help="one-column signal file")
    _add_problem_flags(f, task=False)
    _add_solver_flags(f)
    f.add_argument("--output", help="JSON report path (default: stdout)")
    f.add_argument("--fitted-csv", help="write the fitted signal as index,value")
    f.add_argument("--allow-maxiter", action="store_true")
    return parser


def _solver_config(a):
    return SolverConfig(eta_factor=a.eta_factor, mu_init=a.mu, adaptive_mu=a.adaptive_mu,
                        eps1=a.eps1, eps2=a.eps2, max_iter=a.max_iter,
                        trace_every=max(0, a.trace_every))


def _parse_value(text):
    for conv in (int, float):
        try:
            return conv(text)
        except ValueError:
            pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    if "," in text:
        return tuple(_parse_value(t) for t in text.split(","))
    return text


def parse_args(argv):
    """Parse ``argv`` into a :class:`RunManifest`; usage errors raise ``SystemExit(2)``."""
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)
    a = parser.parse_args(argv)
    if a.command is None:
        parser.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)
    m = RunManifest(a.command, seed=a.seed, output=getattr(a, "output", None))
    if hasattr(a, "trace_every") and a.trace_every < 0:
        parser.error("--trace-every must be non-negative")
    if hasattr(a, "mu"):
        m.solver = _solver_config(a)
    if hasattr(a, "input"):
        m.inputs = [a.input]
        if not os.path.isfile(a.input):
            parser.error(f"input file not found: {a.input}")
    for attr in ("output", "coef_csv", "trace_csv", "table_csv", "csv", "truth", "fitted_csv"):
        path = getattr(a, attr, None)
        if path:
            parent = os.path.dirname(os.path.abspath(path))
            if not os.path.isdir(parent):
                parser.error(f"output directory does not exist: {parent}")
    if getattr(a, "task", None) == "classification" and a.loss not in ("quantile", "hinge"):
        parser.error(f"--loss {a.loss} cannot be used with --task classification")
    if a.command == "cv":
        if a.folds < 2:
            parser.error("--folds must be at least 2")
        lam = a.lambda_values or Grid().lambda_values
        m.grid = Grid(tuple(a.mu_values), tuple(lam), a.folds,
                      tuple(a.lambda2_values) if a.lambda2_values else None)
    if a.command == "gen" and a.example in ("two-gaussians", "highdim") and not 0 <= a.alpha < 1:
        parser.error("--alpha must lie in [0, 1)")
    if a.command == "bench":
        params = {}
        for item in a.param:
            key, sep, val = item.partition("=")
            if not sep:
                parser.error(f"--param expects KEY=VALUE, got {item!r}")
            params[key.strip()] = _parse_value(val.strip())
        a.params = params
    m.options = vars(a)
    return m


def _emit_json(obj, path):
    if path:
        write_json(obj, path)
    else:
        from .io import dumps_json
        sys.stdout.write(dumps_json(obj))


def _run_solve(m):
    o = m.options
    d = load_dataset(o["input"], o["format"], o["task"], o["n_features"])
    if d.p < 2:
        raise ValueError("the fused penalty needs at least two features")
    build = build_unified_classification if d.task is Task.CLASSIFICATION else build_unified_regression
    prob = build(d, o["tau"], o["lambda1"], o["lambda2"], Loss(o["loss"]))
    rep = solve(prob, m.solver)
    _emit_json(report_to_dict(rep), m.output)
    if o.get("coef_csv"):
        write_coefficients_csv(rep.coefficients, o["coef_csv"])
    if o.get("trace_csv"):
        emit_report(rep, o["trace_csv"], "csv")
    return rep


def _run_flsa(m):
    o = m.options
    y = load_signal(o["input"])
    rep = solve(build_flsa(y, o["tau"], o["lambda1"], o["lambda2"], Loss(o["loss"])), m.solver)
    _emit_json(report_to_dict(rep), m.output)
    if o.get("fitted_csv"):
        with open(o["fitted_csv"], "w", encoding="utf-8", newline="\n") as fh:
            fh.write("index,value\n")
            for i, v in enumerate(rep.coefficients.beta, start=1):
                fh.write(f"{i},{fmt_float(v)}\n")
    return rep


def _run_cv(m):
    o = m.options
    d = load_dataset(o["input"], o["format"], o["task"], o["n_features"])
    res = cross_validate(d, m.grid, o["tau"], m.solver, Loss(o["loss"]), seed=m.seed)
    _emit_json({"best": {"mu": res.mu, "lambda1": res.lambda1, "lambda2": res.lambda2,
                         "score": res.score}, "folds": m.grid.folds, "seed": m.seed,
                "table": res.table}, m.output)
    if o.get("table_csv"):
        write_rows_csv(res.table, o["table_csv"])


def _write_dataset_csv(X, y, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("y," + ",".join(f"x{j}" for j in range(1, X.shape[1] + 1)) + "\n")
        for yi, row in zip(y, X):
            fh.write(fmt_float(yi) + "," + ",".join(fmt_float(v) for v in row) + "\n")


def _write_vector_csv(v, path, header="value"):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(header + "\n")
        for x in v:
            fh.write(fmt_float(x) + "\n")


def _run_gen(m):
    o = m.options
    ex, seed = o["example"], m.seed
    truth = None
    if ex == "two-gaussians":
        d = gen_two_gaussians(o["n"] or 500, o["alpha"], seed)
    elif ex == "highdim":
        d = gen_highdim_classes(o["n"] or 100, o["p"] or 2000, o["rho"], o["alpha"], seed)
    elif ex == "blocky":
        d, truth = gen_blocky_regression(o["n"] or 720, o["p"] or 2560, o["groups"], o["active"],
                                         NoiseSpec.parse(o["noise"]), seed)
    else:
        truth = default_pulse_signal(o["n"] or 1000)
        y = gen_pulse(truth, NoiseSpec.parse(o["noise"]), seed)
        _write_vector_csv(y, m.output, "y")
        if o.get("truth"):
            _write_vector_csv(truth, o["truth"])
        return
    _write_dataset_csv(d.X, d.y, m.output)
    if o.get("truth") and truth is not None:
        _write_vector_csv(truth, o["truth"])


def _run_bench(m):
    o = m.options
    table = run_experiment(o["experiment"], reps=o["reps"], seed=m.seed, timing=o["timing"],
                           **o["params"])
    _emit_json(table.to_dict(), m.output)
    if o.get("csv"):
        table.to_csv(o["csv"])


def main(argv=None):
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        m = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    try:
        if m.command in ("solve", "flsa"):
            rep = (_run_solve if m.command == "solve" else _run_flsa)(m)
            if rep.termination is Termination.MAX_ITER and not m.options["allow_maxiter"]:
                print(f"qfuse: iteration cap ({m.solver.max_iter}) reached without convergence; "
                      "pass --allow-maxiter to accept", file=sys.stderr)
                return EXIT_MAXITER
        elif m.command == "cv":
            _run_cv(m)
        elif m.command == "gen":
            _run_gen(m)
        else:
            _run_bench(m)
    except (DataFormatError, ValueError, SolverDivergenceError, OSError) as exc:
        print(f"qfuse: {exc}", file=sys.stderr)
        return EXIT_DATA
    return 0


if __name__ == "__main__":
    sys.exit(main())
