"""Command line entry point.

Subcommands: solve, oracle, audit, bounds, simulate, curve. Human-authored
configs are TOML (JSON also accepted); machine results are JSON. Numeric
output is printed with 12 significant digits so golden files are
reproducible without full float round-trip noise. Exit codes: 0 success,
1 usage error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import csv as _csv
import json
import sys
from pathlib import Path

from . import __version__
from .dictionary import CsvLayout, DiscreteMeasure, load_dataset, \
    population_moments, sample_scenario
from .diagnostics import TuningConfig, bound_table, check_boundedness, \
    check_coherence, correlations, in_coherent_ball, tuning_sequence
from .errors import LassoSelectError, ParseError
from .harness import aggregate_csv, consistency_curve, persist_results, \
    run_experiment
from .oracle import check_min_signal, target_set
from .solver import SolverOptions, compute_penalty, solve_weighted_lasso
from .specs import bound_params_from_spec, experiment_from_spec, load_config, \
    scenario_from_spec, target_from_spec, tuning_from_spec

__all__ = ["dispatch", "main", "to_json_text"]

SIG_DIGITS = 12


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _round_floats(obj):
    if isinstance(obj, float):
        return float(format(obj, f".{SIG_DIGITS}g"))
    if isinstance(obj, dict):
        return {k: _round_floats(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_round_floats(v) for v in obj]
    return obj


def to_json_text(obj) -> str:
    """Serialize a result document with 12-significant-digit floats."""
    return json.dumps(_round_floats(obj), indent=2, allow_nan=True) + "\n"


def _emit(doc, out_path, stdout):
    text = to_json_text(doc)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")
        print(f"wrote {out_path}", file=stdout)
    else:
        stdout.write(text)


def _fmt(x) -> str:
    if isinstance(x, float):
        return format(x, f".{SIG_DIGITS}g")
    return str(x)


def _require_files(*paths):
    for p in paths:
        if p is not None and not Path(p).is_file():
            raise _UsageError(f"file not found: {p}")


def _split_names(raw):
    return tuple(s.strip() for s in raw.split(",") if s.strip()) if raw else None


def _csv_header(path) -> list:
    with open(path, newline="", encoding="utf-8") as fh:
        row = next(_csv.reader(fh), None)
    if not row:
        raise ParseError(f"{path}: empty file")
    return [h.strip() for h in row]


def _solver_options(args) -> SolverOptions:
    base = SolverOptions()
    return SolverOptions(
        max_sweeps=args.max_sweeps if args.max_sweeps is not None else base.max_sweeps,
        tol=args.tol if args.tol is not None else base.tol,
        zero_tol=args.zero_tol if args.zero_tol is not None else base.zero_tol,
        kkt_tol=args.kkt_tol if args.kkt_tol is not None else base.kkt_tol,
        method=args.method or base.method,
    )


def _cmd_solve(args, stdout):
    _require_files(args.data)
    header = _csv_header(args.data)
    response = args.response or header[0]
    layout = CsvLayout(response=response,
                       covariates=_split_names(args.covariates),
                       dictionary_columns=_split_names(args.dict_cols))
    sample = load_dataset(args.data, layout)

    if (args.r is None) == (args.tuning_A is None):
        raise _UsageError("solve: give exactly one of --r or --tuning-A")
    if args.r is not None:
        r = args.r
    else:
        r = tuning_sequence(TuningConfig(A=args.tuning_A, regime=args.tuning_regime,
                                         M=sample.F.shape[1], n=sample.n,
                                         gamma_cap=args.gamma_cap))
    pen = compute_penalty(sample.col_norms, r)
    sol = solve_weighted_lasso(sample.F, sample.Y, pen, _solver_options(args))
    doc = {"r": r, "n": sample.n, "M": sample.F.shape[1],
           "full_rank_G": sample.full_rank_G, **sol.describe()}
    _emit(doc, args.out, stdout)
    print(f"support {sorted(sol.support)}  objective {_fmt(sol.objective)}  "
          f"kkt {'pass' if sol.kkt.passed else 'FAIL'}", file=stdout)
    return 0


def _moments_from_config(doc):
    if "moments" in doc:
        import numpy as np
        m = doc["moments"]
        return (np.asarray(m["gram"], dtype=float),
                np.asarray(m["cross"], dtype=float), float(m["f_sq"])), None
    scenario = scenario_from_spec(doc["scenario"])
    m = population_moments(scenario)
    return (m.gram, m.cross, m.f_sq), scenario


def _cmd_oracle(args, stdout):
    _require_files(args.config)
    doc = load_config(args.config)
    (gram, cross, f_sq), _ = _moments_from_config(doc)
    tgt = doc.get("target", {})
    kwargs = {"max_exhaustive": int(tgt["max_exhaustive"])} \
        if "max_exhaustive" in tgt else {}
    target = target_set(gram, cross, f_sq, C_f=float(tgt["C_f"]),
                        r=float(tgt["r"]), **kwargs)
    _emit(target.describe(), args.out, stdout)
    print(f"k_star {target.k_star}  I_star {sorted(target.I_star)}  "
          f"approx_error {_fmt(target.approx_error)}", file=stdout)
    return 0


def _cmd_audit(args, stdout):
    _require_files(args.config)
    doc = load_config(args.config)
    scenario = scenario_from_spec(doc["scenario"])
    target = target_from_spec(doc["target"], scenario)
    audit = doc.get("audit", {})
    B = float(audit.get("B", 1.0))
    C = float(audit.get("C", 1.0 / 45.0))

    moments = population_moments(scenario)
    rho = correlations(moments.gram)
    if target.k_star > 0:
        coherence = check_coherence(rho, target.I_star, C=C).describe()
    else:
        coherence = {"I_star": [], "max_on_target": 0.0, "threshold": None,
                     "C": C, "holds": True}
    signal = check_min_signal(target, B)
    in_ball = in_coherent_ball(target.lambda_star, moments.gram, moments.cross,
                               moments.f_sq, target.radius, C=C)

    bounded = None
    if isinstance(scenario.measure, DiscreteMeasure):
        bounded = check_boundedness(scenario, target).describe()
    elif int(audit.get("sample_n", 0)) > 0:
        sample = sample_scenario(scenario, int(audit["sample_n"]),
                                 int(audit.get("sample_seed", 0)))
        bounded = check_boundedness(scenario, target, sample=sample).describe()

    report = {
        "target": target.describe(),
        "coherence": coherence,
        "min_signal": {"B": B, "holds": signal.holds, "margin": signal.margin},
        "lambda_star_in_coherent_ball": in_ball,
        "boundedness": bounded,
    }
    _emit(report, args.out, stdout)
    for name, ok in (("coherence", coherence["holds"]),
                     ("min_signal", signal.holds),
                     ("coherent_ball", in_ball),
                     ("boundedness", None if bounded is None
                      else bounded["passed"])):
        state = "skipped" if ok is None else ("pass" if ok else "FAIL")
        print(f"{name}: {state}", file=stdout)
    return 0


BOUND_COLUMNS = ("n", "r", "coordinate_tail", "restricted_tail",
                 "noise_corr", "col_norm", "inner_product", "approx_gap")


def _cmd_bounds(args, stdout):
    _require_files(args.config)
    doc = load_config(args.config)
    params = bound_params_from_spec(doc.get("params", {}))
    grid = doc["grid"]
    M = int(grid["M"])
    tuning = tuning_from_spec(doc["tuning"], M=M)
    rows = bound_table(params, tuning, [int(n) for n in grid["n"]], M=M,
                       k_star=int(grid["k_star"]))
    print(",".join(BOUND_COLUMNS), file=stdout)
    for row in rows:
        d = row.describe()
        print(",".join(_fmt(d[c]) for c in BOUND_COLUMNS), file=stdout)
    if args.out:
        _emit({"params": params.describe(), "rows": [r.describe() for r in rows]},
              args.out, stdout)
    return 0


def _cmd_simulate(args, stdout):
    _require_files(args.config)
    cfg = experiment_from_spec(load_config(args.config))
    result = run_experiment(cfg)
    json_path, csv_path = persist_results(result, args.out)
    for a in result.aggregates:
        print(f"n {a.n}  r {_fmt(a.r)}  p_exact {_fmt(a.p_exact)}  "
              f"ci [{_fmt(a.ci_exact[0])}, {_fmt(a.ci_exact[1])}]  "
              f"failed {a.failed}", file=stdout)
    print(f"wrote {json_path} and {csv_path}", file=stdout)
    return 0


def _cmd_curve(args, stdout):
    _require_files(args.config)
    cfg = experiment_from_spec(load_config(args.config))
    text = aggregate_csv(consistency_curve(cfg))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}", file=stdout)
    else:
        stdout.write(text)
    return 0


def _build_parser() -> _Parser:
    parser = _Parser(prog="lasso-select",
                     description="Weighted l1 variable selection toolkit")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("solve", help="fit a dataset and report the support")
    p.add_argument("--data", required=True, help="CSV file with a header row")
    p.add_argument("--response", help="response column (default: first)")
    p.add_argument("--covariates", help="comma-separated raw covariate columns")
    p.add_argument("--dict-cols", help="comma-separated precomputed dictionary columns")
    p.add_argument("--r", type=float, help="penalty scale")
    p.add_argument("--tuning-A", type=float, help="derive r from the built-in schedule")
    p.add_argument("--tuning-regime", choices=("sqrt", "quarter"), default="sqrt")
    p.add_argument("--gamma-cap", type=float)
    p.add_argument("--max-sweeps", type=int)
    p.add_argument("--tol", type=float)
    p.add_argument("--zero-tol", type=float)
    p.add_argument("--kkt-tol", type=float)
    p.add_argument("--method", choices=("rescaled", "direct"))
    p.add_argument("--out", help="write the solution JSON here")

    p = sub.add_parser("oracle", help="compute the sparsest-approximation target")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("audit", help="audit assumptions for a scenario and target")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("bounds", help="evaluate the tail bounds on a grid")
    p.add_argument("--config", required=True)
    p.add_argument("--out")

    p = sub.add_parser("simulate", help="run a Monte Carlo selection experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output base path (.json/.csv)")

    p = sub.add_parser("curve", help="write the consistency curve CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out")
    return parser


_COMMANDS = {
    "solve": _cmd_solve,
    "oracle": _cmd_oracle,
    "audit": _cmd_audit,
    "bounds": _cmd_bounds,
    "simulate": _cmd_simulate,
    "curve": _cmd_curve,
}


def dispatch(argv, stdout=None, stderr=None) -> int:
    stdout = stdout or sys.stdout
    stderr = stderr or sys.stderr
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise _UsageError(parser.format_usage())
        return _COMMANDS[args.command](args, stdout)
    except _UsageError as exc:
        print(str(exc), file=stderr)
        return 1
    except (LassoSelectError, OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
