"""Command-line front end.

Subcommands: ``gen``, ``fit``, ``plan``, ``eval``, ``bound``, ``bench``.
Reports are JSON documents on stdout; every numeric leaf is an object
``{"value": ..., "unit": ...}``. Data files for plotting are two-column text.

Exit codes: 0 success, 2 usage error, 3 budget refusal, 4 numerical failure,
5 I/O or file-format error.
"""

from __future__ import annotations

import argparse
import json
import os
import statistics
import sys
from datetime import datetime, timezone
from pathlib import Path as FsPath

from . import __version__, _backend
from .bounds import BoundInputs, cost_model, epsilon_m2ipp, epsilon_mepp
from .errors import (
    BudgetExceeded,
    DegenerateNoise,
    DimensionMismatch,
    InvalidArity,
    NoUnobserved,
    OutOfRange,
    ParseError,
    SearchFailed,
    SingularSystem,
    TransectError,
    ZeroMeanField,
)
from .fields import FieldSpec, MleSearch, fit_mle, load_field_csv, sample_field, save_field_csv
from .gp_core import GpHyperParams
from .metrics import en_metric, er_metric, mi_metric, path_sample_mean
from .planners import DP_ALGORITHMS, PlanRequest, solve
from .transect import Path, StageAction, TransectGrid

EXIT_OK, EXIT_USAGE, EXIT_BUDGET, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4, 5

ALGO_NAMES = {
    "mepp": "mepp_m",
    "m2ipp": "m2ipp_m",
    "gmepp": "gmepp",
    "gm2ipp": "gm2ipp",
    "exact-mepp": "exact_mepp",
    "exact-m2ipp": "exact_m2ipp",
}

UNITS = {
    "objective": "nats",
    "entropy_evals": "count",
    "mi_evals": "count",
    "factorizations": "count",
    "work": "dim^3",
    "wall_time": "seconds",
}


class UsageError(Exception):
    pass


def q(value, unit):
    return {"value": value, "unit": unit}


def _timestamp():
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    when = datetime.fromtimestamp(int(epoch), timezone.utc) if epoch else datetime.now(timezone.utc)
    return when.strftime("%Y-%m-%dT%H:%M:%SZ")


def provenance(seed=None):
    return {
        "tool": "transect-ipp",
        "version": __version__,
        "backend": _backend.NAME,
        "seed": seed,
        "timestamp": _timestamp(),
    }


def emit(report, stream=None):
    stream = stream or sys.stdout
    json.dump(report, stream, indent=2, sort_keys=False)
    stream.write("\n")


# --- path files -------------------------------------------------------------


def write_path_file(path: Path, dest, comments=()):
    lines = [f"# {c}" for c in comments]
    lines += [",".join(str(r) for r in a.rows) for a in path]
    FsPath(dest).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_path_file(src) -> Path:
    actions = []
    for lineno, raw in enumerate(FsPath(src).read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        try:
            rows = tuple(int(tok) for tok in line.split(","))
            actions.append(StageAction(rows))
        except (ValueError, TransectError) as exc:
            raise ParseError(f"bad path line {line!r}: {exc}", line=lineno) from None
    if not actions:
        raise ParseError("path file has no stages")
    try:
        return Path(tuple(actions))
    except ValueError as exc:
        raise ParseError(str(exc)) from None


# --- shared argument groups ------------------------------------------------


def _add_params(p, required=False):
    g = p.add_argument_group("GP hyperparameters")
    g.add_argument("--params", help="JSON parameter file written by 'fit'")
    g.add_argument("--l1", type=float, help="horizontal length-scale (m)")
    g.add_argument("--l2", type=float, help="vertical length-scale (m)")
    g.add_argument("--sig2", type=float, help="signal variance")
    g.add_argument("--noise2", type=float, help="noise variance")
    g.add_argument("--mean", type=float, help="constant prior mean")


def _add_grid(p):
    g = p.add_argument_group("grid (ignored when a field file supplies it)")
    g.add_argument("--rows", type=int)
    g.add_argument("--cols", type=int)
    g.add_argument("--spacing-h", type=float, default=1.0)
    g.add_argument("--spacing-v", type=float, default=1.0)


def _params_from_args(args):
    """Return ``(params, mean_given)``; ``None`` params when nothing was supplied."""
    if args.params:
        raw = json.loads(FsPath(args.params).read_text(encoding="utf-8"))
        data = raw.get("params", raw)
        vals = {k: (v["value"] if isinstance(v, dict) else v) for k, v in data.items()}
        params = GpHyperParams(
            vals["signal_variance"], vals["noise_variance"],
            vals["lengthscale_h"], vals["lengthscale_v"], vals.get("prior_mean", 0.0),
        )
        if args.mean is not None:
            params = params.replace(prior_mean=args.mean)
        return params, True
    flags = (args.l1, args.l2, args.sig2, args.noise2)
    if all(v is None for v in flags):
        return None, False
    if any(v is None for v in flags):
        raise UsageError("--l1, --l2, --sig2 and --noise2 must be given together")
    mean = 0.0 if args.mean is None else args.mean
    try:
        return GpHyperParams(args.sig2, args.noise2, args.l1, args.l2, mean), args.mean is not None
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _grid_from_args(args):
    if args.rows is None or args.cols is None:
        raise UsageError("--rows and --cols are required without a field file")
    try:
        return TransectGrid(args.rows, args.cols, args.spacing_h, args.spacing_v)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def params_report(p: GpHyperParams):
    return {
        "signal_variance": q(p.signal_variance, "field^2"),
        "noise_variance": q(p.noise_variance, "field^2"),
        "lengthscale_h": q(p.lengthscale_h, "m"),
        "lengthscale_v": q(p.lengthscale_v, "m"),
        "prior_mean": q(p.prior_mean, "field"),
        "eta": q(p.eta, "dimensionless"),
    }


def grid_report(g: TransectGrid):
    return {
        "rows": q(g.rows, "count"),
        "cols": q(g.cols, "count"),
        "spacing_h": q(g.spacing_h, "m"),
        "spacing_v": q(g.spacing_v, "m"),
    }


def metrics_block(path, field, params, mean_given):
    er_params = params if mean_given else params.replace(prior_mean=path_sample_mean(path, field))
    return {
        "EN": q(en_metric(path, field.grid, params), "nats"),
        "MI": q(mi_metric(path, field.grid, params), "nats"),
        "ER": q(er_metric(path, field, er_params), "dimensionless"),
        "er_prior_mean": q(er_params.prior_mean, "field"),
        "er_prior_mean_source": "params" if mean_given else "path sample mean",
    }


# --- subcommands -------------------------------------------------------------


def cmd_gen(args):
    params, _ = _params_from_args(args)
    if params is None:
        raise UsageError("gen needs --l1 --l2 --sig2 --noise2 (or --params)")
    grid = _grid_from_args(args)
    spec = FieldSpec(grid, params, args.seed)
    field = sample_field(spec)
    save_field_csv(field, args.out)
    emit({
        "command": "gen",
        "grid": grid_report(grid),
        "params": params_report(params),
        "output": str(args.out),
        "provenance": provenance(args.seed),
    })


def cmd_fit(args):
    field = load_field_csv(args.field)

    def rng(lo, hi):
        return None if lo is None and hi is None else (lo if lo is not None else hi, hi if hi is not None else lo)

    search = MleSearch(
        signal_range=rng(args.sig2_min, args.sig2_max),
        noise_range=rng(args.noise2_min, args.noise2_max),
        lengthscale_h_range=rng(args.l1_min, args.l1_max),
        lengthscale_v_range=rng(args.l2_min, args.l2_max),
        points=args.points,
        rounds=args.rounds,
        prior_mean=args.mean,
    )
    params = fit_mle(field, search)
    report = {
        "command": "fit",
        "grid": grid_report(field.grid),
        "params": params_report(params),
        "provenance": provenance(),
    }
    if args.out:
        FsPath(args.out).write_text(json.dumps({"params": {
            "signal_variance": params.signal_variance,
            "noise_variance": params.noise_variance,
            "lengthscale_h": params.lengthscale_h,
            "lengthscale_v": params.lengthscale_v,
            "prior_mean": params.prior_mean,
        }}, indent=2) + "\n", encoding="utf-8")
        report["output"] = str(args.out)
    emit(report)


def _plan_inputs(args):
    field = load_field_csv(args.field) if args.field else None
    grid = field.grid if field is not None else _grid_from_args(args)
    params, mean_given = _params_from_args(args)
    if params is None:
        if field is None or not args.fit:
            raise UsageError("supply hyperparameters (--params or --l1/--l2/--sig2/--noise2) or --field with --fit")
        params, mean_given = fit_mle(field), True
    return field, grid, params, mean_given


def _bounds_block(algo, grid, params, k, m):
    out = {}
    if algo in DP_ALGORITHMS:
        b = BoundInputs.from_model(grid, params, k, m)
        try:
            eps = epsilon_mepp(b) if algo == "mepp_m" else epsilon_m2ipp(b)
            out["epsilon"] = q(eps, "nats")
        except DegenerateNoise:
            out["epsilon"] = q(None, "nats")
            out["epsilon_note"] = "undefined for zero noise"
        out["xi"] = q(b.xi, "dimensionless")
        out["cost_model"] = q(cost_model(algo, b), "operations")
    else:
        b = BoundInputs.from_model(grid, params, k, 0)
        out["cost_model"] = q(cost_model(algo, b), "operations")
    return out


def cmd_plan(args):
    algo = ALGO_NAMES[args.algo]
    if algo in DP_ALGORITHMS and args.m is None:
        raise UsageError(f"--m is required for {args.algo}")
    field, grid, params, mean_given = _plan_inputs(args)
    try:
        req = PlanRequest(grid, params, args.robots, algo, args.m, args.budget)
    except ValueError as exc:
        if isinstance(exc, TransectError):
            raise
        raise UsageError(str(exc)) from None
    res = solve(req)
    comments = [f"algo={args.algo} robots={args.robots}" + (f" m={args.m}" if algo in DP_ALGORITHMS else "")]
    write_path_file(res.path, args.out, comments)
    summary = res.summary()
    report = {
        "command": "plan",
        "request": {
            "algorithm": args.algo,
            "robots": q(args.robots, "count"),
            "m": q(args.m, "count") if algo in DP_ALGORITHMS else None,
            "budget_guard": q(args.budget, "count"),
            "grid": grid_report(grid),
            "params": params_report(params),
            "field": str(args.field) if args.field else None,
        },
        "result": {key: q(summary[key], UNITS[key]) for key in UNITS},
        "bounds": _bounds_block(algo, grid, params, args.robots, args.m),
        "output": str(args.out),
        "provenance": provenance(args.seed),
    }
    if field is not None and args.robots < grid.rows:
        report["metrics"] = metrics_block(res.path, field, params, mean_given)
    emit(report)


def cmd_eval(args):
    field = load_field_csv(args.field)
    path = read_path_file(args.path)
    if path.n != field.grid.cols:
        raise DimensionMismatch(f"path has {path.n} stages, field has {field.grid.cols} columns")
    if path.actions and max(a.rows[-1] for a in path) > field.grid.rows:
        raise DimensionMismatch("path uses rows outside the field grid")
    params, mean_given = _params_from_args(args)
    if params is None:
        raise UsageError("eval needs hyperparameters (--params or --l1/--l2/--sig2/--noise2)")
    emit({
        "command": "eval",
        "path": str(args.path),
        "field": str(args.field),
        "robots": q(path.k, "count"),
        "params": params_report(params),
        "metrics": metrics_block(path, field, params, mean_given),
        "provenance": provenance(args.seed),
    })


def _bound_inputs(args, m):
    if args.l1_norm is not None:
        l1n = args.l1_norm
    elif args.l1 is not None:
        l1n = args.l1 / args.spacing_h
    else:
        raise UsageError("bound needs --l1-norm or --l1 (with --spacing-h)")
    if args.eta is not None:
        eta = args.eta
    elif args.sig2 is not None and args.noise2 is not None:
        eta = args.noise2 / args.sig2
    else:
        raise UsageError("bound needs --eta or both --sig2 and --noise2")
    try:
        return BoundInputs(k=args.k, n=args.n, m=m, r=args.r, lengthscale_norm_h=l1n, eta=eta)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_bound(args):
    algos = ["mepp", "m2ipp"] if args.algo == "both" else [args.algo]
    fns = {"mepp": epsilon_mepp, "m2ipp": epsilon_m2ipp}
    report = {"command": "bound", "bounds": {}, "provenance": provenance()}
    sweep_rows = {}
    for algo in algos:
        entry = {}
        if args.m is not None:
            b = _bound_inputs(args, args.m)
            try:
                entry["epsilon"] = q(fns[algo](b), "nats")
            except ValueError as exc:
                raise UsageError(str(exc)) from None
            entry["xi"] = q(b.xi, "dimensionless")
            entry["cost_model"] = q(cost_model(algo + "_m", b), "operations")
        if args.sweep_m:
            top = args.n if algo == "mepp" else args.n // 2
            if args.m_max is not None:
                top = min(top, args.m_max)
            rows = [(m, fns[algo](_bound_inputs(args, m))) for m in range(1, top + 1)]
            sweep_rows[algo] = rows
            entry["sweep"] = [{"m": m, "epsilon": q(e, "nats")} for m, e in rows]
        report["bounds"][algo] = entry
    if args.sweep_m and args.out:
        lines = []
        for algo, rows in sweep_rows.items():
            lines.append(f"# algo={algo} columns: m epsilon_nats")
            lines += [f"{m} {e:.17g}" for m, e in rows]
        FsPath(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
        report["output"] = str(args.out)
    if args.m is None and not args.sweep_m:
        raise UsageError("bound needs --m or --sweep-m")
    emit(report)


def _int_list(text):
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi) + 1))
    return [int(t) for t in text.split(",") if t]


def cmd_bench(args):
    params, _ = _params_from_args(args)
    if params is None:
        raise UsageError("bench needs --l1 --l2 --sig2 --noise2 (or --params)")
    algos = [ALGO_NAMES[a] for a in args.algos.split(",")]
    runs, lines = [], []
    if args.sweep == "m":
        xs = _int_list(args.m_range)
    else:
        xs = _int_list(args.n_values)
    for algo in algos:
        lines.append(f"# algo={algo} sweep={args.sweep} columns: {args.sweep} median_wall_seconds")
        points = xs if (args.sweep == "n" or algo in DP_ALGORITHMS) else [0]
        for x in points:
            cols = x if args.sweep == "n" else args.cols
            m = x if args.sweep == "m" else args.m
            if algo not in DP_ALGORITHMS:
                m = None
            times, record = [], {"algorithm": algo, args.sweep: x}
            try:
                grid = TransectGrid(args.rows, cols, args.spacing_h, args.spacing_v)
                req = PlanRequest(grid, params, args.robots, algo, m, args.budget)
                for _ in range(args.reps):
                    res = solve(req)
                    times.append(res.wall_time)
                record.update({key: q(val, UNITS[key]) for key, val in res.summary().items() if key in UNITS})
                record["median_wall_time"] = q(statistics.median(times), "seconds")
                lines.append(f"{x} {statistics.median(times):.9g}")
            except (TransectError, ValueError) as exc:
                record["error"] = f"{type(exc).__name__}: {exc}"
            runs.append(record)
    FsPath(args.out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    emit({
        "command": "bench",
        "grid": {"rows": q(args.rows, "count"), "cols": q(args.cols, "count")},
        "robots": q(args.robots, "count"),
        "reps": q(args.reps, "count"),
        "runs": runs,
        "output": str(args.out),
        "provenance": provenance(),
    })


# --- parser ------------------------------------------------------------------


def build_parser():
    parser = argparse.ArgumentParser(prog="transect-ipp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="sample a synthetic GP field to a field file")
    _add_grid(p)
    _add_params(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("fit", help="fit hyperparameters by maximum likelihood")
    p.add_argument("--field", required=True)
    for name in ("sig2", "noise2", "l1", "l2"):
        p.add_argument(f"--{name}-min", type=float)
        p.add_argument(f"--{name}-max", type=float)
    p.add_argument("--mean", type=float, help="fix the prior mean (default: field mean)")
    p.add_argument("--points", type=int, default=8)
    p.add_argument("--rounds", type=int, default=3)
    p.add_argument("--out", help="write parameters as JSON")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plan", help="plan sampling paths")
    p.add_argument("--algo", required=True, choices=sorted(ALGO_NAMES))
    p.add_argument("--m", type=int)
    p.add_argument("--robots", type=int, required=True)
    p.add_argument("--field")
    p.add_argument("--fit", action="store_true", help="fit hyperparameters on --field")
    p.add_argument("--budget", type=int, default=10**7)
    p.add_argument("--seed", type=int, help="seed of the field, recorded in the report")
    p.add_argument("--out", required=True, help="path file to write")
    _add_grid(p)
    _add_params(p)
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("eval", help="evaluate EN, MI and ER for a path on a field")
    p.add_argument("--path", required=True)
    p.add_argument("--field", required=True)
    p.add_argument("--seed", type=int, help="seed of the field, recorded in the report")
    _add_params(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("bound", help="evaluate loss bounds")
    p.add_argument("--algo", choices=("mepp", "m2ipp", "both"), default="both")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--r", type=int, required=True)
    p.add_argument("--m", type=int)
    p.add_argument("--l1-norm", type=float, help="l1 / spacing_h")
    p.add_argument("--l1", type=float)
    p.add_argument("--spacing-h", type=float, default=1.0)
    p.add_argument("--eta", type=float)
    p.add_argument("--sig2", type=float)
    p.add_argument("--noise2", type=float)
    p.add_argument("--sweep-m", action="store_true")
    p.add_argument("--m-max", type=int)
    p.add_argument("--out", help="two-column (m, epsilon) data file for --sweep-m")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("bench", help="time planners over a range of m or n")
    p.add_argument("--algos", default="mepp")
    p.add_argument("--sweep", choices=("m", "n"), default="m")
    p.add_argument("--m-range", default="1:3", help="'lo:hi' or comma list")
    p.add_argument("--n-values", default="10,20", help="comma list of column counts for --sweep n")
    p.add_argument("--m", type=int, default=1, help="Markov order for --sweep n")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--robots", type=int, default=1)
    p.add_argument("--budget", type=int, default=10**7)
    p.add_argument("--out", required=True)
    _add_grid(p)
    _add_params(p)
    p.set_defaults(func=cmd_bench)
    return parser


def exit_code_for(exc) -> int:
    if isinstance(exc, BudgetExceeded):
        return EXIT_BUDGET
    if isinstance(exc, (SingularSystem, DegenerateNoise, SearchFailed, ZeroMeanField)):
        return EXIT_NUMERIC
    if isinstance(exc, (ParseError, DimensionMismatch, OSError, json.JSONDecodeError)):
        return EXIT_IO
    if isinstance(exc, (UsageError, InvalidArity, NoUnobserved, OutOfRange, TransectError, ValueError)):
        return EXIT_USAGE
    return 1


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "bench" and (args.rows is None or (args.sweep == "m" and args.cols is None)):
        parser.error("bench needs --rows (and --cols for --sweep m)")
    try:
        args.func(args)
    except (TransectError, UsageError, OSError, ValueError, json.JSONDecodeError, KeyError) as exc:
        code = exit_code_for(exc)
        if isinstance(exc, KeyError) and not isinstance(exc, TransectError):
            code = EXIT_IO
        print(f"transect-ipp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return code
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
