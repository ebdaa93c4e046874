"""
Command-line front end (``fmbs``).

Subcommands: fit, select, lrt, curves, simulate, study, reliability.

Exit codes: 0 success, 2 input error, 3 numerical failure, 4 partial sweep.
The seed defaults to the ``BSMIX_SEED`` environment variable, then 0.
"""

import argparse
import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import sys
import warnings

import numpy as np

from . import __version__
from .em import EmConfig, fit
from .errors import DomainError, NumericalError
from .inference import (aic_bic, bootstrap_lrt, bootstrap_se, info_matrix, parameter_names,
                        standard_errors, wald_ci)
from .initialization import InitStrategy
from .mixture import (MixtureParams, mix_cdf, mix_hazard, mix_pdf, mix_sample, mix_survival,
                      stress_strength)
from .study import SCENARIO_1, SCENARIO_2, reports_to_csv, reports_to_json, run_grid

__all__ = ["main", "read_data", "parse_params", "InputError"]

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_PARTIAL = 0, 2, 3, 4
SCHEMA = 1


class InputError(DomainError):
    """Bad input file or command-line value (exit code 2)."""


# ---------------------------------------------------------------- input

def read_data(path):
    """One-column CSV of positive reals, optionally with a single header line.

    Blank lines are ignored.  All offending line numbers are reported at once.
    """
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    values, bad = [], []
    first = True
    for lineno, row in enumerate(rows, start=1):
        cells = [c.strip() for c in row]
        if not any(cells):
            continue
        try:
            if len(cells) != 1:
                raise ValueError
            v = float(cells[0])
        except ValueError:
            if first:            # header
                first = False
                continue
            bad.append(lineno)
            continue
        first = False
        if not (math.isfinite(v) and v > 0):
            bad.append(lineno)
        else:
            values.append(v)
    if bad:
        shown = ", ".join(map(str, bad[:20])) + (" ..." if len(bad) > 20 else "")
        raise InputError(f"{path}: non-numeric or non-positive values on line(s) {shown}")
    if not values:
        raise InputError(f"{path}: no data values")
    return np.array(values)


def parse_params(text):
    """``'p1,...;alpha1,...;beta1,...'`` -> MixtureParams."""
    parts = text.split(";")
    if len(parts) != 3:
        raise InputError("parameters must look like 'p1,...;alpha1,...;beta1,...'")
    try:
        w, a, b = ([float(x) for x in part.split(",")] for part in parts)
    except ValueError as exc:
        raise InputError(f"cannot parse parameters {text!r}") from exc
    if not len(w) == len(a) == len(b):
        raise InputError("weights, alphas and betas need the same length")
    try:
        return MixtureParams(w, a, b)
    except DomainError as exc:
        raise InputError(str(exc)) from exc


def _params_from_report(path):
    try:
        with open(path, encoding="utf-8") as fh:
            rep = json.load(fh)
        p = rep["params"]
        return MixtureParams(p["weights"], p["alphas"], p["betas"])
    except (OSError, ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{path}: not a fit report with 'params'") from exc


def _seed(args):
    if args.seed is not None:
        return args.seed
    env = os.environ.get("BSMIX_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise InputError(f"BSMIX_SEED must be an integer, got {env!r}") from exc


def _config(args, seed):
    try:
        return EmConfig(tol=args.tol, max_iter=args.max_iter, init=args.init, seed=seed)
    except (DomainError, ValueError) as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------- output

def _round(x):
    """Reals to 10 significant digits; NaN/inf become None for JSON."""
    if isinstance(x, dict):
        return {k: _round(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_round(v) for v in x]
    if isinstance(x, np.ndarray):
        return _round(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return float(format(x, ".10g")) if math.isfinite(x) else None
    return x


def _num(x):
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".10g")
    return str(x)


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _manifest(args, seed, started, config=None):
    man = {"command": args.command, "input": getattr(args, "input", None),
           "seed": seed, "version": __version__, "started": started, "finished": _now()}
    if man["input"]:
        with open(man["input"], "rb") as fh:
            man["input_sha256"] = hashlib.sha256(fh.read()).hexdigest()
    if config is not None:
        man["config"] = {"tol": config.tol, "max_iter": config.max_iter,
                         "init": config.init.value, "seed": config.seed}
    return man


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def _table_text(header, rows):
    cells = [list(map(str, header))] + [[_num(v) for v in row] for row in rows]
    widths = [max(len(r[k]) for r in cells) for k in range(len(header))]
    lines = ["  ".join(c.rjust(wd) for c, wd in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * wd for wd in widths))
    return "\n".join(lines) + "\n"


def _emit(args, report, header, rows, manifest):
    """Write ``report`` as JSON, or ``rows`` as CSV/table, to --output or stdout."""
    fmt = args.format
    if fmt == "json":
        doc = {"schema": SCHEMA, "manifest": manifest, **report}
        text = json.dumps(_round(doc), indent=2) + "\n"
    elif fmt == "csv":
        text = _csv_text(header, rows)
    else:
        text = _table_text(header, rows)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if fmt != "json":
            with open(args.output + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(json.dumps(_round({"schema": SCHEMA, **manifest}), indent=2) + "\n")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- commands

def _fit_report(y, res, args, seed):
    names = parameter_names(res.n_components)
    theta = res.params.theta()
    aic, bic = aic_bic(res.loglik, res.n_params, res.n_obs)
    try:
        se = standard_errors(info_matrix(y, res.params))
        ci = wald_ci(theta, se)
    except NumericalError as exc:
        print(f"warning: {exc}", file=sys.stderr)
        se = np.full(theta.size, np.nan)
        ci = np.full((theta.size, 2), np.nan)
    report = {
        "n": res.n_obs, "G": res.n_components, "init": res.config.init.value, "seed": seed,
        "loglik": res.loglik, "aic": aic, "bic": bic, "iterations": res.iterations,
        "converged": res.converged, "rate_r": res.rate_r, "restarted": res.restarted,
        "params": res.params.to_dict(),
        "estimates": {k: {"estimate": theta[i], "se": se[i], "ci_lower": ci[i, 0],
                          "ci_upper": ci[i, 1]} for i, k in enumerate(names)},
    }
    boot = None
    if args.bootstrap:
        boot = bootstrap_se(y, res, args.bootstrap, seed=seed, workers=args.threads)
        report["bootstrap"] = {"B": args.bootstrap, "failed": boot.n_failed}
        for i, k in enumerate(names):
            report["estimates"][k].update(boot_se=boot.ses[i], boot_lower=boot.cis[i, 0],
                                          boot_upper=boot.cis[i, 1])
    header = ["parameter", "estimate", "se", "ci_lower", "ci_upper"]
    if boot is not None:
        header += ["boot_se", "boot_lower", "boot_upper"]
    rows = []
    for i, k in enumerate(names):
        row = [k, theta[i], se[i], ci[i, 0], ci[i, 1]]
        if boot is not None:
            row += [boot.ses[i], boot.cis[i, 0], boot.cis[i, 1]]
        rows.append(row)
    rows += [["loglik", res.loglik], ["aic", aic], ["bic", bic],
             ["iterations", res.iterations], ["rate_r", res.rate_r]]
    rows = [r + [""] * (len(header) - len(r)) for r in rows]
    return report, header, rows


def cmd_fit(args):
    started = _now()
    seed = _seed(args)
    y = read_data(args.input)
    config = _config(args, seed)
    res = fit(y, args.components, config)
    report, header, rows = _fit_report(y, res, args, seed)
    _emit(args, report, header, rows, _manifest(args, seed, started, config))
    return EXIT_OK


def cmd_select(args):
    started = _now()
    seed = _seed(args)
    y = read_data(args.input)
    config = _config(args, seed)
    if not 1 <= args.g_min <= args.g_max:
        raise InputError("need 1 <= --g-min <= --g-max")
    rows, failed = [], False
    for g in range(args.g_min, args.g_max + 1):
        try:
            res = fit(y, g, config)
        except (NumericalError, DomainError) as exc:
            failed = True
            rows.append({"G": g, "status": "failed", "error": str(exc)})
            continue
        aic, bic = aic_bic(res.loglik, res.n_params, res.n_obs)
        rows.append({"G": g, "status": "ok", "loglik": res.loglik, "aic": aic, "bic": bic,
                     "iterations": res.iterations, "converged": res.converged,
                     "rate_r": res.rate_r})
    ok = [r for r in rows if r["status"] == "ok"]
    notes = []
    for r0, r1 in zip(ok, ok[1:]):
        if r1["G"] == r0["G"] + 1 and r0["loglik"] > r1["loglik"] + 1e-6:
            notes.append(f"loglik decreased from G={r0['G']} to G={r1['G']}")
            print(f"warning: {notes[-1]}", file=sys.stderr)
    best_aic = min(ok, key=lambda r: r["aic"])["G"] if ok else None
    best_bic = min(ok, key=lambda r: r["bic"])["G"] if ok else None
    for r in rows:
        r["aic_best"] = r["G"] == best_aic
        r["bic_best"] = r["G"] == best_bic
    header = ["G", "status", "loglik", "aic", "bic", "iterations", "rate_r", "aic_best", "bic_best"]
    table = [[r.get(k) for k in header] for r in rows]
    _emit(args, {"rows": rows, "best_aic": best_aic, "best_bic": best_bic, "warnings": notes},
          header, table, _manifest(args, seed, started, config))
    return EXIT_PARTIAL if failed else EXIT_OK


def cmd_lrt(args):
    started = _now()
    seed = _seed(args)
    y = read_data(args.input)
    config = _config(args, seed)
    res = bootstrap_lrt(y, args.g_null, args.g_alt, args.bootstrap, config, seed=seed,
                        workers=args.threads)
    report = res.to_dict()
    header = ["g_null", "g_alt", "stat_obs", "p_value", "B", "n_floored", "n_failed"]
    rows = [[res.g_null, res.g_alt, res.stat_obs, res.p_value, res.B, res.n_floored, res.n_failed]]
    _emit(args, report, header, rows, _manifest(args, seed, started, config))
    return EXIT_OK


def _grid(spec, log):
    try:
        lo, hi, num = spec.split(":")
        lo, hi, num = float(lo), float(hi), int(num)
    except ValueError as exc:
        raise InputError("grid must look like start:stop:num") from exc
    if not (0 < lo <= hi and num >= 1):
        raise InputError("grid needs 0 < start <= stop and num >= 1")
    if num == 1:
        return np.array([lo])
    return np.geomspace(lo, hi, num) if log else np.linspace(lo, hi, num)


def cmd_curves(args):
    started = _now()
    if (args.params is None) == (args.from_fit is None):
        raise InputError("give exactly one of --params or --from-fit")
    params = parse_params(args.params) if args.params else _params_from_report(args.from_fit)
    y = _grid(args.grid, args.log)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        cols = [y, mix_pdf(y, params), mix_cdf(y, params), mix_survival(y, params),
                mix_hazard(y, params)]
    cols = [np.atleast_1d(c) for c in cols]
    header = ["y", "pdf", "cdf", "sf", "hf"]
    rows = [list(r) for r in zip(*cols)]
    report = {"params": params.to_dict(), "columns": {k: c for k, c in zip(header, cols)}}
    _emit(args, report, header, rows, _manifest(args, None, started))
    return EXIT_OK


def cmd_simulate(args):
    started = _now()
    seed = _seed(args)
    params = parse_params(args.params)
    if args.size < 1:
        raise InputError("--size must be at least 1")
    y, z = mix_sample(args.size, params, np.random.default_rng(seed), return_labels=True)
    if args.labels:
        header, rows = ["y", "component"], [[v, int(k) + 1] for v, k in zip(y, z)]
    else:
        header, rows = ["y"], [[v] for v in y]
    report = {"params": params.to_dict(), "y": y}
    if args.labels:
        report["component"] = (z + 1).tolist()
    _emit(args, report, header, rows, _manifest(args, seed, started))
    return EXIT_OK


def cmd_study(args):
    started = _now()
    seed = _seed(args)
    config = _config(args, seed)
    scenarios = [{1: SCENARIO_1, 2: SCENARIO_2}[s] for s in args.scenario]
    reports = run_grid(scenarios, args.sizes, args.strategies, args.replicates, config, seed)
    manifest = _manifest(args, seed, started, config)
    if args.format == "json":
        doc = json.loads(reports_to_json(reports))
        text = json.dumps(_round({"schema": SCHEMA, "manifest": manifest, **doc}), indent=2) + "\n"
    else:
        text = reports_to_csv(reports)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        if args.format != "json":
            with open(args.output + ".manifest.json", "w", encoding="utf-8") as fh:
                fh.write(json.dumps(_round({"schema": SCHEMA, **manifest}), indent=2) + "\n")
    else:
        sys.stdout.write(text)
    return EXIT_PARTIAL if any(r.unreliable for r in reports) else EXIT_OK


def cmd_reliability(args):
    started = _now()
    px, py = parse_params(args.x), parse_params(args.y)
    r = stress_strength(px, py)
    report = {"R": r, "strength": px.to_dict(), "stress": py.to_dict()}
    _emit(args, report, ["R"], [[r]], _manifest(args, None, started))
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _positive_int(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


_DEFAULT_FORMAT = {"curves": "csv", "simulate": "csv", "study": "csv"}


def build_parser():
    parser = argparse.ArgumentParser(prog="fmbs", description="Finite mixtures of Birnbaum-Saunders laws.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed (default $BSMIX_SEED or 0)")
    common.add_argument("--output", "-o", default=None, help="output path (default stdout)")
    # None here; per-command defaults live in _DEFAULT_FORMAT (set_defaults would
    # mutate this shared action for every subcommand)
    common.add_argument("--format", choices=["json", "csv", "table"], default=None)

    em = argparse.ArgumentParser(add_help=False)
    em.add_argument("--init", choices=[s.value for s in InitStrategy], default="kbumps")
    em.add_argument("--tol", type=float, default=1e-6)
    em.add_argument("--max-iter", type=int, default=2000)
    em.add_argument("--threads", type=_positive_int, default=1, help="worker processes for bootstrap")

    p = sub.add_parser("fit", parents=[common, em], help="fit a G-component mixture")
    p.add_argument("input")
    p.add_argument("--components", "-g", type=_positive_int, default=2)
    p.add_argument("--bootstrap", type=int, default=0, metavar="B", help="bootstrap SEs with B replicates")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("select", parents=[common, em], help="compare G over a range by AIC/BIC")
    p.add_argument("input")
    p.add_argument("--g-min", type=_positive_int, default=1)
    p.add_argument("--g-max", type=_positive_int, default=4)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("lrt", parents=[common, em], help="parametric bootstrap LR test")
    p.add_argument("input")
    p.add_argument("--g-null", type=_positive_int, default=1)
    p.add_argument("--g-alt", type=_positive_int, default=2)
    p.add_argument("--bootstrap", type=int, default=99, metavar="B")
    p.set_defaults(func=cmd_lrt)

    p = sub.add_parser("curves", parents=[common], help="pdf/cdf/sf/hazard on a grid")
    p.add_argument("--params", help="'p1,...;alpha1,...;beta1,...'")
    p.add_argument("--from-fit", help="JSON report written by 'fmbs fit'")
    p.add_argument("--grid", default="0.01:10:200", help="start:stop:num")
    p.add_argument("--log", action="store_true", help="log-spaced grid")
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("simulate", parents=[common], help="draw a sample from a mixture")
    p.add_argument("--params", required=True)
    p.add_argument("--size", "-n", type=int, required=True)
    p.add_argument("--labels", action="store_true", help="include the component labels")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("study", parents=[common, em], help="Monte Carlo study over scenarios")
    p.add_argument("--scenario", type=int, nargs="+", choices=[1, 2], default=[1, 2])
    p.add_argument("--sizes", type=_positive_int, nargs="+", default=[100, 500, 1000])
    p.add_argument("--strategies", nargs="+", choices=[s.value for s in InitStrategy],
                   default=["kbumps"])
    p.add_argument("--replicates", type=int, default=200)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("reliability", parents=[common], help="stress-strength R = P(Y < X)")
    p.add_argument("--x", required=True, help="strength X parameters")
    p.add_argument("--y", required=True, help="stress Y parameters")
    p.set_defaults(func=cmd_reliability)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.format is None:
        args.format = _DEFAULT_FORMAT.get(args.command, "json")
    try:
        return args.func(args)
    except (InputError, DomainError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (NumericalError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        diag = getattr(exc, "diagnostics", None)
        if diag:
            print(f"diagnostics: {diag}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
