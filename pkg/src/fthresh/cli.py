"""Command line interface: ``fthresh <command> [options]``.

Commands: simulate, estimate, cv, roc, metrics, bench, reproduce. Options may
also come from ``--config FILE``: either ``key = value`` lines or a manifest
JSON written by an earlier run. Explicit flags override the file.

Exit codes: 0 success, 1 reproduction checks failed, 2 usage error,
3 unreadable input, 4 shape mismatch, 5 degenerate variance,
6 insufficient data, 7 invalid configuration.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import io
from .binning import op_counts
from .errors import ConfigError, DegenerateVarianceError, FormatError, InsufficientDataError, ShapeError
from .full import DenseSample, apply_factors
from .grid import Grid, functional_frobenius, functional_matrix_l1
from .reproduce import TABLES, HarnessConfig, harness_bandwidths, run_table
from .simulate import MODELS, SimSpec, simulate_full, simulate_partial
from .smoothing import Bandwidths, PartialSample, center_partial, default_bandwidth
from .thresholding import parse_rule
from .tuning import CVConfig, Fitter, cv_select_lambda, fit_norms, roc_from_norms, support_metrics

log = logging.getLogger("fthresh")

EXIT_OK = 0
EXIT_CHECKS = 1
EXIT_USAGE = 2
EXIT_INPUT = 3
EXIT_SHAPE = 4
EXIT_VARIANCE = 5
EXIT_DATA = 6
EXIT_CONFIG = 7

THREADS_ENV = "FTHRESH_THREADS"


def _default_threads() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def _add_common(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", type=Path, help="key = value file or manifest JSON; flags override it")
    sp.add_argument("--out", type=Path, default=Path("."), help="output directory (default: current)")
    sp.add_argument("--seed", type=int, default=0, help="seed for every random draw")
    sp.add_argument("--threads", type=int, default=None, help=f"worker processes (default: ${THREADS_ENV} or all cores)")


def _add_data_inputs(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--input", type=Path, required=True, help="sample file (.csv long format or .fdense)")
    sp.add_argument("--kind", choices=("auto", "dense", "partial"), default="auto")
    sp.add_argument("--estimator", choices=("adaptive", "universal"), default="adaptive")
    sp.add_argument("--rule", default="soft", help="hard | soft | scad[:a=3.7] | al[:eta=3]")
    sp.add_argument("--norm", choices=("hs", "sup"), default="hs")
    sp.add_argument("--keep-diagonal", action="store_true", help="never threshold diagonal entries")
    sp.add_argument("--method", choices=("binlls", "lls"), default="binlls", help="smoother for partial data")
    sp.add_argument("--R", type=int, default=21, help="output grid size for partial data")
    sp.add_argument("--h-c", type=float, default=None, help="cross-covariance bandwidth")
    sp.add_argument("--h-m", type=float, default=None, help="marginal covariance bandwidth")
    sp.add_argument("--bandwidth-c", type=float, default=None, help="constant c in (0, 1] for the default bandwidth rate")
    sp.add_argument("--design", choices=("auto", "sparse", "dense", "very-dense"), default="auto")
    sp.add_argument("--kernel", choices=("gaussian", "epanechnikov"), default="gaussian")
    sp.add_argument("--center", action="store_true", help="subtract a pooled local linear mean first (partial data)")
    sp.add_argument("--n-splits", type=int, default=5)
    sp.add_argument("--n-lambda", type=int, default=200)


COMMAND_NAMES = ("simulate", "estimate", "cv", "roc", "metrics", "bench", "reproduce")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fthresh", description="Adaptive functional thresholding of covariance functions.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="draw a simulated data set")
    _add_common(sp)
    sp.add_argument("--model", choices=MODELS, default="model1")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=50)
    sp.add_argument("--R", type=int, default=21)
    sp.add_argument("--L", type=int, default=None, help="observations per subject; omit for fully observed curves")
    sp.add_argument("--noise-sd", type=float, default=0.5)
    sp.add_argument("--locations", choices=("uniform", "grid"), default="uniform")
    sp.add_argument("--format", choices=("csv", "binary"), default="csv", help="dense output format")

    sp = sub.add_parser("estimate", help="thresholded covariance function estimate")
    _add_common(sp)
    _add_data_inputs(sp)
    sp.add_argument("--lambda", dest="lam", type=float, default=None, help="threshold; cross-validated when omitted")
    sp.add_argument("--csv-export", action="store_true", help="also write the j,k,r1,r2,value debug export")

    sp = sub.add_parser("cv", help="cross-validated threshold selection")
    _add_common(sp)
    _add_data_inputs(sp)

    sp = sub.add_parser("roc", help="TPR/FPR along a threshold sweep")
    _add_common(sp)
    _add_data_inputs(sp)
    sp.add_argument("--truth", type=Path, required=True, help="true covariance field (.fcov)")
    sp.add_argument("--lambda-grid", default=None, help="start:stop:num (default 0 to the largest norm, 200 points)")

    sp = sub.add_parser("metrics", help="losses and support recovery against a truth")
    _add_common(sp)
    sp.add_argument("--estimate", type=Path, required=True)
    sp.add_argument("--truth", type=Path, required=True)
    sp.add_argument("--support", type=Path, default=None, help="support edge list; nonzero entries when omitted")

    sp = sub.add_parser("bench", help="instrumented operation counts for one smoothing pass")
    _add_common(sp)
    sp.add_argument("--mode", default="binlls", help="lls | binlls, optionally with :general or :simplified")
    sp.add_argument("--n", type=int, default=100)
    sp.add_argument("--p", type=int, default=6)
    sp.add_argument("--L", type=int, default=51)
    sp.add_argument("--R", type=int, default=21)
    sp.add_argument("--h", type=float, default=0.2)

    sp = sub.add_parser("reproduce", help="Monte Carlo reproduction of a simulation table")
    _add_common(sp)
    sp.add_argument("--table", choices=TABLES, required=True)
    sp.add_argument("--scale", choices=("desk", "full"), default="desk")
    sp.add_argument("--reps", type=int, default=None, help="override the replicate count")
    sp.add_argument("--threshold-diagonal", action="store_true", help="threshold diagonal entries too")
    sp.add_argument("--rules", default="hard,soft,scad,al")
    return parser


# ---------------------------------------------------------------------------
# configuration


def _parse_bool(text: str) -> bool:
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


def read_config_file(path: Path) -> dict:
    """``key = value`` lines (``#`` comments), or the ``config`` block of a manifest JSON."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise FormatError(f"cannot read config {path}: {exc}") from exc
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        obj = None
    if isinstance(obj, dict):
        cfg = obj.get("config", obj)
        return {k: v for k, v in cfg.items() if k not in ("command", "config")}
    out = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _prescan(argv: List[str]):
    """Command name and ``--config`` path, found before full parsing so the file can fill required options."""
    command = next((a for a in argv if a in COMMAND_NAMES), None)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    return command, path


def parse_args(argv: Optional[List[str]] = None) -> argparse.Namespace:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    command, path = _prescan(argv)
    if command is None or path is None:
        return parser.parse_args(argv)
    values = read_config_file(Path(path))
    sub = parser._subparsers._group_actions[0].choices[command]
    actions = {a.dest: a for a in sub._actions}
    for a in sub._actions:
        for opt in a.option_strings:
            actions.setdefault(opt.lstrip("-").replace("-", "_"), a)
    defaults = {}
    for key, value in values.items():
        if key not in actions:
            raise ConfigError(f"unknown config key {key!r} for command {command}")
        act = actions[key]
        if isinstance(act, argparse._StoreTrueAction):
            value = value if isinstance(value, bool) else _parse_bool(value)
        elif isinstance(value, str) and act.type is not None:
            value = act.type(value)
        act.required = False
        defaults[act.dest] = value
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def _config_dict(args: argparse.Namespace) -> dict:
    skip = {"config", "verbose", "threads"}
    return {k: (str(v) if isinstance(v, Path) else v) for k, v in sorted(vars(args).items()) if k not in skip}


# ---------------------------------------------------------------------------
# commands


def _load(args):
    data = io.load_sample(args.input, None if args.kind == "auto" else args.kind)
    if isinstance(data, PartialSample) and args.center:
        h = args.h_m or args.h_c or harness_bandwidths(data.n, _typical_L(data)).h_C
        data = center_partial(data, h, args.kernel)
    return data


def _typical_L(data: PartialSample) -> int:
    return max(1, int(round(float(np.median(data.counts())))))


def _fitter(args, data) -> Fitter:
    if isinstance(data, DenseSample):
        return Fitter("full")
    L = _typical_L(data)
    if args.bandwidth_c is not None or args.design != "auto":
        from .reproduce import BANDWIDTH_C, design_for

        design = design_for(L) if args.design == "auto" else args.design
        c = args.bandwidth_c if args.bandwidth_c is not None else BANDWIDTH_C[design]
        h = default_bandwidth(data.n, L, design, c)
    else:
        h = harness_bandwidths(data.n, L).h_C
    bw = Bandwidths(args.h_c or h, args.h_m or args.h_c or h)
    return Fitter(args.method, Grid.uniform(args.R), bw, args.kernel)


def _cv(args, data, fitter):
    cfg = CVConfig(N=args.n_splits, rng_seed=args.seed, rule=parse_rule(args.rule), n_lambda=args.n_lambda)
    return cv_select_lambda(data, cfg, args.estimator, fitter, norm=args.norm, keep_diagonal=args.keep_diagonal)


def cmd_simulate(args) -> int:
    spec = SimSpec(
        model=args.model, n=args.n, p=args.p, R=args.R, seed=args.seed, L=args.L,
        noise_sd=args.noise_sd, locations=args.locations,
    )
    partial = args.L is not None or args.locations == "grid"
    sim = simulate_partial(spec) if partial else simulate_full(spec)
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = []
    if partial:
        path = args.out / "data.csv"
        io.write_partial_csv(sim.partial, path)
    elif args.format == "binary":
        path = args.out / "data.fdense"
        io.write_dense_binary(sim.dense, path)
    else:
        path = args.out / "data.csv"
        io.write_dense_csv(sim.dense, path)
    outputs.append(path)
    truth = args.out / "truth.fcov"
    io.write_covfield(sim.truth, truth)
    outputs.append(truth)
    io.write_manifest(args.out / "manifest.json", "simulate", _config_dict(args), outputs)
    print(f"wrote {path} and {truth}")
    return EXIT_OK


def cmd_estimate(args) -> int:
    data = _load(args)
    fitter = _fitter(args, data)
    rule = parse_rule(args.rule)
    diagnostics = {"estimator": args.estimator, "rule": str(rule), "source": fitter.source}
    if args.lam is None:
        cv = _cv(args, data, fitter)
        lam = cv.lambda_hat
        diagnostics["lambda_source"] = "cv"
    else:
        lam = args.lam
        diagnostics["lambda_source"] = "flag"
    if lam < 0:
        raise ConfigError("lambda must be nonnegative")
    sigma, norms = fit_norms(data, fitter, (args.estimator,), norm=args.norm, keep_diagonal=args.keep_diagonal)
    en = norms[args.estimator]
    est = apply_factors(sigma, en.factors(lam, rule))
    diagnostics.update(
        {
            "lambda": lam,
            "p": est.p,
            "R": est.R,
            "n": data.n,
            "support_size": int(est.support.sum()),
            "entry_norms": en.norms,
        }
    )
    if fitter.source != "full":
        diagnostics["bandwidths"] = {"h_C": fitter.bandwidths.h_C, "h_M": fitter.bandwidths.h_M}
    args.out.mkdir(parents=True, exist_ok=True)
    outputs = [args.out / "estimate.fcov", args.out / "support.csv", args.out / "diagnostics.json"]
    io.write_covfield(est, outputs[0])
    io.write_support_csv(est, outputs[1])
    io.write_json(diagnostics, outputs[2])
    if args.csv_export:
        outputs.append(args.out / "estimate.csv")
        io.export_covfield_csv(est, outputs[-1])
    io.write_manifest(args.out / "manifest.json", "estimate", _config_dict(args), outputs)
    print(f"lambda = {lam:.6g}; {int(est.support.sum())} of {est.p * est.p} entries kept")
    return EXIT_OK


def cmd_cv(args) -> int:
    data = _load(args)
    cv = _cv(args, data, _fitter(args, data))
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "cv.csv"
    cv.to_csv(path)
    io.write_manifest(args.out / "manifest.json", "cv", _config_dict(args), [path])
    print(f"lambda_hat = {cv.lambda_hat:.17g}")
    return EXIT_OK


def _parse_grid(text: str) -> np.ndarray:
    try:
        a, b, num = text.split(":")
        return np.linspace(float(a), float(b), int(num))
    except ValueError as exc:
        raise ConfigError(f"lambda grid must be start:stop:num, got {text!r}") from exc


def cmd_roc(args) -> int:
    data = _load(args)
    truth = io.read_covfield(args.truth)
    _, norms = fit_norms(data, _fitter(args, data), (args.estimator,), norm=args.norm, keep_diagonal=args.keep_diagonal)
    en = norms[args.estimator]
    if en.norms.shape != (truth.p, truth.p):
        raise ShapeError(f"estimate has p={en.norms.shape[0]} but truth has p={truth.p}")
    grid = _parse_grid(args.lambda_grid) if args.lambda_grid else np.linspace(0.0, float(en.norms.max()) * 1.001, 200)
    roc = roc_from_norms(en, grid, truth)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "roc.csv"
    with open(path, "w") as fh:
        fh.write("lambda,tpr,fpr\n")
        for lam, t, f in roc:
            fh.write(f"{lam:.17g},{t:.17g},{f:.17g}\n")
    io.write_manifest(args.out / "manifest.json", "roc", _config_dict(args), [path])
    print(f"wrote {len(roc)} points to {path}")
    return EXIT_OK


def cmd_metrics(args) -> int:
    est = io.read_covfield(args.estimate)
    truth = io.read_covfield(args.truth)
    if est.p != truth.p or not est.grid.same_as(truth.grid):
        raise ShapeError("estimate and truth differ in p or grid")
    if args.support is not None:
        support = io.read_support_csv(args.support, est.p)
    else:
        support = np.any(est.values != 0, axis=(2, 3))
    tpr, fpr = support_metrics(support, truth)
    out = {
        "frobenius": functional_frobenius(est, truth),
        "matrix_l1": functional_matrix_l1(est, truth),
        "tpr": tpr,
        "fpr": fpr,
    }
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "metrics.json"
    io.write_json(out, path)
    io.write_manifest(args.out / "manifest.json", "metrics", _config_dict(args), [path])
    print(json.dumps(out, sort_keys=True))
    return EXIT_OK


def cmd_bench(args) -> int:
    report = op_counts(args.mode, args.n, args.p, args.L, args.R, seed=args.seed, h=args.h)
    args.out.mkdir(parents=True, exist_ok=True)
    path = args.out / "bench.json"
    io.write_json(report, path)
    print(json.dumps(report, sort_keys=True))
    return EXIT_OK


def cmd_reproduce(args) -> int:
    rules = tuple(r.strip() for r in args.rules.split(",") if r.strip())
    cfg = HarnessConfig(
        scale=args.scale, reps=args.reps, seed=args.seed, threads=args.threads or _default_threads(),
        keep_diagonal=not args.threshold_diagonal, rules=rules,
    )
    report = run_table(args.table, cfg)
    args.out.mkdir(parents=True, exist_ok=True)
    txt, js = args.out / f"{args.table}.txt", args.out / f"{args.table}.json"
    txt.write_text(report.text + "\n")
    io.write_json(report.to_dict(), js)
    io.write_manifest(args.out / "manifest.json", "reproduce", _config_dict(args), [txt, js])
    print(report.text)
    return EXIT_OK if report.passed else EXIT_CHECKS


COMMANDS = {
    "simulate": cmd_simulate,
    "estimate": cmd_estimate,
    "cv": cmd_cv,
    "roc": cmd_roc,
    "metrics": cmd_metrics,
    "bench": cmd_bench,
    "reproduce": cmd_reproduce,
}


def main(argv: Optional[List[str]] = None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if isinstance(exc.code, int) else EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ShapeError as exc:
        print(f"shape error: {exc}", file=sys.stderr)
        return EXIT_SHAPE
    except DegenerateVarianceError as exc:
        print(f"degenerate variance: {exc}", file=sys.stderr)
        return EXIT_VARIANCE
    except InsufficientDataError as exc:
        print(f"insufficient data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
