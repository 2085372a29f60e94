"""Command-line interface: ``glslasso {fit,infer,simulate,report}``.

Datasets are CSV files with a header whose first column is ``y``; the other
columns are covariates and rows are in time order.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .crossval import CvSettings
from .dataset import Dataset
from .inference import SIGMA_U_CHOICES, VARIANCE_FORMS, debias, t_statistics
from .montecarlo import McSettings, MetricsTable, cell_metrics, format_table1, format_table2, quantile_rows, run_cell
from .nodewise import nodewise_fit
from .simulate import RNG_NAME, expand_grid
from .whitening import gls_lasso

EXIT_OK = 0
EXIT_NONCONVERGED = 1
EXIT_USAGE = 2


class DatasetFormatError(ValueError):
    pass


# ---------------------------------------------------------------- io


def parse_dataset(path: str | os.PathLike) -> Dataset:
    """Read a ``y, x1, ..., xp`` CSV; rows and columns in messages are 1-based."""
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"dataset file not found: {path}")
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DatasetFormatError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if not header or header[0] != "y":
        raise DatasetFormatError(f"{path}: first header column must be 'y', got {header[:1]}")
    if len(header) < 2:
        raise DatasetFormatError(f"{path}: no covariate columns")
    body = rows[1:]
    if not body:
        raise DatasetFormatError(f"{path}: no data rows")
    data = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DatasetFormatError(
                f"{path}: row {i} has {len(row)} fields, header has {len(header)}"
            )
        for j, cell in enumerate(row):
            cell = cell.strip()
            if not cell:
                raise DatasetFormatError(f"{path}: missing value at row {i}, column {j + 1} ({header[j]})")
            try:
                v = float(cell)
            except ValueError:
                raise DatasetFormatError(
                    f"{path}: non-numeric value {cell!r} at row {i}, column {j + 1} ({header[j]})"
                ) from None
            if not np.isfinite(v):
                raise DatasetFormatError(f"{path}: non-finite value at row {i}, column {j + 1}")
            data[i - 2, j] = v
    return Dataset(data[:, 0], data[:, 1:])


def write_dataset(path: str | os.PathLike, dataset: Dataset, names: list[str] | None = None) -> None:
    names = names or [f"x{j + 1}" for j in range(dataset.p)]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["y", *names])
    for t in range(dataset.T):
        w.writerow([repr(float(dataset.y[t])), *(repr(float(v)) for v in dataset.X[t])])
    write_atomic(path, buf.getvalue())


def write_atomic(path: str | os.PathLike, text: str) -> None:
    """Write through a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def provenance(args: argparse.Namespace, extra: dict | None = None) -> dict:
    # the output location is left out so results do not depend on where they are written
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "output")}
    out = {
        "artifact": f"glslasso {__version__}",
        "rng": RNG_NAME,
        "numpy": np.__version__,
        "seed": getattr(args, "seed", None),
        "config": cfg,
    }
    if extra:
        out.update(extra)
    return out


def _comment_block(meta: dict) -> str:
    return "".join(f"# {k}: {json.dumps(v, sort_keys=True, default=str)}\n" for k, v in meta.items())


# ---------------------------------------------------------------- pipelines


def _standardize(ds: Dataset):
    sd = ds.X.std(axis=0)
    zero = np.flatnonzero(sd == 0)
    if zero.size:
        raise ValueError(f"covariate column {int(zero[0]) + 1} is constant; cannot standardise")
    Xc = (ds.X - ds.X.mean(axis=0)) / sd
    return Dataset(ds.y - ds.y.mean(), Xc), sd


def _settings(args) -> CvSettings:
    return CvSettings(k=args.k_folds)


def _lambda(args):
    return "cv" if args.lam == "cv" else float(args.lam)


def _run_gls(args):
    ds = parse_dataset(args.input)
    scale = np.ones(ds.p)
    if args.standardize:
        ds, scale = _standardize(ds)
    lam = _lambda(args)
    fit = gls_lasso(ds, lam, lam, args.alpha_q, q_max=args.q_max, settings=_settings(args),
                    cv_whitening=args.cv_whitening)
    return ds, fit, scale


def cmd_fit(args) -> int:
    _, fit, scale = _run_gls(args)
    beta = fit.beta / scale
    doc = {
        "beta_hat": beta.tolist(),
        "beta_prelim": (fit.prelim.beta / scale).tolist(),
        "support": np.flatnonzero(beta).tolist(),
        "phi_hat": fit.ar.phi.tolist(),
        "q_hat": fit.q_selected,
        "sigma2_hat": fit.ar.sigma2,
        "stationary": bool(fit.ar.stationary),
        "lambdas": {"prelim": fit.lambda_prelim, "gls": fit.lambda_gls},
        "convergence": {
            "prelim": {"converged": fit.prelim.converged, "iterations": fit.prelim.iterations},
            "gls": {"converged": fit.whitened_fit.converged,
                    "iterations": fit.whitened_fit.iterations},
        },
        "provenance": provenance(args),
    }
    write_atomic(args.output, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return _exit(fit.converged, args)


def cmd_infer(args) -> int:
    _, fit, scale = _run_gls(args)
    nw = nodewise_fit(fit.whitened.X, "cv", CvSettings(k=args.k_folds, patience=10))
    deb = debias(fit, nw, args.variance_form, args.sigma_u)
    summ = t_statistics(deb, 0.0, args.alpha)
    buf = io.StringIO()
    buf.write(_comment_block(provenance(args, {"q_hat": fit.q_selected,
                                               "phi_hat": fit.ar.phi.tolist(),
                                               "sigma_u2": deb.sigma_u2})))
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["index", "estimate", "debiased", "ci_lower", "ci_upper", "tstat", "pvalue"])
    cols = (fit.beta / scale, deb.b / scale, summ.ci_lower / scale, summ.ci_upper / scale,
            summ.tstat, summ.pvalue)
    for i in range(len(scale)):
        w.writerow([i, *(repr(float(c[i])) for c in cols)])
    write_atomic(args.output, buf.getvalue())
    return _exit(fit.converged and bool(nw.converged.all()), args)


def cmd_simulate(args) -> int:
    doc = json.loads(Path(args.input).read_text())
    configs = expand_grid(doc)
    if args.seed is not None:
        configs = [type(c).from_dict({**c.to_dict(), "seed": args.seed}) for c in configs]
    settings = McSettings(
        alpha=args.alpha,
        alpha_q=args.alpha_q,
        cv=CvSettings(k=args.k_folds),
        nodewise_cv=CvSettings(k=args.k_folds, patience=10),
        variance_form=args.variance_form,
        sigma_u=args.sigma_u,
        cv_whitening=args.cv_whitening,
    )
    table = MetricsTable()
    qbuf = io.StringIO()
    qw = csv.writer(qbuf, lineterminator="\n")
    qw.writerow(["p", "T", "phi", "dgp", "df", "estimator", "quantile", "value"])
    for cfg in configs:
        reps = args.reps if args.reps is not None else cfg.reps
        results = run_cell(cfg, reps, settings, args.threads)
        table.extend(cell_metrics(cfg, results, args.alpha))
        for est, q, v in quantile_rows(cfg, results):
            qw.writerow([cfg.p, cfg.T, repr(cfg.phi), cfg.dgp, cfg.df or "", est, repr(q), repr(v)])
    meta = _comment_block(provenance(args, {"cells": [c.to_dict() for c in configs]}))
    out = Path(args.output)
    write_atomic(out / "metrics.csv", meta + table.to_csv())
    write_atomic(out / "quantiles.csv", meta + qbuf.getvalue())
    return EXIT_OK


def cmd_report(args) -> int:
    table = MetricsTable()
    for path in args.input:
        table.extend(MetricsTable.from_csv(Path(path).read_text()))
    text = ("Relative RMSE (estimator / GLS counterpart)\n\n" + format_table1(table, args.digits)
            + "\nDebiased estimators: coverage, length, size, power\n\n"
            + format_table2(table, args.digits))
    if args.output:
        write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _exit(converged: bool, args) -> int:
    if converged or args.allow_nonconvergence:
        return EXIT_OK
    print("warning: a solver did not converge", file=sys.stderr)
    return EXIT_NONCONVERGED


# ---------------------------------------------------------------- parser


def _alpha(s: str) -> float:
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError("alpha must lie in (0, 1)")
    return v


def _k(s: str) -> int:
    v = int(s)
    if v < 2:
        raise argparse.ArgumentTypeError("k-folds must be at least 2")
    return v


def _positive(s: str) -> int:
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _lam(s: str) -> str:
    if s != "cv":
        try:
            v = float(s)
        except ValueError:
            raise argparse.ArgumentTypeError("lambda must be 'cv' or a number") from None
        if not v > 0:
            raise argparse.ArgumentTypeError("lambda must be positive")
    return s


def _threads_default() -> int | None:
    env = os.environ.get("GLSLASSO_THREADS")
    return int(env) if env else None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="glslasso", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--alpha", type=_alpha, default=0.05, help="test and interval level")
    common.add_argument("--alpha-q", type=_alpha, default=0.05, help="AR order test level")
    common.add_argument("--k-folds", type=_k, default=10)
    common.add_argument("--variance-form", choices=VARIANCE_FORMS, default="sigma")
    common.add_argument("--sigma-u", choices=SIGMA_U_CHOICES, default="residual")
    common.add_argument("--cv-whitening", choices=("per_fold", "global"), default="per_fold")
    common.add_argument("--allow-nonconvergence", action="store_true")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--input", required=True, help="dataset CSV")
    data.add_argument("--output", required=True)
    data.add_argument("--q-max", type=_positive, default=None)
    data.add_argument("--lambda", dest="lam", type=_lam, default="cv",
                      help="'cv' or a fixed penalty for both Lasso stages")
    data.add_argument("--standardize", action=argparse.BooleanOptionalAction, default=True,
                      help="centre y and X and scale X to unit variance before fitting (default on)")
    data.add_argument("--seed", type=int, default=None, help="recorded for provenance")

    p = sub.add_parser("fit", parents=[common, data], help="GLS Lasso fit to JSON")
    p.set_defaults(func=cmd_fit)
    p = sub.add_parser("infer", parents=[common, data], help="debiased intervals to CSV")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", parents=[common], help="Monte Carlo cells to CSV")
    p.add_argument("--input", required=True, help="simulation config JSON")
    p.add_argument("--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    p.add_argument("--reps", type=_positive, default=None, help="overrides the config reps")
    p.add_argument("--threads", type=_positive, default=_threads_default())
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("report", help="format metrics CSVs as tables")
    p.add_argument("--input", required=True, nargs="+")
    p.add_argument("--output", default=None)
    p.add_argument("--digits", type=_positive, default=3)
    p.set_defaults(func=cmd_report)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError, np.linalg.LinAlgError) as exc:
        print(f"glslasso {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
