"""Replicated experiments comparing Lasso, GLS Lasso and their debiased versions.

Every replication draws one dataset and fits all requested estimators on it.
Randomness depends only on (seed, cell, replication), so a cell is
reproducible regardless of worker count or scheduling.
"""

from __future__ import annotations

import csv
import io
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .crossval import CvSettings, cv_lasso
from .inference import debias, debias_design, resolve_sigma_u2, z_crit
from .lasso import LassoProblem, lasso_fit
from .nodewise import nodewise_fit
from .simulate import SimConfig, simulate_replication
from .whitening import gls_lasso

ESTIMATORS = ("lasso", "gls", "debiased_lasso", "debiased_gls")
DEBIASED = ("debiased_lasso", "debiased_gls")
# replications whose fits failed are dropped; beyond this share the cell is void
MAX_FAILURE_SHARE = 0.05
QUANTILES = (0.01, 0.025, 0.05, 0.5, 0.95, 0.975, 0.99)


@dataclass(frozen=True)
class McSettings:
    estimators: tuple[str, ...] = ESTIMATORS
    alpha: float = 0.05
    alpha_q: float = 0.05
    cv: CvSettings = CvSettings()
    # nodewise paths are cut short once the CV loss stops improving
    nodewise_cv: CvSettings = CvSettings(patience=10)
    variance_form: str = "sigma"
    sigma_u: str = "residual"
    cv_whitening: str = "per_fold"

    def __post_init__(self):
        bad = set(self.estimators) - set(ESTIMATORS)
        if bad or not self.estimators:
            raise ValueError(f"unknown or empty estimators: {sorted(bad)}")
        z_crit(self.alpha)


@dataclass
class ReplicationResult:
    rep: int
    beta_true: np.ndarray
    active_set: np.ndarray
    estimates: dict = field(default_factory=dict)
    se: dict = field(default_factory=dict)
    ci: dict = field(default_factory=dict)
    tstat: dict = field(default_factory=dict)
    q_hat: int | None = None
    phi_hat: np.ndarray | None = None
    converged: dict = field(default_factory=dict)
    # how many AR fits and nodewise runs were performed
    work: dict = field(default_factory=lambda: {"ar": 0, "nodewise": 0})
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None and all(self.converged.values())


def run_replication(config: SimConfig, rep: int, settings: McSettings = McSettings()) -> ReplicationResult:
    sim = simulate_replication(config, rep)
    res = ReplicationResult(rep=rep, beta_true=sim.beta_true, active_set=sim.active_set)
    try:
        _fit_all(sim, res, settings)
    except (ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
        res.error = f"{type(exc).__name__}: {exc}"
    return res


def _fit_all(sim, res: ReplicationResult, s: McSettings) -> None:
    ds = sim.dataset
    want = set(s.estimators)
    lam, _, _ = cv_lasso(ds, s.cv)
    prelim = lasso_fit(LassoProblem(ds.X, ds.y, lam))
    res.converged["lasso"] = prelim.converged
    if "lasso" in want:
        res.estimates["lasso"] = prelim.beta

    gls = None
    if want & {"gls", "debiased_gls", "debiased_lasso"}:
        gls = gls_lasso(ds, lam, "cv", s.alpha_q, settings=s.cv, cv_whitening=s.cv_whitening)
        res.work["ar"] += 1
        res.q_hat, res.phi_hat = gls.q_selected, gls.ar.phi
        res.converged["gls"] = gls.whitened_fit.converged
        if "gls" in want:
            res.estimates["gls"] = gls.beta

    # both debiased estimators share the GLS noise scale
    s2 = resolve_sigma_u2(s.sigma_u, gls) if gls is not None else None
    if "debiased_lasso" in want:
        nw = nodewise_fit(ds.X, "cv", s.nodewise_cv)
        res.work["nodewise"] += 1
        fit = debias_design(ds.X, ds.y, prelim.beta, nw, s2, s.variance_form)
        _record(res, "debiased_lasso", fit, s.alpha)
        res.converged["nodewise_lasso"] = bool(nw.converged.all())
    if "debiased_gls" in want:
        nw = nodewise_fit(gls.whitened.X, "cv", s.nodewise_cv)
        res.work["nodewise"] += 1
        fit = debias(gls, nw, s.variance_form, s2)
        _record(res, "debiased_gls", fit, s.alpha)
        res.converged["nodewise_gls"] = bool(nw.converged.all())


def _record(res: ReplicationResult, name: str, fit, alpha: float) -> None:
    se = fit.se
    half = z_crit(alpha) * se
    res.estimates[name] = fit.b
    res.se[name] = se
    res.ci[name] = (fit.b - half, fit.b + half)
    res.tstat[name] = fit.b / se


def _run_chunk(args):
    config, reps, settings = args
    return [run_replication(config, r, settings) for r in reps]


def default_parallelism() -> int:
    env = os.environ.get("GLSLASSO_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("GLSLASSO_THREADS must be a positive integer")
        return n
    return os.cpu_count() or 1


def run_cell(
    config: SimConfig,
    reps: int | None = None,
    settings: McSettings = McSettings(),
    parallelism: int | None = None,
) -> list[ReplicationResult]:
    """Run ``reps`` replications (default ``config.reps``), ordered by index."""
    reps = config.reps if reps is None else reps
    if reps < 1:
        raise ValueError("reps must be at least 1")
    workers = default_parallelism() if parallelism is None else parallelism
    if workers < 1:
        raise ValueError("parallelism must be at least 1")
    if workers == 1:
        return _run_chunk((config, range(reps), settings))
    chunks = [(config, range(i, reps, workers), settings) for i in range(workers)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        out = [r for part in pool.map(_run_chunk, chunks) for r in part]
    return sorted(out, key=lambda r: r.rep)


# ---------------------------------------------------------------- metrics


def usable(results: list[ReplicationResult]) -> list[ReplicationResult]:
    """Successful replications; raises if more than 5% failed."""
    good = [r for r in results if r.ok]
    failed = len(results) - len(good)
    if not results or failed > MAX_FAILURE_SHARE * len(results):
        raise RuntimeError(f"{failed} of {len(results)} replications failed")
    return good


def _coords(r: ReplicationResult, which: str) -> np.ndarray:
    if which == "S0":
        return r.active_set
    if which == "S0c":
        return np.setdiff1d(np.arange(len(r.beta_true)), r.active_set)
    raise ValueError(f"which must be 'S0' or 'S0c', got {which!r}")


def _pooled(results, which, fn) -> float:
    vals = []
    for r in results:
        idx = _coords(r, which)
        if idx.size:
            vals.append(fn(r, idx))
    if not vals:
        raise ValueError(f"coordinate set {which} is empty")
    return float(np.mean(np.concatenate(vals)))


def avg_cov(results: list[ReplicationResult], which: str, estimator: str = "debiased_gls") -> float:
    """Share of (replication, coordinate) pairs whose interval covers the truth."""
    def hit(r, idx):
        lo, hi = r.ci[estimator]
        b = r.beta_true[idx]
        return ((lo[idx] <= b) & (b <= hi[idx])).astype(float)
    return _pooled(results, which, hit)


def avg_length(results: list[ReplicationResult], which: str, estimator: str = "debiased_gls") -> float:
    def length(r, idx):
        lo, hi = r.ci[estimator]
        return hi[idx] - lo[idx]
    return _pooled(results, which, length)


def rmse(results: list[ReplicationResult], estimator: str) -> float:
    """Mean over replications of sqrt(||b - beta||^2 / p)."""
    if not results:
        raise ValueError("no replications")
    return float(np.mean([
        np.sqrt(np.mean((r.estimates[estimator] - r.beta_true) ** 2)) for r in results
    ]))


def rmse_ratio(results: list[ReplicationResult], num: str, den: str) -> float:
    d = rmse(results, den)
    if d == 0:
        raise ZeroDivisionError(f"RMSE of {den} is zero")
    return rmse(results, num) / d


def size_and_power(null_stats, alt_stats, alpha: float = 0.05) -> tuple[float, float]:
    """Rejection rate under the null and (size-adjusted) power.

    If the nominal test over-rejects, the cutoff becomes the empirical
    (1 - alpha) quantile of |null statistics|.
    """
    null = np.abs(np.ravel(np.asarray(null_stats, dtype=float)))
    alt = np.abs(np.ravel(np.asarray(alt_stats, dtype=float)))
    if null.size == 0 or alt.size == 0:
        raise ValueError("need nonempty null and alternative statistics")
    crit = z_crit(alpha)
    size = float(np.mean(null > crit))
    if size > alpha:
        crit = float(np.quantile(null, 1 - alpha))
    return size, float(np.mean(alt > crit))


def null_alt_statistics(results, estimator: str = "debiased_gls"):
    """Pooled t-statistics against zero on S0^c (null) and S0 (alternative)."""
    null = [r.tstat[estimator][_coords(r, "S0c")] for r in results]
    alt = [r.tstat[estimator][_coords(r, "S0")] for r in results]
    return np.concatenate(null), np.concatenate(alt)


def studentised_distribution(results, estimator: str = "debiased_gls"):
    """Pooled (b_i - beta_i) / se_i over all coordinates, plus summary quantiles."""
    z = np.concatenate([(r.estimates[estimator] - r.beta_true) / r.se[estimator] for r in results])
    if not np.all(np.isfinite(z)):
        raise FloatingPointError("non-finite studentised deviations")
    return z, {q: float(np.quantile(z, q)) for q in QUANTILES}


# ---------------------------------------------------------------- tables

CSV_FIELDS = ("p", "T", "phi", "dgp", "df", "estimator", "metric", "value")


@dataclass
class MetricsTable:
    rows: list[dict] = field(default_factory=list)

    def add(self, config: SimConfig, estimator: str, metric: str, value: float) -> None:
        self.rows.append({
            "p": config.p, "T": config.T, "phi": config.phi, "dgp": config.dgp,
            "df": "" if config.df is None else config.df,
            "estimator": estimator, "metric": metric, "value": float(value),
        })

    def extend(self, other: "MetricsTable") -> None:
        self.rows.extend(other.rows)

    def get(self, metric: str, estimator: str, **cell) -> float:
        hits = [r["value"] for r in self.rows if r["metric"] == metric
                and r["estimator"] == estimator and all(r[k] == v for k, v in cell.items())]
        if len(hits) != 1:
            raise KeyError(f"{len(hits)} rows match {metric}/{estimator}/{cell}")
        return hits[0]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_FIELDS)
        for r in self.rows:
            w.writerow([_fmt(r[k]) for k in CSV_FIELDS])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "MetricsTable":
        lines = [ln for ln in text.splitlines() if ln and not ln.startswith("#")]
        reader = csv.DictReader(lines)
        if tuple(reader.fieldnames or ()) != CSV_FIELDS:
            raise ValueError(f"metrics CSV must have columns {CSV_FIELDS}")
        rows = []
        for r in reader:
            rows.append({
                "p": int(r["p"]), "T": int(r["T"]), "phi": float(r["phi"]), "dgp": r["dgp"],
                "df": int(r["df"]) if r["df"] else "", "estimator": r["estimator"],
                "metric": r["metric"], "value": float(r["value"]),
            })
        return cls(rows)


def _fmt(v) -> str:
    return repr(v) if isinstance(v, float) else str(v)


def cell_metrics(config: SimConfig, results: list[ReplicationResult], alpha: float = 0.05) -> MetricsTable:
    good = usable(results)
    table = MetricsTable()
    table.add(config, "all", "n_used", len(good))
    table.add(config, "all", "n_failed", len(results) - len(good))
    present = [e for e in ESTIMATORS if e in good[0].estimates]
    for e in present:
        table.add(config, e, "rmse", rmse(good, e))
    for num, den in (("lasso", "gls"), ("debiased_lasso", "debiased_gls")):
        if num in present and den in present:
            table.add(config, f"{num}/{den}", "rmse_ratio", rmse_ratio(good, num, den))
    for e in DEBIASED:
        if e not in present:
            continue
        for which in ("S0", "S0c"):
            if config.s0 == 0 and which == "S0":
                continue
            table.add(config, e, f"avg_cov_{which.lower()}", avg_cov(good, which, e))
            table.add(config, e, f"avg_len_{which.lower()}", avg_length(good, which, e))
        if 0 < config.s0 < config.p:
            size, power = size_and_power(*null_alt_statistics(good, e), alpha)
            table.add(config, e, "size", size)
            table.add(config, e, "size_adjusted_power", power)
    return table


def quantile_rows(config: SimConfig, results: list[ReplicationResult]) -> list[tuple]:
    good = usable(results)
    rows = []
    for e in DEBIASED:
        if e in good[0].estimates:
            _, qs = studentised_distribution(good, e)
            rows.extend((e, q, v) for q, v in qs.items())
    return rows


def _cells(table: MetricsTable):
    seen = []
    for r in table.rows:
        key = (r["dgp"], r["df"], r["phi"], r["p"], r["T"])
        if key not in seen:
            seen.append(key)
    return seen


def format_table1(table: MetricsTable, digits: int = 3) -> str:
    """RMSE ratios relative to the GLS estimators: rows p, columns T, one panel per phi."""
    out = []
    for dgp, df, phi in sorted({k[:3] for k in _cells(table)}, key=str):
        keys = [k for k in _cells(table) if k[:3] == (dgp, df, phi)]
        ps = sorted({k[3] for k in keys})
        Ts = sorted({k[4] for k in keys})
        label = dgp if df == "" else f"{dgp} df={df}"
        for est in ("lasso/gls", "debiased_lasso/debiased_gls"):
            out.append(f"[{label}] phi={phi}  RMSE {est}")
            out.append("p \\ T".ljust(8) + "".join(f"{T:>10d}" for T in Ts))
            for p in ps:
                cells = []
                for T in Ts:
                    try:
                        v = table.get("rmse_ratio", est, p=p, T=T, phi=phi, dgp=dgp, df=df)
                        cells.append(f"{v:>10.{digits}f}")
                    except KeyError:
                        cells.append(f"{'-':>10}")
                out.append(f"{p:<8d}" + "".join(cells))
            out.append("")
    return "\n".join(out)


TABLE2_METRICS = ("avg_cov_s0", "avg_cov_s0c", "avg_len_s0", "avg_len_s0c",
                  "size", "size_adjusted_power")


def format_table2(table: MetricsTable, digits: int = 3) -> str:
    """Coverage, length, size and power of both debiased estimators per cell."""
    out = []
    for dgp, df, phi, p, T in _cells(table):
        label = dgp if df == "" else f"{dgp} df={df}"
        out.append(f"[{label}] p={p} T={T} phi={phi}")
        out.append("metric".ljust(22) + "".join(f"{e:>16}" for e in DEBIASED))
        for m in TABLE2_METRICS:
            cells = []
            for e in DEBIASED:
                try:
                    v = table.get(m, e, p=p, T=T, phi=phi, dgp=dgp, df=df)
                    cells.append(f"{v:>16.{digits}f}")
                except KeyError:
                    cells.append(f"{'-':>16}")
            out.append(m.ljust(22) + "".join(cells))
        out.append("")
    return "\n".join(out)


# ---------------------------------------------------------------- penalty sensitivity


def lambda_sensitivity(config: SimConfig, rep: int, settings: McSettings = McSettings()) -> dict:
    """Losses of GLS Lasso under the CV-optimal and the CV-worst preliminary penalty.

    Returns estimation loss ||b - beta||_1 and prediction loss
    ||X(b - beta)||^2 / T for "gls_opt", "gls_sub" and the plain "lasso".
    """
    sim = simulate_replication(config, rep)
    ds, beta = sim.dataset, sim.beta_true
    fits = {
        "gls_opt": gls_lasso(ds, "cv", "cv", settings.alpha_q, settings=settings.cv,
                             cv_whitening=settings.cv_whitening),
        "gls_sub": gls_lasso(ds, "cv", "cv", settings.alpha_q, settings=settings.cv,
                             cv_whitening=settings.cv_whitening, prelim_select="max"),
    }
    est = {k: f.beta for k, f in fits.items()}
    est["lasso"] = fits["gls_opt"].prelim.beta
    out = {}
    for k, b in est.items():
        d = b - beta
        out[k] = {"estimation": float(np.abs(d).sum()),
                  "prediction": float(np.sum((ds.X @ d) ** 2) / ds.T)}
    return out
