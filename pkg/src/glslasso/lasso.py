"""Lasso by cyclic coordinate descent.

Every Lasso in the package (preliminary, GLS and nodewise) minimises

    (1 / 2n) ||y - X b||^2 + lam ||b||_1

so that penalty grids are comparable across sample sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import _kernels

DEFAULT_TOL = 1e-7
DEFAULT_MAX_ITER = 100_000
# beyond this many columns the Gram matrix is not formed
GRAM_MAX_P = 1500


@dataclass(frozen=True)
class LassoProblem:
    """Design, response and penalty of one Lasso problem.

    With ``standardize`` the penalty applies to columns rescaled to unit
    second moment; fitted coefficients are still reported on the original scale.
    """

    design: np.ndarray
    response: np.ndarray
    lam: float
    standardize: bool = False

    def __post_init__(self):
        X = np.asarray(self.design, dtype=float)
        y = np.asarray(self.response, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2 or y.ndim != 1:
            raise ValueError("design must be 2-D and response 1-D")
        if X.shape[0] != y.shape[0]:
            raise ValueError(
                f"dimension mismatch: design has {X.shape[0]} rows, response {y.shape[0]}"
            )
        if X.shape[0] < 2 or X.shape[1] < 1:
            raise ValueError("need T >= 2 and p >= 1")
        if not np.all(np.isfinite(X)) or not np.all(np.isfinite(y)):
            raise ValueError("design and response must be finite")
        if not self.lam >= 0:
            raise ValueError(f"lam must be nonnegative, got {self.lam}")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)

    @property
    def T(self) -> int:
        return self.design.shape[0]

    @property
    def p(self) -> int:
        return self.design.shape[1]

    def column_scale(self) -> np.ndarray:
        """Root mean square of each column (1 where standardisation is off)."""
        if not self.standardize:
            return np.ones(self.p)
        s = np.sqrt(np.mean(self.design**2, axis=0))
        s[s == 0] = 1.0
        return s


@dataclass
class LassoFit:
    beta: np.ndarray
    lam: float
    objective: float
    iterations: int
    converged: bool
    active_set: np.ndarray
    history: np.ndarray | None = field(default=None, repr=False)


def soft_threshold(z: float, gamma: float) -> float:
    """sign(z) * max(|z| - gamma, 0)."""
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    return float(np.sign(z) * max(abs(z) - gamma, 0.0))


def objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, lam: float) -> float:
    r = y - X @ beta
    return float(r @ r / (2 * len(y)) + lam * np.abs(beta).sum())


def lambda_max(problem: LassoProblem) -> float:
    """Smallest penalty at which the all-zero vector is optimal."""
    Xs = problem.design / problem.column_scale()
    return float(np.max(np.abs(Xs.T @ problem.response)) / problem.T)


def lambda_grid(lam_max: float, n_points: int = 100, min_ratio: float = 1e-3) -> np.ndarray:
    """Log-spaced decreasing grid from ``lam_max`` to ``lam_max * min_ratio``."""
    if not lam_max > 0:
        raise ValueError("lam_max must be positive")
    if n_points < 2:
        raise ValueError("n_points must be at least 2")
    if not 0 < min_ratio < 1:
        raise ValueError("min_ratio must lie in (0, 1)")
    return np.geomspace(lam_max, lam_max * min_ratio, n_points)


def lasso_fit(
    problem: LassoProblem,
    warm_start: np.ndarray | None = None,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
    record_objective: bool = False,
) -> LassoFit:
    """Solve the Lasso by cyclic coordinate descent (order 1..p).

    Convergence means the largest absolute coefficient change over a full
    sweep is at most ``tol`` (on the standardised scale when standardising).
    Non-convergence is reported in the result, never raised.

    With ``record_objective`` the objective after every sweep is stored in
    ``history``; this runs sweep by sweep and is meant for diagnostics.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    if max_iter < 1:
        raise ValueError("max_iter must be at least 1")
    X, y, lam = problem.design, problem.response, float(problem.lam)
    n, p = X.shape
    scale = problem.column_scale()
    Xs = X / scale

    beta = np.zeros(p)
    if warm_start is not None:
        warm_start = np.asarray(warm_start, dtype=float)
        if warm_start.shape != (p,):
            raise ValueError(f"warm_start must have length {p}")
        beta = warm_start * scale

    history = None
    if p <= GRAM_MAX_P:
        G = Xs.T @ Xs / n
        c = Xs.T @ y / n
        grad = c - G @ beta
        if record_objective:
            hist = []
            sweeps, converged = 0, False
            while sweeps < max_iter and not converged:
                _, converged = _kernels.cd_gram(G, c, lam, beta, grad, tol, 1, -1)
                sweeps += 1
                hist.append(objective(Xs, y, beta, lam))
            history = np.asarray(hist)
        else:
            sweeps, converged = _kernels.cd_gram(G, c, lam, beta, grad, tol, max_iter, -1)
    else:
        Xf = np.asfortranarray(Xs)
        resid = y - Xf @ beta
        col_sq = np.mean(Xf**2, axis=0)
        sweeps, converged = _kernels.cd_resid(Xf, y, lam, beta, resid, col_sq, tol, max_iter)

    beta_orig = beta / scale
    return LassoFit(
        beta=beta_orig,
        lam=lam,
        objective=objective(Xs, y, beta, lam),
        iterations=int(sweeps),
        converged=bool(converged),
        active_set=np.flatnonzero(beta_orig),
        history=history,
    )


def kkt_residual(fit: LassoFit, problem: LassoProblem) -> float:
    """Sup-norm violation of the Lasso stationarity conditions at ``fit.beta``.

    Active coordinates contribute |x_i'r/T - lam sign(b_i)|, inactive ones
    max(0, |x_i'r/T| - lam); zero means exact optimality.
    """
    beta = np.asarray(fit.beta, dtype=float)
    if beta.shape != (problem.p,):
        raise ValueError(f"beta must have length {problem.p}")
    scale = problem.column_scale()
    Xs = problem.design / scale
    b = beta * scale
    corr = Xs.T @ (problem.response - Xs @ b) / problem.T
    lam = problem.lam
    active = b != 0
    viol = np.where(
        active,
        np.abs(corr - lam * np.sign(b)),
        np.maximum(0.0, np.abs(corr) - lam),
    )
    return float(viol.max())
