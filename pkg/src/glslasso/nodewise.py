"""Approximate inverse of the (whitened) sample covariance via nodewise Lasso.

Row i of the estimate comes from regressing column i on all other columns:

    gamma_i = argmin (1/2n)||x_i - X_{-i} g||^2 + lam_i ||g||_1
    tau2_i  = (1/n)||x_i - X_{-i} gamma_i||^2 + lam_i ||gamma_i||_1
    Theta_i = (1, -gamma_i) / tau2_i      (entries placed back in column order)

The KKT conditions of each regression give ||Theta_i Sigma - e_i||_inf
<= lam_i / tau2_i with Sigma = X'X/n, which :func:`kkt_bound_gap` checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .crossval import CvSettings, make_blocks, pick_from_losses
from .lasso import lambda_grid

# final nodewise fits are solved much tighter than the CV paths so the KKT
# bound above holds to ~1e-10
FINAL_TOL = 1e-11
FINAL_MAX_ITER = 200_000


@dataclass
class NodewiseResult:
    gamma: np.ndarray  # (p, p) with zero diagonal; row i is gamma_i in column order
    tau2: np.ndarray
    lambdas: np.ndarray
    theta: np.ndarray
    converged: np.ndarray

    def gamma_row(self, i: int) -> np.ndarray:
        """gamma_i as a length p-1 vector (column i removed)."""
        return np.delete(self.gamma[i], i)


def tau_sq(column: np.ndarray, rest: np.ndarray, gamma: np.ndarray, lam: float) -> float:
    r = column - rest @ gamma
    return float(r @ r / len(column) + lam * np.abs(gamma).sum())


def theta_row(gamma_i: np.ndarray, tau2_i: float, i: int, p: int) -> np.ndarray:
    """Row i of Theta from the length p-1 vector gamma_i."""
    if not tau2_i > 0:
        raise ValueError(f"tau2 must be positive, got {tau2_i} for row {i}")
    gamma_i = np.asarray(gamma_i, dtype=float)
    if gamma_i.shape != (p - 1,):
        raise ValueError(f"gamma_i must have length {p - 1}")
    row = np.insert(-gamma_i, i, 1.0)
    return row / tau2_i


def nodewise_lambda_max(G: np.ndarray) -> np.ndarray:
    off = np.abs(G - np.diag(np.diag(G)))
    return off.max(axis=1)


def nodewise_cv_lambdas(
    design: np.ndarray, settings: CvSettings = CvSettings()
) -> np.ndarray:
    """Per-column penalties chosen by blocked CV (ties go to the larger penalty)."""
    n, p = design.shape
    folds = make_blocks(n, settings.k)
    G_all = design.T @ design
    lam_max = nodewise_lambda_max(G_all / n)
    lam_max[lam_max <= 0] = 1.0
    grids = np.stack([lambda_grid(m, settings.n_points, settings.min_ratio) for m in lam_max])
    V = np.empty((folds.k, p, p))
    Gtr = np.empty((folds.k, p, p))
    for k, (a, b) in enumerate(folds.blocks):
        V[k] = design[a:b].T @ design[a:b]
        Gtr[k] = (G_all - V[k]) / (n - (b - a))
    losses = _kernels.nodewise_path_losses(
        Gtr, V, grids, settings.tol, settings.max_iter, settings.patience
    )
    out = np.empty(p)
    for i in range(p):
        out[i] = pick_from_losses(grids[i], losses[i])
    return out


def nodewise_fit(
    design: np.ndarray,
    lambdas: np.ndarray | float | str = "cv",
    settings: CvSettings = CvSettings(),
) -> NodewiseResult:
    """Run all p nodewise regressions and assemble Theta.

    ``lambdas`` is a vector of per-column penalties, a single shared penalty,
    or ``"cv"`` for per-column blocked cross-validation with ``settings``.
    """
    X = np.asarray(design, dtype=float)
    n, p = X.shape
    if n < 10 or p < 2:
        raise ValueError(f"nodewise regression needs n >= 10 and p >= 2, got {X.shape}")
    zero = np.flatnonzero(~np.any(X != 0, axis=0))
    if zero.size:
        raise ValueError(f"design column {int(zero[0])} is identically zero")

    if isinstance(lambdas, str):
        if lambdas != "cv":
            raise ValueError(f"unknown lambdas option {lambdas!r}")
        lam = nodewise_cv_lambdas(X, settings)
    else:
        lam = np.broadcast_to(np.asarray(lambdas, dtype=float), (p,)).copy()
        if np.any(lam < 0):
            raise ValueError("nodewise penalties must be nonnegative")

    G = X.T @ X / n
    gamma, _, conv = _kernels.nodewise_fits(G, lam, FINAL_TOL, FINAL_MAX_ITER)
    resid = X - X @ gamma.T
    tau2 = np.mean(resid**2, axis=0) + lam * np.abs(gamma).sum(axis=1)
    bad = np.flatnonzero(tau2 <= 0)
    if bad.size:
        raise ValueError(f"nonpositive tau2 for column {int(bad[0])}")
    C = -gamma
    np.fill_diagonal(C, 1.0)
    theta = C / tau2[:, None]
    return NodewiseResult(gamma=gamma, tau2=tau2, lambdas=lam, theta=theta, converged=conv)


def kkt_bound_gap(result: NodewiseResult, design: np.ndarray) -> np.ndarray:
    """Per row: ||Theta_i Sigma - e_i||_inf - lam_i / tau2_i (nonpositive when the bound holds)."""
    X = np.asarray(design, dtype=float)
    Sigma = X.T @ X / X.shape[0]
    dev = np.abs(result.theta @ Sigma - np.eye(X.shape[1])).max(axis=1)
    return dev - result.lambdas / result.tau2
