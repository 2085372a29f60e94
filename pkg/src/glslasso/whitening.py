"""AR(q) error estimation, whitening and the feasible GLS-Lasso pipeline.

Pipeline (``gls_lasso``):

1. preliminary Lasso of y on X,
2. residuals u~ = y - X b~,
3. AR order selection and OLS fit of u~ on its own lags,
4. whitening y~_t = y_t - sum_j phi_j y_{t-j} (same for every column of X),
5. Lasso of y~ on X~.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

from .crossval import CvSettings, cv_lasso, lasso_path_losses, make_blocks, pick_from_losses
from .dataset import Dataset
from .lasso import (
    DEFAULT_MAX_ITER,
    DEFAULT_TOL,
    LassoFit,
    LassoProblem,
    lambda_grid,
    lasso_fit,
)
from . import _kernels


class SingularARError(np.linalg.LinAlgError):
    """The lagged design of an AR regression is rank deficient."""


@dataclass
class ArFit:
    q: int
    phi: np.ndarray
    sigma2: float
    residuals: np.ndarray
    stderr: np.ndarray = field(repr=False)

    @property
    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(companion(self.phi)))))

    @property
    def stationary(self) -> bool:
        return self.spectral_radius < 1.0


def companion(phi: np.ndarray) -> np.ndarray:
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    q = len(phi)
    F = np.zeros((q, q))
    F[0] = phi
    F[1:, :-1] = np.eye(q - 1)
    return F


def residuals(dataset: Dataset, beta: np.ndarray) -> np.ndarray:
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (dataset.p,):
        raise ValueError(f"beta must have length {dataset.p}, got shape {beta.shape}")
    return dataset.y - dataset.X @ beta


def _lagged(pieces: list[np.ndarray], q: int) -> tuple[np.ndarray, np.ndarray]:
    """Stack (target, lag matrix) over contiguous pieces; lags never cross pieces."""
    Z, z = [], []
    for u in pieces:
        n = len(u)
        if n <= q:
            continue
        z.append(u[q:])
        Z.append(np.column_stack([u[q - j : n - j] for j in range(1, q + 1)]))
    if not z:
        raise ValueError(f"no piece is longer than the AR order {q}")
    return np.concatenate(z), np.vstack(Z)


def _ar_ols(pieces: list[np.ndarray], q: int) -> ArFit:
    target, Z = _lagged(pieces, q)
    gram = Z.T @ Z
    if not np.all(np.isfinite(gram)) or np.linalg.matrix_rank(gram) < q:
        raise SingularARError(f"lagged Gram matrix of the AR({q}) regression is singular")
    phi = np.linalg.solve(gram, Z.T @ target)
    resid = target - Z @ phi
    sigma2 = float(resid @ resid / len(target))
    dof = max(len(target) - q, 1)
    stderr = np.sqrt(resid @ resid / dof * np.diag(np.linalg.inv(gram)))
    return ArFit(q=q, phi=phi, sigma2=sigma2, residuals=resid, stderr=stderr)


def ar_ols_fit(series: np.ndarray, q: int) -> ArFit:
    """OLS regression of ``series[q:]`` on its first ``q`` lags, no intercept.

    ``sigma2`` is RSS / (T - q).
    """
    u = np.asarray(series, dtype=float)
    if q < 1:
        raise ValueError("AR order must be at least 1")
    if not len(u) > 2 * q + 2:
        raise ValueError(f"AR({q}) needs more than {2 * q + 2} observations, got {len(u)}")
    return _ar_ols([u], q)


def max_ar_order(T: int) -> int:
    return max(1, math.isqrt(T) - 1)


def select_ar_order(series: np.ndarray, alpha: float = 0.05, q_max: int | None = None) -> int:
    """General-to-specific lag selection by the t-statistic of the top lag.

    Starting from ``q_max`` (default and cap: floor(sqrt(T)) - 1), the order is
    lowered while the highest lag is insignificant. Each test runs at level
    ``alpha / q_max`` so that the whole sequence has level about ``alpha``.
    The result is never below 1.
    """
    if not 0 < alpha < 1:
        raise ValueError("alpha must lie in (0, 1)")
    u = np.asarray(series, dtype=float)
    cap = max_ar_order(len(u))
    q_top = cap if q_max is None else max(1, min(int(q_max), cap))
    crit = ndtri(1 - alpha / (2 * q_top))
    for q in range(q_top, 1, -1):
        fit = ar_ols_fit(u, q)
        if abs(fit.phi[-1] / fit.stderr[-1]) > crit:
            return q
    return 1


@dataclass(frozen=True)
class WhiteningOperator:
    """Banded (T - q) x T operator; row s holds (-phi_q, ..., -phi_1, 1) from column s."""

    phi: np.ndarray
    T: int

    def __post_init__(self):
        phi = np.atleast_1d(np.asarray(self.phi, dtype=float))
        if phi.ndim != 1 or len(phi) < 1:
            raise ValueError("phi must be a nonempty vector")
        if len(phi) >= self.T:
            raise ValueError(f"AR order {len(phi)} must be below T={self.T}")
        object.__setattr__(self, "phi", phi)

    @property
    def q(self) -> int:
        return len(self.phi)

    def row_pattern(self) -> np.ndarray:
        return np.concatenate([-self.phi[::-1], [1.0]])

    def dense(self) -> np.ndarray:
        L = np.zeros((self.T - self.q, self.T))
        band = self.row_pattern()
        for s in range(self.T - self.q):
            L[s, s : s + self.q + 1] = band
        return L

    def apply(self, a: np.ndarray) -> np.ndarray:
        """Apply along the first axis of a vector or matrix with T rows."""
        a = np.asarray(a, dtype=float)
        if a.shape[0] != self.T:
            raise ValueError(f"expected {self.T} rows, got {a.shape[0]}")
        q, T = self.q, self.T
        out = a[q:].copy()
        for j in range(1, q + 1):
            out -= self.phi[j - 1] * a[q - j : T - j]
        return out


def build_whitening(phi: np.ndarray, T: int) -> WhiteningOperator:
    return WhiteningOperator(phi=phi, T=T)


def whiten(dataset: Dataset, op: WhiteningOperator) -> Dataset:
    if dataset.T != op.T:
        raise ValueError(f"dataset has T={dataset.T}, operator expects {op.T}")
    return Dataset(op.apply(dataset.y), op.apply(dataset.X))


def _whiten_pieces(X: np.ndarray, y: np.ndarray, segments, phi: np.ndarray):
    Xs, ys = [], []
    for a, b in segments:
        if b - a > len(phi):
            op = WhiteningOperator(phi, b - a)
            Xs.append(op.apply(X[a:b]))
            ys.append(op.apply(y[a:b]))
    return np.vstack(Xs), np.concatenate(ys)


def gls_path_losses(
    dataset: Dataset,
    lam_prelim: float,
    q: int,
    phi_global: np.ndarray,
    grid: np.ndarray,
    settings: CvSettings,
) -> np.ndarray:
    """Blocked-CV losses of the GLS Lasso with the AR step redone on every fold.

    For each held-out block: preliminary Lasso on the training rows, AR(q)
    refit on their residuals (lags never straddle the held-out gap), whitening
    of each training piece and of the block, then the GLS path. The loss is
    the whitened squared prediction error on the block, summed over blocks and
    divided by the number of whitened held-out rows.
    """
    X, y = dataset.X, dataset.y
    folds = make_blocks(dataset.T, settings.k)
    G_all, c_all = X.T @ X, X.T @ y
    losses = np.zeros(len(grid))
    buf = np.empty(len(grid))
    n_val = 0
    for i in range(folds.k):
        a, b = folds.blocks[i]
        if b - a <= q:
            continue
        Xb, yb = X[a:b], y[a:b]
        n_tr = dataset.T - (b - a)
        G = (G_all - Xb.T @ Xb) / n_tr
        c = (c_all - Xb.T @ yb) / n_tr
        beta = np.zeros(dataset.p)
        grad = c.copy()
        _kernels.cd_gram(G, c, lam_prelim, beta, grad, settings.tol, settings.max_iter, -1)
        segs = folds.train_segments(i)
        u = y - X @ beta
        try:
            phi = _ar_ols([u[s:e] for s, e in segs], q).phi
        except (SingularARError, ValueError):
            phi = phi_global
        Xt, yt = _whiten_pieces(X, y, segs, phi)
        Xv, yv = _whiten_pieces(X, y, [(a, b)], phi)
        Gt = Xt.T @ Xt / len(yt)
        ct = Xt.T @ yt / len(yt)
        _kernels.path_losses(Gt, ct, Xv.T @ Xv, Xv.T @ yv, float(yv @ yv), grid, -1,
                             settings.tol, settings.max_iter, buf)
        losses += buf
        n_val += len(yv)
    return losses / n_val


@dataclass
class GlsLassoFit:
    prelim: LassoFit
    ar: ArFit
    whitened: Dataset
    whitened_fit: LassoFit
    q_selected: int
    lambda_prelim: float
    lambda_gls: float
    prelim_residuals: np.ndarray = field(default=None, repr=False)
    cv: dict = field(default_factory=dict, repr=False)

    @property
    def beta(self) -> np.ndarray:
        return self.whitened_fit.beta

    @property
    def converged(self) -> bool:
        return self.prelim.converged and self.whitened_fit.converged


def _fixed_phi_ar(u: np.ndarray, phi: np.ndarray) -> ArFit:
    op = WhiteningOperator(phi, len(u))
    e = op.apply(u)
    return ArFit(q=op.q, phi=op.phi, sigma2=float(e @ e / len(e)), residuals=e,
                 stderr=np.full(op.q, np.nan))


def gls_lasso(
    dataset: Dataset,
    lambda_prelim: float | str = "cv",
    lambda_gls: float | str = "cv",
    alpha_q: float = 0.05,
    *,
    q: int | None = None,
    q_max: int | None = None,
    phi: np.ndarray | None = None,
    settings: CvSettings = CvSettings(),
    cv_whitening: str = "per_fold",
    prelim_select: str = "min",
    standardize: bool = False,
    tol: float = DEFAULT_TOL,
    max_iter: int = DEFAULT_MAX_ITER,
) -> GlsLassoFit:
    """Feasible GLS Lasso.

    Parameters
    ----------
    lambda_prelim, lambda_gls : float or "cv"
        Penalties of the preliminary and of the whitened Lasso; ``"cv"``
        selects them by blocked k-fold cross-validation.
    alpha_q : float
        Level of the sequential AR order test.
    q : int, optional
        Fixed AR order (skips order selection).
    phi : array, optional
        Known AR coefficients; skips AR estimation entirely.
    cv_whitening : {"per_fold", "global"}
        Whether the AR fit is redone on every training split when
        cross-validating ``lambda_gls``, or the full-sample fit is reused.
    prelim_select : {"min", "max"}
        ``"max"`` picks the preliminary penalty that *maximises* the CV loss,
        a deliberately poor choice used to study sensitivity.
    """
    if cv_whitening not in ("per_fold", "global"):
        raise ValueError(f"unknown cv_whitening {cv_whitening!r}")
    if prelim_select not in ("min", "max"):
        raise ValueError(f"unknown prelim_select {prelim_select!r}")
    cv_info: dict = {}

    if isinstance(lambda_prelim, str):
        if lambda_prelim != "cv":
            raise ValueError(f"lambda_prelim must be a number or 'cv', got {lambda_prelim!r}")
        lam_p, grid_p, loss_p = cv_lasso(dataset, settings, maximize=prelim_select == "max")
        cv_info["prelim"] = (grid_p, loss_p)
    else:
        lam_p = float(lambda_prelim)
    prelim = lasso_fit(LassoProblem(dataset.X, dataset.y, lam_p, standardize), tol=tol,
                       max_iter=max_iter)
    u = residuals(dataset, prelim.beta)

    if phi is not None:
        ar = _fixed_phi_ar(u, np.atleast_1d(phi))
    else:
        q_sel = q if q is not None else select_ar_order(u, alpha_q, q_max)
        ar = ar_ols_fit(u, q_sel)
    op = build_whitening(ar.phi, dataset.T)
    wd = whiten(dataset, op)

    if isinstance(lambda_gls, str):
        if lambda_gls != "cv":
            raise ValueError(f"lambda_gls must be a number or 'cv', got {lambda_gls!r}")
        lam_max = float(np.max(np.abs(wd.X.T @ wd.y)) / wd.T)
        if lam_max <= 0:
            lam_g = 0.0
        else:
            grid = lambda_grid(lam_max, settings.n_points, settings.min_ratio)
            if cv_whitening == "global" or phi is not None:
                loss = lasso_path_losses(wd, make_blocks(wd.T, settings.k), grid, settings)
            else:
                loss = gls_path_losses(dataset, lam_p, ar.q, ar.phi, grid, settings)
            lam_g = pick_from_losses(grid, loss)
            cv_info["gls"] = (grid, loss)
    else:
        lam_g = float(lambda_gls)
    final = lasso_fit(LassoProblem(wd.X, wd.y, lam_g, standardize), tol=tol, max_iter=max_iter)

    return GlsLassoFit(
        prelim=prelim,
        ar=ar,
        whitened=wd,
        whitened_fit=final,
        q_selected=ar.q,
        lambda_prelim=lam_p,
        lambda_gls=lam_g,
        prelim_residuals=u,
        cv=cv_info,
    )
