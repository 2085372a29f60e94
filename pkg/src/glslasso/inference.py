"""Debiased (GLS) Lasso, variance estimates, intervals and tests.

With whitened data (y~, X~) of n rows, a Lasso fit b_hat and a nodewise
inverse Theta, the one-step corrected estimator is

    b = b_hat + Theta X~'(y~ - X~ b_hat) / n.

Its coordinates are approximately Gaussian with variance
``s2 * (Theta S Theta')_ii / n`` where ``S`` is either the sample covariance
X~'X~/n (``variance_form="sigma"``) or the rank-one score outer product
(``variance_form="sigma_xu"``).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import linalg, stats
from scipy.special import ndtr, ndtri

from .dataset import Dataset
from .nodewise import NodewiseResult
from .whitening import ArFit, GlsLassoFit, companion

VARIANCE_FORMS = ("sigma", "sigma_xu")
SIGMA_U_CHOICES = ("residual", "innovation", "ar", "sample")


class NonStationaryError(ValueError):
    pass


class CollinearityError(np.linalg.LinAlgError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(f"selected columns are collinear; dependent columns: {self.columns}")


def normal_quantile(prob: float) -> float:
    return float(ndtri(prob))


def z_crit(alpha: float) -> float:
    if not 0 < alpha < 1:
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
    return normal_quantile(1 - alpha / 2)


def sigma_xu_hat(whitened_design: np.ndarray, whitened_residuals: np.ndarray) -> np.ndarray:
    """Rank-one matrix v v' / n with v = X~' r."""
    X = np.asarray(whitened_design, dtype=float)
    r = np.asarray(whitened_residuals, dtype=float)
    if X.shape[0] != r.shape[0]:
        raise ValueError("dimension mismatch between design and residuals")
    v = X.T @ r
    return np.outer(v, v) / X.shape[0]


def sigma_u_hat2(ar: ArFit) -> float:
    """Stationary variance of the fitted AR(q) process.

    Solves P = F P F' + sigma2 e1 e1' for the companion matrix F and returns
    P[0, 0]; for q = 1 this is sigma2 / (1 - phi^2).
    """
    if not ar.stationary:
        raise NonStationaryError(
            f"fitted AR coefficients are not stationary (spectral radius "
            f"{ar.spectral_radius:.4f}); use the sample variance of the residuals instead"
        )
    F = companion(ar.phi)
    Q = np.zeros_like(F)
    Q[0, 0] = ar.sigma2
    P = linalg.solve_discrete_lyapunov(F, Q)
    return float(P[0, 0])


def debias_arrays(X: np.ndarray, y: np.ndarray, beta_hat: np.ndarray, theta: np.ndarray):
    """Return (b, correction, residuals) for the one-step debiasing step."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    if y.shape != (n,) or np.shape(beta_hat) != (p,) or np.shape(theta) != (p, p):
        raise ValueError("dimension mismatch in debiasing inputs")
    r = y - X @ beta_hat
    correction = theta @ (X.T @ r) / n
    return beta_hat + correction, correction, r


@dataclass
class DebiasedFit:
    b: np.ndarray
    var_diag: np.ndarray
    sigma_u2: float
    sigma_xu: np.ndarray
    theta: NodewiseResult
    beta_hat: np.ndarray
    correction: np.ndarray
    residuals: np.ndarray
    n: int
    variance_form: str = "sigma"

    @property
    def se(self) -> np.ndarray:
        return np.sqrt(self.var_diag)

    def decompose(self, design: np.ndarray, response: np.ndarray, beta: np.ndarray):
        """Split sqrt(n)(b - beta) into (noise, delta) at a reference ``beta``.

        noise = Theta X'(y - X beta) / sqrt(n) and
        delta = -sqrt(n) (Theta S - I)(b_hat - beta) with S = X'X/n, so that
        sqrt(n)(b - beta) = noise + delta holds exactly for any ``beta``.
        """
        X = np.asarray(design, dtype=float)
        n = X.shape[0]
        T = self.theta.theta
        noise = T @ (X.T @ (response - X @ beta)) / np.sqrt(n)
        S = X.T @ X / n
        delta = -np.sqrt(n) * (T @ S - np.eye(len(beta))) @ (self.beta_hat - beta)
        return noise, delta


def resolve_sigma_u2(choice: str | float, gls: GlsLassoFit) -> float:
    """Noise variance used in the standard errors.

    ``"residual"`` is the mean square of the whitened GLS residuals,
    ``"innovation"`` the AR innovation variance, ``"ar"`` the stationary
    variance implied by the AR fit and ``"sample"`` the variance of the
    preliminary residuals. A number is used as given.
    """
    if not isinstance(choice, str):
        return float(choice)
    if choice == "residual":
        r = gls.whitened.y - gls.whitened.X @ gls.beta
        return float(r @ r / len(r))
    if choice == "innovation":
        return float(gls.ar.sigma2)
    if choice == "ar":
        return sigma_u_hat2(gls.ar)
    if choice == "sample":
        u = np.asarray(gls.prelim_residuals, dtype=float)
        return float(np.mean((u - u.mean()) ** 2))
    raise ValueError(f"unknown sigma_u choice {choice!r}; expected one of {SIGMA_U_CHOICES}")


def debias_design(
    design: np.ndarray,
    response: np.ndarray,
    beta_hat: np.ndarray,
    nw: NodewiseResult,
    sigma_u2: float,
    variance_form: str = "sigma",
) -> DebiasedFit:
    """Debias ``beta_hat`` on an arbitrary (design, response) pair."""
    if variance_form not in VARIANCE_FORMS:
        raise ValueError(f"unknown variance_form {variance_form!r}")
    X = np.asarray(design, dtype=float)
    n = X.shape[0]
    b, corr, r = debias_arrays(X, response, np.asarray(beta_hat, dtype=float), nw.theta)
    Th = nw.theta
    sxu = sigma_xu_hat(X, r)
    if variance_form == "sigma_xu":
        sandwich = np.einsum("ij,jk,ik->i", Th, sxu, Th)
    else:
        TS = Th @ (X.T @ X / n)
        sandwich = np.einsum("ij,ij->i", TS, Th)
    var = sigma_u2 * sandwich / n
    if not np.all(np.isfinite(b)):
        raise FloatingPointError("debiased coefficients are not finite")
    return DebiasedFit(
        b=b,
        var_diag=var,
        sigma_u2=float(sigma_u2),
        sigma_xu=sxu,
        theta=nw,
        beta_hat=np.asarray(beta_hat, dtype=float).copy(),
        correction=corr,
        residuals=r,
        n=n,
        variance_form=variance_form,
    )


def debias(
    gls: GlsLassoFit,
    nw: NodewiseResult,
    variance_form: str = "sigma",
    sigma_u: str | float = "residual",
) -> DebiasedFit:
    """Debiased GLS Lasso on the whitened data held by ``gls``.

    ``nw`` must come from the same whitened design.
    """
    wd = gls.whitened
    if nw.theta.shape != (wd.p, wd.p):
        raise ValueError("nodewise result does not match the whitened design")
    s2 = resolve_sigma_u2(sigma_u, gls)
    return debias_design(wd.X, wd.y, gls.beta, nw, s2, variance_form)


@dataclass
class InferenceSummary:
    ci_lower: np.ndarray
    ci_upper: np.ndarray
    tstat: np.ndarray
    pvalue: np.ndarray
    alpha: float

    def reject(self) -> np.ndarray:
        return self.pvalue < self.alpha


def _pvalues(stat: np.ndarray, reference: str, df: int | None) -> np.ndarray:
    if reference == "normal":
        return 2 * ndtr(-np.abs(stat))
    if reference == "t":
        if df is None or df < 1:
            raise ValueError("the t reference needs positive degrees of freedom")
        return 2 * stats.t.sf(np.abs(stat), df)
    raise ValueError(f"unknown reference {reference!r}")


def _crit(alpha: float, reference: str, df: int | None) -> float:
    if reference == "t":
        if not 0 < alpha < 1:
            raise ValueError(f"alpha must lie in (0, 1), got {alpha}")
        return float(stats.t.ppf(1 - alpha / 2, df))
    return z_crit(alpha)


def t_statistics(
    fit: DebiasedFit,
    null_values: np.ndarray | float = 0.0,
    alpha: float = 0.05,
    reference: str = "normal",
    df: int | None = None,
) -> InferenceSummary:
    """Studentised statistics (b_i - null_i) / se_i with intervals at level 1 - alpha.

    ``reference="t"`` uses a Student-t with ``df`` degrees of freedom
    (default n - 1) for p-values and the interval multiplier.
    """
    null = np.broadcast_to(np.asarray(null_values, dtype=float), fit.b.shape)
    if not np.all(np.isfinite(null)):
        raise ValueError("null values must be finite")
    if np.any(fit.var_diag <= 0):
        i = int(np.flatnonzero(fit.var_diag <= 0)[0])
        raise ValueError(f"variance of coefficient {i} is not positive")
    if reference == "t" and df is None:
        df = fit.n - 1
    crit = _crit(alpha, reference, df)
    se = fit.se
    stat = (fit.b - null) / se
    return InferenceSummary(
        ci_lower=fit.b - crit * se,
        ci_upper=fit.b + crit * se,
        tstat=stat,
        pvalue=_pvalues(stat, reference, df),
        alpha=alpha,
    )


def confidence_intervals(fit: DebiasedFit, alpha: float = 0.05) -> InferenceSummary:
    """Symmetric intervals b_i -/+ z_{alpha/2} se_i; tests are against zero."""
    z_crit(alpha)
    return t_statistics(fit, 0.0, alpha)


def post_lasso_ols(whitened: Dataset, active_set) -> np.ndarray:
    """OLS on the selected columns, zeros elsewhere.

    An empty selection returns the zero vector with a warning.
    """
    idx = np.unique(np.asarray(active_set, dtype=int).ravel())
    out = np.zeros(whitened.p)
    if idx.size == 0:
        warnings.warn("empty active set; returning the zero vector", stacklevel=2)
        return out
    if idx.min() < 0 or idx.max() >= whitened.p:
        raise IndexError("active set index out of range")
    if idx.size >= whitened.T:
        raise ValueError(f"active set of size {idx.size} needs more than {whitened.T} rows")
    Xs = whitened.X[:, idx]
    _, R, piv = linalg.qr(Xs, mode="economic", pivoting=True)
    diag = np.abs(np.diag(R))
    rank = int(np.sum(diag > diag[0] * max(Xs.shape) * np.finfo(float).eps)) if diag[0] > 0 else 0
    if rank < idx.size:
        raise CollinearityError(sorted(idx[piv[rank:]].tolist()))
    coef, *_ = linalg.lstsq(Xs, whitened.y)
    out[idx] = coef
    return out
