"""Reference computations that share no code with the package."""

from __future__ import annotations

import itertools

import numpy as np


def lasso_by_sign_patterns(X: np.ndarray, y: np.ndarray, lam: float) -> np.ndarray:
    """Exact Lasso solution by enumerating all 3^p sign patterns.

    For a pattern s the active block solves (X_A'X_A/n) b_A = X_A'y/n - lam s_A;
    the pattern is admissible when sign(b_A) = s_A and every inactive
    correlation satisfies |x_j'r/n| <= lam. Among admissible candidates the one
    with the smallest objective is returned. Only practical for p <= 8.
    """
    n, p = X.shape
    best, best_obj = None, np.inf
    for signs in itertools.product((-1, 0, 1), repeat=p):
        s = np.array(signs, dtype=float)
        A = np.flatnonzero(s)
        b = np.zeros(p)
        if A.size:
            XA = X[:, A]
            try:
                bA = np.linalg.solve(XA.T @ XA / n, XA.T @ y / n - lam * s[A])
            except np.linalg.LinAlgError:
                continue
            if np.any(np.sign(bA) != s[A]):
                continue
            b[A] = bA
        r = y - X @ b
        corr = X.T @ r / n
        inactive = np.setdiff1d(np.arange(p), A)
        if inactive.size and np.any(np.abs(corr[inactive]) > lam * (1 + 1e-10)):
            continue
        obj = r @ r / (2 * n) + lam * np.abs(b).sum()
        if obj < best_obj:
            best, best_obj = b, obj
    if best is None:
        raise RuntimeError("no admissible sign pattern")
    return best


def dense_whitening(phi, T: int) -> np.ndarray:
    """(T-q) x T matrix written entry by entry from its band definition."""
    phi = list(np.atleast_1d(phi))
    q = len(phi)
    L = np.zeros((T - q, T))
    for s in range(T - q):
        for j in range(1, q + 1):
            L[s, s + q - j] = -phi[j - 1]
        L[s, s + q] = 1.0
    return L


def ar_ols_normal_equations(u: np.ndarray, q: int):
    """phi and RSS/(T-q) from explicit normal equations with loops."""
    T = len(u)
    Z = np.array([[u[t - j] for j in range(1, q + 1)] for t in range(q, T)])
    z = np.array([u[t] for t in range(q, T)])
    phi = np.linalg.solve(Z.T @ Z, Z.T @ z)
    e = z - Z @ phi
    return phi, e @ e / (T - q)


def ar_variance_by_simulation(phi, sigma2: float, n: int, seed: int) -> float:
    rng = np.random.default_rng(seed)
    phi = np.atleast_1d(phi)
    q = len(phi)
    e = rng.normal(scale=np.sqrt(sigma2), size=n + 1000)
    u = np.zeros_like(e)
    for t in range(q, len(e)):
        u[t] = e[t] + sum(phi[j] * u[t - 1 - j] for j in range(q))
    return float(np.var(u[1000:]))


def manual_two_fold_loss(X, y, fitter, lam):
    """Blocked CV loss for k=2 written out split by split."""
    T = len(y)
    h = (T + 1) // 2
    first = fitter(X[h:], y[h:], lam)
    second = fitter(X[:h], y[:h], lam)
    sse = np.sum((y[:h] - X[:h] @ first) ** 2) + np.sum((y[h:] - X[h:] @ second) ** 2)
    return sse / T
