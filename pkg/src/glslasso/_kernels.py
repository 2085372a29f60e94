"""Compiled coordinate-descent kernels.

All kernels work on the normalised Gram form of the Lasso,

    0.5 * b'Gb - c'b + lam * |b|_1,   G = X'X / n,  c = X'y / n,

which equals (1/2n)||y - Xb||^2 + lam |b|_1 up to the constant y'y / 2n.
``grad`` always holds ``c - G b`` for the current ``b``.
"""

from __future__ import annotations

import numpy as np
from numba import njit


@njit(cache=True)
def soft(z, gamma):
    if z > gamma:
        return z - gamma
    if z < -gamma:
        return z + gamma
    return 0.0


@njit(cache=True)
def cd_gram(G, c, lam, beta, grad, tol, max_iter, exclude):
    """Cyclic coordinate descent in place. Returns (sweeps, converged).

    ``exclude`` is a coordinate pinned at zero (-1 for none); this is how
    nodewise regressions drop their own column without copying G.
    """
    p = G.shape[0]
    for sweep in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            if j == exclude:
                continue
            gjj = G[j, j]
            if gjj <= 0.0:
                continue
            old = beta[j]
            new = soft(grad[j] + gjj * old, lam) / gjj
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for k in range(p):
                    grad[k] -= G[k, j] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        if max_delta <= tol:
            return sweep + 1, True
    return max_iter, False


@njit(cache=True)
def cd_resid(X, y, lam, beta, resid, col_sq, tol, max_iter):
    """Residual-updating coordinate descent for wide problems (no Gram).

    ``resid`` holds y - X b, ``col_sq`` the values ||x_j||^2 / n.
    """
    n, p = X.shape
    for sweep in range(max_iter):
        max_delta = 0.0
        for j in range(p):
            cj = col_sq[j]
            if cj <= 0.0:
                continue
            old = beta[j]
            acc = 0.0
            for t in range(n):
                acc += X[t, j] * resid[t]
            new = soft(acc / n + cj * old, lam) / cj
            delta = new - old
            if delta != 0.0:
                beta[j] = new
                for t in range(n):
                    resid[t] -= X[t, j] * delta
                ad = abs(delta)
                if ad > max_delta:
                    max_delta = ad
        if max_delta <= tol:
            return sweep + 1, True
    return max_iter, False


@njit(cache=True)
def _quad_loss(V, v, vyy, beta, exclude):
    # vyy - 2 b'v + b'Vb over the support of b
    p = beta.shape[0]
    nz = np.empty(p, dtype=np.int64)
    m = 0
    for j in range(p):
        if beta[j] != 0.0 and j != exclude:
            nz[m] = j
            m += 1
    out = vyy
    for a in range(m):
        ja = nz[a]
        ba = beta[ja]
        out -= 2.0 * ba * v[ja]
        acc = 0.0
        for b in range(m):
            acc += V[ja, nz[b]] * beta[nz[b]]
        out += ba * acc
    return out


@njit(cache=True)
def path_losses(G, c, V, v, vyy, grid, exclude, tol, max_iter, out):
    """Warm-started path over a decreasing grid; writes held-out SSE per point.

    (V, v, vyy) are the *unnormalised* held-out moments X_b'X_b, X_b'y_b, y_b'y_b.
    """
    p = G.shape[0]
    beta = np.zeros(p)
    grad = c.copy()
    for g in range(grid.shape[0]):
        cd_gram(G, c, grid[g], beta, grad, tol, max_iter, exclude)
        out[g] = _quad_loss(V, v, vyy, beta, exclude)


@njit(cache=True)
def nodewise_path_losses(G_train, V_val, grids, tol, max_iter, patience):
    """Blocked-CV losses for every nodewise regression and every grid point.

    G_train[k] is the normalised Gram of the data outside block k, V_val[k] the
    unnormalised Gram of block k. Returns an array (p, n_grid) of summed SSE.
    All folds of one column advance together along the grid; with
    ``patience > 0`` a column's path stops once its summed loss has exceeded
    the running minimum at ``patience`` consecutive points, and the remaining
    entries are left at +inf.
    """
    k_folds, p, _ = G_train.shape
    m = grids.shape[1]
    losses = np.full((p, m), np.inf)
    betas = np.zeros((k_folds, p))
    grads = np.zeros((k_folds, p))
    for i in range(p):
        for k in range(k_folds):
            betas[k, :] = 0.0
            grads[k, :] = G_train[k][:, i]
        best = np.inf
        worse = 0
        for g in range(m):
            lam = grids[i, g]
            total = 0.0
            for k in range(k_folds):
                G = G_train[k]
                V = V_val[k]
                cd_gram(G, G[:, i], lam, betas[k], grads[k], tol, max_iter, i)
                total += _quad_loss(V, V[:, i], V[i, i], betas[k], i)
            losses[i, g] = total
            if total < best:
                best = total
                worse = 0
            elif total > best:
                worse += 1
                if patience > 0 and worse >= patience:
                    break
    return losses


@njit(cache=True)
def nodewise_fits(G, lambdas, tol, max_iter):
    """Nodewise Lasso of every column on the others (full data).

    Returns (gamma, sweeps, converged) with gamma[i, i] = 0.
    """
    p = G.shape[0]
    gamma = np.zeros((p, p))
    sweeps = np.zeros(p, dtype=np.int64)
    conv = np.zeros(p, dtype=np.bool_)
    for i in range(p):
        c = G[:, i].copy()
        beta = np.zeros(p)
        grad = c.copy()
        s, ok = cd_gram(G, c, lambdas[i], beta, grad, tol, max_iter, i)
        beta[i] = 0.0
        gamma[i] = beta
        sweeps[i] = s
        conv[i] = ok
    return gamma, sweeps, conv
