"""Blocked k-fold cross-validation over contiguous time blocks.

Blocks are never shuffled: block 1 holds the earliest observations. The
generic :func:`cv_loss` accepts any fitter; :func:`lasso_path_losses` is the
fast path used internally, which works entirely on Gram matrices.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from . import _kernels
from .dataset import Dataset
from .lasso import lambda_grid

Fitter = Callable[[Dataset, float], np.ndarray]


@dataclass(frozen=True)
class CvSettings:
    """Knobs shared by every cross-validated penalty in a pipeline."""

    k: int = 10
    n_points: int = 100
    min_ratio: float = 1e-3
    # looser than the final fit; only the argmin over the grid matters
    tol: float = 1e-5
    max_iter: int = 10_000
    # nodewise paths stop after this many consecutive grid points above the
    # running minimum; 0 scans the whole grid
    patience: int = 0


@dataclass(frozen=True)
class BlockFolds:
    """``k`` contiguous blocks covering 0..T-1 as half-open (start, stop) pairs."""

    T: int
    blocks: tuple[tuple[int, int], ...]

    @property
    def k(self) -> int:
        return len(self.blocks)

    def block(self, i: int) -> np.ndarray:
        start, stop = self.blocks[i]
        return np.arange(start, stop)

    def train(self, i: int) -> np.ndarray:
        start, stop = self.blocks[i]
        return np.concatenate([np.arange(0, start), np.arange(stop, self.T)])

    def train_segments(self, i: int) -> list[tuple[int, int]]:
        """Contiguous pieces of the training set (at most two)."""
        start, stop = self.blocks[i]
        return [seg for seg in ((0, start), (stop, self.T)) if seg[1] > seg[0]]


def make_blocks(T: int, k: int) -> BlockFolds:
    """Split 0..T-1 into ``k`` contiguous blocks; earlier blocks take the remainder."""
    if not 2 <= k <= T:
        raise ValueError(f"need 2 <= k <= T, got k={k}, T={T}")
    base, extra = divmod(T, k)
    blocks, start = [], 0
    for i in range(k):
        stop = start + base + (1 if i < extra else 0)
        blocks.append((start, stop))
        start = stop
    return BlockFolds(T=T, blocks=tuple(blocks))


def cv_loss(lam: float, dataset: Dataset, folds: BlockFolds, fitter: Fitter) -> float:
    """Held-out squared prediction error summed over blocks, divided by T."""
    if folds.T != dataset.T:
        raise ValueError("folds do not match the dataset length")
    total = 0.0
    for i in range(folds.k):
        train, test = folds.train(i), folds.block(i)
        if len(train) < 2:
            raise ValueError(f"block {i} leaves fewer than 2 training rows")
        beta = fitter(dataset.rows(train), lam)
        r = dataset.y[test] - dataset.X[test] @ beta
        total += float(r @ r)
    return total / dataset.T


def pick_from_losses(grid: np.ndarray, losses: np.ndarray, maximize: bool = False) -> float:
    """Grid point with the smallest (or largest) loss; ties go to the larger penalty."""
    grid = np.asarray(grid, dtype=float)
    losses = np.asarray(losses, dtype=float)
    finite = np.isfinite(losses)
    if not finite.any():
        raise ValueError("all cross-validation losses are non-finite")
    vals = np.where(finite, losses, np.inf if not maximize else -np.inf)
    best = vals.max() if maximize else vals.min()
    return float(grid[vals == best].max())


def select_lambda(
    dataset: Dataset, grid, folds: BlockFolds, fitter: Fitter, maximize: bool = False
) -> float:
    """Arg-min of :func:`cv_loss` over ``grid`` (arg-max with ``maximize``)."""
    grid = np.atleast_1d(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValueError("empty penalty grid")
    losses = np.array([cv_loss(lam, dataset, folds, fitter) for lam in grid])
    return pick_from_losses(grid, losses, maximize)


def fold_moments(X: np.ndarray, y: np.ndarray | None, folds: BlockFolds):
    """Per-block unnormalised moments X_b'X_b (and X_b'y_b, y_b'y_b)."""
    VX = np.empty((folds.k, X.shape[1], X.shape[1]))
    Vy = np.empty((folds.k, X.shape[1]))
    vyy = np.empty(folds.k)
    for i, (a, b) in enumerate(folds.blocks):
        Xb = X[a:b]
        VX[i] = Xb.T @ Xb
        if y is not None:
            Vy[i] = Xb.T @ y[a:b]
            vyy[i] = y[a:b] @ y[a:b]
    return VX, Vy, vyy


def lasso_path_losses(
    dataset: Dataset, folds: BlockFolds, grid: np.ndarray, settings: CvSettings = CvSettings()
) -> np.ndarray:
    """Blocked-CV loss of the plain Lasso at every grid point (decreasing grid)."""
    X, y = dataset.X, dataset.y
    grid = np.asarray(grid, dtype=float)
    if np.any(np.diff(grid) > 0):
        raise ValueError("grid must be non-increasing for warm starts")
    VX, Vy, vyy = fold_moments(X, y, folds)
    G_all, c_all = VX.sum(axis=0), Vy.sum(axis=0)
    losses = np.zeros(len(grid))
    buf = np.empty(len(grid))
    for i in range(folds.k):
        n_tr = folds.T - (folds.blocks[i][1] - folds.blocks[i][0])
        G = (G_all - VX[i]) / n_tr
        c = (c_all - Vy[i]) / n_tr
        _kernels.path_losses(G, c, VX[i], Vy[i], vyy[i], grid, -1,
                             settings.tol, settings.max_iter, buf)
        losses += buf
    return losses / folds.T


def cv_lasso(
    dataset: Dataset, settings: CvSettings = CvSettings(), maximize: bool = False
) -> tuple[float, np.ndarray, np.ndarray]:
    """Blocked-CV penalty for the plain Lasso on ``dataset``.

    Returns (chosen penalty, grid, losses).
    """
    lam_max = float(np.max(np.abs(dataset.X.T @ dataset.y)) / dataset.T)
    if lam_max <= 0:
        return 0.0, np.zeros(1), np.zeros(1)
    grid = lambda_grid(lam_max, settings.n_points, settings.min_ratio)
    folds = make_blocks(dataset.T, settings.k)
    losses = lasso_path_losses(dataset, folds, grid, settings)
    return pick_from_losses(grid, losses, maximize), grid, losses
