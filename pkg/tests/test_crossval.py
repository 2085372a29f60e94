from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from glslasso.crossval import (
    CvSettings,
    cv_lasso,
    cv_loss,
    lasso_path_losses,
    make_blocks,
    pick_from_losses,
    select_lambda,
)
from glslasso.dataset import Dataset
from glslasso.lasso import LassoProblem, lasso_fit
from oracles import manual_two_fold_loss


def _data(seed, T=60, p=5):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, p))
    return Dataset(X[:, 0] - 0.5 * X[:, 1] + rng.standard_normal(T), X)


def _ridge(ds, lam):
    return np.linalg.solve(ds.X.T @ ds.X + lam * np.eye(ds.p), ds.X.T @ ds.y)


def test_block_examples():
    assert make_blocks(10, 2).blocks == ((0, 5), (5, 10))
    assert make_blocks(10, 3).blocks == ((0, 4), (4, 7), (7, 10))
    with pytest.raises(ValueError):
        make_blocks(5, 6)
    with pytest.raises(ValueError):
        make_blocks(5, 1)


@given(st.integers(2, 300), st.integers(2, 20))
def test_blocks_partition_time(T, k):
    if k > T:
        return
    f = make_blocks(T, k)
    idx = np.concatenate([f.block(i) for i in range(k)])
    np.testing.assert_array_equal(idx, np.arange(T))
    sizes = [len(f.block(i)) for i in range(k)]
    assert max(sizes) - min(sizes) <= 1
    assert sizes == sorted(sizes, reverse=True)
    for i in range(k):
        assert len(np.intersect1d(f.train(i), f.block(i))) == 0
        assert len(f.train(i)) + len(f.block(i)) == T


def test_cv_loss_trivial_fitters():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((40, 3))
    b = np.array([1.0, 0.0, -2.0])
    ds = Dataset(X @ b, X)
    folds = make_blocks(40, 4)
    assert cv_loss(0.1, ds, folds, lambda d, lam: b) == 0.0
    y = rng.standard_normal(40)
    zero = cv_loss(0.1, Dataset(y, X), folds, lambda d, lam: np.zeros(3))
    assert zero == pytest.approx(y @ y / 40)


def test_cv_loss_matches_manual_two_fold():
    for T in (30, 31):
        ds = _data(1, T=T)
        loss = cv_loss(2.0, ds, make_blocks(T, 2), _ridge)
        manual = manual_two_fold_loss(ds.X, ds.y, lambda X, y, lam: _ridge(Dataset(y, X), lam), 2.0)
        assert loss == pytest.approx(manual, rel=1e-12)


def test_cv_loss_rejects_mismatched_folds():
    with pytest.raises(ValueError):
        cv_loss(0.1, _data(2, T=30), make_blocks(20, 2), _ridge)


def test_select_lambda_cases():
    ds = _data(3)
    folds = make_blocks(60, 5)
    assert select_lambda(ds, [0.7], folds, _ridge) == 0.7
    with pytest.raises(ValueError):
        select_lambda(ds, [], folds, _ridge)
    grid = np.array([1.0, 0.5, 0.25, 0.125])
    # loss rises with the penalty: the smallest penalty wins
    assert pick_from_losses(grid, grid.copy()) == 0.125
    assert pick_from_losses(grid, grid.copy(), maximize=True) == 1.0
    assert pick_from_losses(grid, np.array([3.0, 1.0, 1.0, 2.0])) == 0.5
    assert pick_from_losses(grid, np.array([np.nan, 2.0, 1.0, np.nan])) == 0.25
    with pytest.raises(ValueError):
        pick_from_losses(grid, np.full(4, np.nan))


def test_select_lambda_ignores_grid_order():
    ds = _data(4)
    folds = make_blocks(60, 6)
    grid = np.geomspace(0.01, 10, 9)
    a = select_lambda(ds, grid, folds, _ridge)
    b = select_lambda(ds, grid[::-1], folds, _ridge)
    c = select_lambda(ds, np.random.default_rng(0).permutation(grid), folds, _ridge)
    assert a == b == c


def test_path_losses_match_generic_loop():
    ds = _data(5, T=80, p=8)
    folds = make_blocks(80, 5)
    grid = np.geomspace(0.5, 0.005, 12)
    tight = CvSettings(tol=1e-12, max_iter=100_000)
    fast = lasso_path_losses(ds, folds, grid, tight)

    def fitter(d, lam):
        return lasso_fit(LassoProblem(d.X, d.y, lam), tol=1e-12).beta

    slow = [cv_loss(lam, ds, folds, fitter) for lam in grid]
    np.testing.assert_allclose(fast, slow, rtol=1e-7)


def test_cv_lasso_output_shapes():
    lam, grid, losses = cv_lasso(_data(6, T=100, p=10), CvSettings(n_points=20))
    assert grid.shape == losses.shape == (20,)
    assert lam in grid
    assert lam == grid[np.argmin(losses)]
    lam_sub, _, _ = cv_lasso(_data(6, T=100, p=10), CvSettings(n_points=20), maximize=True)
    assert lam_sub == grid[np.argmax(losses)]
