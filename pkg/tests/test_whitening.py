from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from glslasso.crossval import CvSettings
from glslasso.dataset import Dataset
from glslasso.lasso import LassoProblem, lasso_fit
from glslasso.simulate import SimConfig, simulate_ar_errors, simulate_replication
from glslasso.whitening import (
    SingularARError,
    ar_ols_fit,
    build_whitening,
    gls_lasso,
    max_ar_order,
    residuals,
    select_ar_order,
    whiten,
)
from oracles import ar_ols_normal_equations, dense_whitening


def _ar(phi, T, seed, burn=200):
    rng = np.random.default_rng(seed)
    phi = np.atleast_1d(phi)
    e = rng.standard_normal(T + burn)
    u = np.zeros_like(e)
    for t in range(len(phi), len(e)):
        u[t] = e[t] + phi @ u[t - len(phi) : t][::-1]
    return u[burn:]


def test_residuals_cases():
    rng = np.random.default_rng(0)
    X = rng.standard_normal((12, 3))
    y = rng.standard_normal(12)
    ds = Dataset(y, X)
    np.testing.assert_array_equal(residuals(ds, np.zeros(3)), y)
    b = np.array([1.0, -2.0, 0.5])
    assert np.all(residuals(Dataset(X @ b, X), b) == 0)
    manual = np.array([y[t] - sum(X[t, j] * b[j] for j in range(3)) for t in range(12)])
    np.testing.assert_allclose(residuals(ds, b), manual, atol=1e-12)
    with pytest.raises(ValueError):
        residuals(ds, np.zeros(2))


def test_ar_fit_noiseless_ar1():
    u = 0.5 ** np.arange(10)
    fit = ar_ols_fit(u, 1)
    assert fit.phi[0] == pytest.approx(0.5, abs=1e-12)
    assert fit.sigma2 == pytest.approx(0.0, abs=1e-20)
    assert fit.residuals.shape == (9,)


def test_ar_fit_hand_formula():
    fit = ar_ols_fit(np.arange(1.0, 7.0), 1)
    assert fit.phi[0] == pytest.approx(70 / 55, abs=1e-12)


def test_ar_fit_matches_normal_equations():
    u = _ar([0.4, 0.2], 300, 1)
    fit = ar_ols_fit(u, 3)
    phi, s2 = ar_ols_normal_equations(u, 3)
    np.testing.assert_allclose(fit.phi, phi, atol=1e-12)
    assert fit.sigma2 == pytest.approx(s2, rel=1e-12)


def test_ar_fit_large_sample():
    fit = ar_ols_fit(_ar(0.8, 5000, 2), 1)
    assert abs(fit.phi[0] - 0.8) < 0.03
    assert fit.stationary


def test_ar_fit_recovers_noiseless_ar2_exactly():
    u = np.zeros(40)
    u[:2] = [1.0, -0.3]
    for t in range(2, 40):
        u[t] = 0.6 * u[t - 1] - 0.25 * u[t - 2]
    np.testing.assert_allclose(ar_ols_fit(u, 2).phi, [0.6, -0.25], atol=1e-10)


def test_ar_fit_errors():
    with pytest.raises(SingularARError):
        ar_ols_fit(np.zeros(20), 1)
    with pytest.raises(SingularARError):
        ar_ols_fit(np.ones(20), 2)
    with pytest.raises(ValueError):
        ar_ols_fit(np.arange(6.0), 2)
    with pytest.raises(ValueError):
        ar_ols_fit(np.arange(20.0), 0)


def test_nonstationary_fit_is_flagged_not_rejected():
    fit = ar_ols_fit(1.05 ** np.arange(30), 1)
    assert fit.phi[0] == pytest.approx(1.05)
    assert not fit.stationary


def test_select_order_bounds():
    for T in (30, 100, 400):
        q = select_ar_order(_ar(0.5, T, T), 0.05)
        assert 1 <= q <= max_ar_order(T) < np.sqrt(T)
    with pytest.raises(ValueError):
        select_ar_order(_ar(0.5, 100, 0), 1.5)


def test_select_order_recovers_ar2():
    hits = sum(select_ar_order(_ar([0.5, 0.3], 500, s), 0.05) == 2 for s in range(100))
    assert hits >= 80


def test_select_order_white_noise():
    u = np.random.default_rng(4).standard_normal(400)
    q = select_ar_order(u, 0.05)
    assert q == 1
    assert abs(ar_ols_fit(u, q).phi[0]) < 0.1


def test_whitening_band_pattern():
    L = build_whitening([0.0], 4).dense()
    np.testing.assert_array_equal(L, np.eye(4)[1:])
    L = build_whitening([0.5], 4).dense()
    np.testing.assert_array_equal(L, [[-0.5, 1, 0, 0], [0, -0.5, 1, 0], [0, 0, -0.5, 1]])
    op = build_whitening([0.3, 0.2], 6)
    row = op.dense()[0]
    np.testing.assert_array_equal(row[:3], [-0.2, -0.3, 1.0])
    assert np.all(row[3:] == 0)
    with pytest.raises(ValueError):
        build_whitening([0.1, 0.2, 0.3], 3)


def test_whiten_identity_and_difference():
    rng = np.random.default_rng(5)
    X = rng.standard_normal((9, 2))
    y = rng.standard_normal(9)
    ds = Dataset(y, X)
    out = whiten(ds, build_whitening([0.0, 0.0], 9))
    np.testing.assert_array_equal(out.X, X[2:])
    np.testing.assert_array_equal(out.y, y[2:])
    out = whiten(ds, build_whitening([1.0], 9))
    np.testing.assert_allclose(out.X, np.diff(X, axis=0), atol=1e-15)
    with pytest.raises(ValueError):
        whiten(ds, build_whitening([0.5], 8))


def test_whiten_matches_dense_seeded():
    rng = np.random.default_rng(6)
    X = rng.standard_normal((10, 3))
    y = rng.standard_normal(10)
    out = whiten(Dataset(y, X), build_whitening([0.4, 0.2], 10))
    L = dense_whitening([0.4, 0.2], 10)
    np.testing.assert_allclose(out.X, L @ X, atol=1e-12)
    np.testing.assert_allclose(out.y, L @ y, atol=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 40), st.integers(0, 2**32 - 1))
def test_whiten_equals_dense_property(q, extra, seed):
    T = q + 2 + extra
    rng = np.random.default_rng(seed)
    phi = rng.uniform(-1, 1, q)
    op = build_whitening(phi, T)
    np.testing.assert_allclose(op.dense(), dense_whitening(phi, T), atol=0)
    X = rng.standard_normal((T, 2))
    np.testing.assert_allclose(op.apply(X), dense_whitening(phi, T) @ X, atol=1e-12)
    assert np.count_nonzero(op.dense()[:, :] != 0, axis=1).max() <= q + 1


def _sim(T, p, phi, seed, s0=3, sigma=1.0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((T, p))
    beta = np.zeros(p)
    beta[:s0] = rng.uniform(0.5, 1.0, s0)
    u = sigma * simulate_ar_errors(phi, T, "normal", 100, rng)
    return Dataset(X @ beta + u, X), beta


def test_gls_white_noise_close_to_lasso():
    ds = simulate_replication(SimConfig(T=500, p=100, phi=0.0, seed=500), 0).dataset
    fit = gls_lasso(ds)
    assert fit.whitened.T == ds.T - fit.q_selected
    assert np.abs(fit.beta - fit.prelim.beta).sum() < 0.05


def test_gls_zero_phi_reproduces_trailing_lasso():
    ds, _ = _sim(120, 20, 0.5, 8)
    fit = gls_lasso(ds, 0.05, 0.07, phi=np.zeros(2))
    ref = lasso_fit(LassoProblem(ds.X[2:], ds.y[2:], 0.07))
    np.testing.assert_array_equal(fit.beta, ref.beta)
    assert fit.q_selected == 2


def test_gls_known_phi_noiseless_support():
    rng = np.random.default_rng(9)
    X = rng.standard_normal((200, 30))
    beta = np.zeros(30)
    beta[[3, 11, 20]] = [0.8, 0.5, 0.3]
    fit = gls_lasso(Dataset(X @ beta, X), 0.01, 0.01, phi=np.array([0.7]))
    np.testing.assert_array_equal(fit.whitened_fit.active_set, [3, 11, 20])


def test_gls_records_intermediates():
    ds, _ = _sim(200, 30, 0.7, 10)
    fit = gls_lasso(ds, settings=CvSettings(n_points=30))
    assert fit.prelim.beta.shape == fit.whitened_fit.beta.shape == (30,)
    assert fit.whitened.X.shape == (200 - fit.q_selected, 30)
    assert fit.lambda_prelim > 0 and fit.lambda_gls > 0
    assert fit.prelim_residuals.shape == (200,)
    assert set(fit.cv) == {"prelim", "gls"}


def test_gls_global_whitening_flag():
    ds, _ = _sim(200, 30, 0.7, 11)
    a = gls_lasso(ds, settings=CvSettings(n_points=30), cv_whitening="global")
    b = gls_lasso(ds, settings=CvSettings(n_points=30), cv_whitening="per_fold")
    assert a.ar.phi == pytest.approx(b.ar.phi)
    with pytest.raises(ValueError):
        gls_lasso(ds, cv_whitening="nope")
    with pytest.raises(ValueError):
        gls_lasso(ds, lambda_prelim="auto")


def test_gls_gain_under_strong_autocorrelation():
    ratios = []
    for s in range(20):
        ds, beta = _sim(200, 100, 0.9, 100 + s)
        fit = gls_lasso(ds)
        ratios.append(np.linalg.norm(fit.prelim.beta - beta) / np.linalg.norm(fit.beta - beta))
    assert np.median(ratios) > 1.5


def test_phi_hat_consistency_rate():
    errs = {}
    for T in (200, 800):
        errs[T] = np.median([abs(ar_ols_fit(_ar(0.6, T, 1000 * T + s), 1).phi[0] - 0.6)
                             for s in range(200)])
    assert errs[200] / errs[800] == pytest.approx(2.0, rel=0.3)
