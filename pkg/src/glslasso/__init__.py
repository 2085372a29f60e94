"""Feasible GLS Lasso and debiased inference under AR(q) errors."""

from __future__ import annotations

__version__ = "0.1.0"

from .crossval import BlockFolds, CvSettings, cv_lasso, cv_loss, make_blocks, select_lambda
from .dataset import Dataset
from .inference import (
    DebiasedFit,
    InferenceSummary,
    confidence_intervals,
    debias,
    debias_design,
    post_lasso_ols,
    sigma_u_hat2,
    sigma_xu_hat,
    t_statistics,
)
from .lasso import LassoFit, LassoProblem, kkt_residual, lambda_grid, lambda_max, lasso_fit, soft_threshold
from .montecarlo import McSettings, MetricsTable, ReplicationResult, run_cell
from .nodewise import NodewiseResult, kkt_bound_gap, nodewise_fit
from .simulate import SimConfig, SimulatedDataset, simulate_ar_errors, simulate_dataset
from .whitening import (
    ArFit,
    GlsLassoFit,
    WhiteningOperator,
    ar_ols_fit,
    build_whitening,
    gls_lasso,
    residuals,
    select_ar_order,
    whiten,
)

__all__ = [
    "ArFit", "BlockFolds", "CvSettings", "Dataset", "DebiasedFit", "GlsLassoFit",
    "InferenceSummary", "LassoFit", "LassoProblem", "McSettings", "MetricsTable",
    "NodewiseResult", "ReplicationResult", "SimConfig", "SimulatedDataset",
    "WhiteningOperator", "ar_ols_fit", "build_whitening", "confidence_intervals",
    "cv_lasso", "cv_loss", "debias", "debias_design", "gls_lasso", "kkt_bound_gap",
    "kkt_residual", "lambda_grid", "lambda_max", "lasso_fit", "make_blocks",
    "nodewise_fit", "post_lasso_ols", "residuals", "run_cell", "select_ar_order",
    "select_lambda", "sigma_u_hat2", "sigma_xu_hat", "simulate_ar_errors",
    "simulate_dataset", "soft_threshold", "t_statistics", "whiten",
]
