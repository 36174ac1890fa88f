"""Nested covariance estimators: spectral decay models, grid GMRFs and shrinkage baselines."""

from ._nestcov import (
    NestcovError,
    cond_reg,
    cond_reg_cv,
    decay_diagonal,
    fisher_trace,
    fit_decay2,
    fit_decay3,
    fit_gmrf,
    gaussian_sample,
    laplace_eigenvalues,
    ledoit_wolf,
    nested_decay_covariances,
    precision_matrix,
    run_experiment,
    sample_covariance,
)

__all__ = [
    "NestcovError",
    "cond_reg",
    "cond_reg_cv",
    "decay_diagonal",
    "fisher_trace",
    "fit_decay2",
    "fit_decay3",
    "fit_gmrf",
    "gaussian_sample",
    "laplace_eigenvalues",
    "ledoit_wolf",
    "nested_decay_covariances",
    "precision_matrix",
    "run_experiment",
    "sample_covariance",
]
