"""Conditional Karhunen-Loeve models, diffusion UQ and active learning."""

from ._core import (
    AcquisitionMethod,
    ConditionalKLModel,
    DiffusionProblem,
    KernelHyperparams,
    KLBasis,
    LengthScaleConvention,
    ObservationSet,
    Provenance,
    SparseGridRule,
    StructuredGrid,
    acquire_method1,
    acquire_method2,
    collocation_moments,
    condition_then_truncate,
    condition_xi,
    cov_matrix,
    field_l2_norm,
    fit_hyperparameters,
    gauss_hermite,
    gp_posterior,
    implied_moment_field,
    kernel_eval,
    log_marginal_likelihood,
    model_from_basis,
    monte_carlo_moments,
    run_campaign,
    run_command,
    smolyak_grid,
    solve_diffusion,
    solve_separable_se_eigenproblem,
    solve_covariance_eigenproblem,
    truncate_by_variance,
    truncate_then_condition,
)

__all__ = [name for name in dir() if not name.startswith("_")]
