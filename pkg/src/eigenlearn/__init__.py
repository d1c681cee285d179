"""Bayesian learning of linear-operator eigenvalues in sequence space.

Conjugate posterior estimation from noisy random-design data, closed-form
convergence-rate predictions, and a seeded Monte Carlo harness that fits
empirical rates against them.
"""

__version__ = "0.1.0"

from .spectra import (
    ModelConfig,
    SpectralSequence,
    TruthOperator,
    cross_basis_variance,
    matern_spectrum,
    overlap_matrix,
    prior_variances_diagonal,
    prior_variances_matrix,
    sobolev_norm,
    truth_eigenvalues,
)
from .sampling import (
    Dataset,
    DesignMatrix,
    draw_design,
    gen_diagonal_dataset,
    gen_diagonal_suffstats,
    gen_matrix_dataset,
    make_rng,
    project_design,
)
from .posterior import (
    DiagonalPosterior,
    MatrixFit,
    diag_posterior,
    diag_posterior_colored,
    galerkin_truth_matrix,
    matrix_posterior,
    matrix_posterior_row,
    sample_posterior,
)
from .metrics import (
    ErrorWeights,
    conditional_risk_closed_form,
    excess_risk,
    generalization_gap_emp,
    relative_error_diag,
    relative_error_matrix,
    weighted_sq_error,
)
from .theory import (
    J_N,
    RatePrediction,
    colored_rate_exponent,
    contraction_rate,
    excess_risk_exponents,
    gap_rate_exponent,
    rho_N,
    upper_rate_exponent,
)
from .harness import (
    ExperimentConfig,
    RateReport,
    TruncationPolicy,
    fit_rate,
    run_experiment,
    truncation_level,
)
