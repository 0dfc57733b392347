"""Wavelet estimation of r = f**2 in the model Y = f(X) U + V."""
from .errors import (
    CatalogError,
    ConfigError,
    DegenerateInputError,
    DomainError,
    FilterInvalidError,
    MultwaveError,
    ShapeError,
    UnsupportedOrderError,
)
from .estimator import (
    CoefficientSet,
    Estimate,
    EstimatorConfig,
    alpha_hat_direct,
    beta_hat_direct,
    correction_v,
    correction_w,
    direct_coefficients,
    estimate_coefficients,
    evaluate_estimate,
    linear_estimate,
    nonlinear_estimate,
    pyramid_coefficients,
    rho_n,
    t_n,
    universal_threshold,
)
from .harness import (
    MonteCarloResult,
    RateStudyConfig,
    RateStudyResult,
    ReplicationRecord,
    integrated_squared_error,
    mse,
    rate_study,
    run_monte_carlo,
    run_replication,
)
from .model import DesignSample, ModelConfig, TestFunction, generate_sample, mix_seed, test_function
from .selection import (
    SelectionResult,
    cv_score_linear,
    oracle_select,
    select_jstar,
    half_sample_candidates,
    select_threshold,
    twofold_split,
)
from .wavelet import (
    CoefficientPyramid,
    ScalingTable,
    WaveletFilter,
    cascade_scaling_table,
    dwt_periodic,
    eval_basis_periodized,
    idwt_periodic,
    make_daubechies_filter,
)

__version__ = "0.1.0"
