"""Ridge-regularized estimation of the expected conditional covariance
between two outcomes in the proportional (p ~ c n) regime."""

from .avar import (
    LimitParams,
    OptimizeResult,
    SpectralTable,
    VarianceBreakdown,
    bilinear_variance_limit,
    limiting_variance,
    optimize_lambda,
    var_ay,
    variance_curve,
)
from .debias import (
    DebiasPlan,
    EstimatorKind,
    GConstants,
    MonteCarloConstants,
    QUADRATURE,
    asymptotic_bias,
    compute_constants,
    debiased_estimate,
    raw_estimate,
)
from .dgp import Dataset, ModelParams, SplitLayout, generate, make_coefficients, split
from .engine import ExactSampler, EngineDraws, estimator_draws
from .harness import (
    CoeffSpec,
    ExperimentConfig,
    ExperimentRecord,
    LambdaGrid,
    SummaryRow,
    lemma_e_probe,
    pred_mse_curve,
    run_experiment,
    summarize_records,
    validate_bootstrap,
)
from .mp import (
    MpLaw,
    SpectralIntegrand,
    identity_checks,
    mc_spectral_oracle,
    mp_integral,
    stieltjes,
)
from .pboot import (
    BootConstants,
    BootstrapResult,
    bootstrap_se_for_data,
    bootstrap_variance,
    bootstrap_variance_engine,
    compute_boot_constants,
    transform_coefficients,
    transform_scalars,
)
from .ridge import (
    GramSolver,
    RidgeFit,
    fit,
    prediction_mse_theory,
    prediction_optimal_lambda,
)
from .seeding import fingerprint, substream

__version__ = "0.1.0"

__all__ = [
    "BootConstants",
    "BootstrapResult",
    "CoeffSpec",
    "DebiasPlan",
    "Dataset",
    "EngineDraws",
    "EstimatorKind",
    "ExactSampler",
    "ExperimentConfig",
    "ExperimentRecord",
    "GConstants",
    "GramSolver",
    "LambdaGrid",
    "LimitParams",
    "ModelParams",
    "MonteCarloConstants",
    "MpLaw",
    "OptimizeResult",
    "QUADRATURE",
    "RidgeFit",
    "SpectralIntegrand",
    "SpectralTable",
    "SplitLayout",
    "SummaryRow",
    "VarianceBreakdown",
    "asymptotic_bias",
    "bilinear_variance_limit",
    "bootstrap_se_for_data",
    "bootstrap_variance",
    "bootstrap_variance_engine",
    "compute_boot_constants",
    "compute_constants",
    "debiased_estimate",
    "estimator_draws",
    "fingerprint",
    "fit",
    "generate",
    "identity_checks",
    "lemma_e_probe",
    "limiting_variance",
    "make_coefficients",
    "mc_spectral_oracle",
    "mp_integral",
    "optimize_lambda",
    "pred_mse_curve",
    "prediction_mse_theory",
    "prediction_optimal_lambda",
    "raw_estimate",
    "run_experiment",
    "split",
    "stieltjes",
    "substream",
    "summarize_records",
    "transform_coefficients",
    "transform_scalars",
    "validate_bootstrap",
    "var_ay",
    "variance_curve",
]
