"""D-optimal subsampling for multiple linear regression."""

from .distributions import EllipticalModel, RngStream, sample_covariates, sample_normal_errors
from .errors import (
    ConfigError,
    CsvParseError,
    EmptyInput,
    KLargerThanN,
    KTooSmall,
    MissingSeries,
    NonConvergence,
    NotPositiveDefinite,
    OptsubError,
    SingularInformation,
)
from .estimation import (
    CoverageScenario,
    MseScenario,
    SlopeCovariance,
    coverage_check,
    mse_approximation,
    simulate_mse,
    slope_covariance,
)
from .harness import (
    BenchConfig,
    ExperimentConfig,
    ExperimentRecord,
    bench_complexity,
    emit_plot_data,
    run_experiment,
    summarize,
)
from .linalg import (
    CovSpec,
    DataMatrix,
    mahalanobis_all,
    read_cov_csv,
    read_data_csv,
    simplified_distance_all,
    solve_least_squares,
    streaming_moments,
)
from .special import chi2_cdf, chi2_quantile, f_cdf, f_quantile
from .subsamplers import (
    SelectorConfig,
    SubsampleResult,
    leverage_scores,
    select,
    select_iboss,
    select_quantile_threshold,
    select_top_k_leverage,
    select_top_k_mahalanobis,
    select_top_k_simplified,
    select_uniform,
)
from .theory import (
    DesignSpec,
    optimal_design,
    optimal_threshold,
    second_moment,
    second_moment_normal,
    slope_cov_approx,
    uniform_efficiency,
    verify_optimality_sensitivity,
)

__version__ = "0.1.0"
