"""
Statistics computed after selection: the slope covariance of a subsample,
replicated mean squared error of the slope estimator, and coverage of
normal-theory confidence intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Optional

import numpy as np

from .distributions import NORMAL, EllipticalModel, RngStream, sample_covariates, sample_normal_errors
from .errors import NotPositiveDefinite, SingularInformation
from .linalg import CovSpec, DataMatrix, as_values, centered_gram, cholesky, solve_least_squares
from .subsamplers import FULL, select_known, select_quantile_threshold
from .theory import optimal_design, optimal_threshold, slope_cov_approx


@dataclass
class SlopeCovariance:
    """
    Conditional covariance (up to sigma^2) of the slope estimator.

    Attributes
    ----------
    matrix : ndarray, shape (d, d)
        Inverse of the centered Gram matrix of the subsample.
    standardized_det : float
        det(matrix) ** (1 / d).
    log_det : float
        log det(matrix).
    """

    matrix: np.ndarray
    standardized_det: float
    log_det: float


def slope_covariance(subsample) -> SlopeCovariance:
    """
    (X^T X - k xbar xbar^T)^{-1} of a k x d subsample.

    The determinant is taken through the Cholesky log-diagonal, since at
    d = 50 the raw determinant sits far below double-precision range.
    """
    values = as_values(subsample)
    k, d = values.shape
    if k < d + 1:
        raise SingularInformation(f"need at least d+1={d + 1} rows, got {k}")
    G = centered_gram(values)
    try:
        factor = cholesky(G)
    except NotPositiveDefinite as exc:
        raise SingularInformation("centered Gram matrix is singular") from exc
    C = factor.solve(np.eye(d))
    C = 0.5 * (C + C.T)
    log_det = -factor.logdet()
    return SlopeCovariance(C, math.exp(log_det / d), log_det)


# =============================================================================
# Replicated mean squared error
# =============================================================================


@dataclass
class MseScenario:
    """
    One cell of the MSE experiment.

    Coefficients are redrawn from N(0, I_{d+1}) in every replicate.
    ``response_free=True`` replaces the realized squared error by its
    conditional expectation sigma^2 tr(C_slope), which needs no responses.
    """

    d: int
    n: int
    k: int
    method: str = "dopt"
    V: int = 200
    seed: int = 1
    family: str = NORMAL
    nu: Optional[float] = None
    rho: float = 0.0
    sigma_eps: float = 1.0
    response_free: bool = False

    def model(self) -> EllipticalModel:
        if self.rho == 0.0:
            cov = CovSpec.identity(self.d)
        else:
            cov = CovSpec.compound_symmetry(self.d, self.rho)
        return EllipticalModel(self.family, cov, self.nu)


@dataclass
class MseResult:
    squared_errors: np.ndarray
    mse: float
    mse_per_coord: float
    scenario: MseScenario = field(repr=False)


def _replicate_squared_error(scenario: MseScenario, model: EllipticalModel, v: int, buffer) -> float:
    stream = RngStream(scenario.seed, v)
    gen = stream.generator
    d = scenario.d
    beta = gen.standard_normal(d + 1)
    X = sample_covariates(model, scenario.n, stream, out=buffer)
    sel = select_known(scenario.method, X, scenario.k, model.cov, stream)
    sub = X.values[sel.indices]
    if scenario.response_free:
        C = slope_covariance(sub).matrix
        return scenario.sigma_eps**2 * float(np.trace(C))
    # errors of unselected rows never enter the fit, so only k are drawn
    if scenario.sigma_eps > 0:
        eps = sample_normal_errors(sub.shape[0], scenario.sigma_eps, stream)
    else:
        eps = np.zeros(sub.shape[0])
    y = beta[0] + sub @ beta[1:] + eps
    beta_hat, _ = solve_least_squares(DataMatrix(sub, y))
    return float(np.sum((beta_hat[1:] - beta[1:]) ** 2))


def simulate_mse(scenario: MseScenario) -> MseResult:
    """
    Mean over replicates of ||beta_hat_slope - beta_slope||^2.

    Replicate v draws everything from ``RngStream(seed, v)``, so any single
    replicate can be regenerated on its own.
    """
    if scenario.V < 1:
        raise ValueError("V must be at least 1")
    if scenario.sigma_eps < 0:
        raise ValueError("sigma_eps must be non-negative")
    if scenario.method != FULL and scenario.k > scenario.n:
        raise ValueError(f"k={scenario.k} exceeds n={scenario.n}")
    model = scenario.model()
    buffer = np.empty((scenario.n, scenario.d))
    errs = np.array([_replicate_squared_error(scenario, model, v, buffer) for v in range(scenario.V)])
    mse = float(errs.mean())
    return MseResult(errs, mse, mse / scenario.d, scenario)


# =============================================================================
# Confidence-interval coverage
# =============================================================================


@dataclass
class CoverageScenario:
    """Threshold selection of proportion ``alpha`` under a known normal law."""

    d: int
    n: int
    alpha: float
    V: int = 1000
    seed: int = 7
    sigma_eps: float = 1.0
    rho: float = 0.0

    def cov(self) -> CovSpec:
        if self.rho == 0.0:
            return CovSpec.identity(self.d)
        return CovSpec.compound_symmetry(self.d, self.rho)


@dataclass
class CoverageResult:
    coverage: float
    per_coefficient: np.ndarray
    level: float
    replicates: int


def coverage_check(scenario: CoverageScenario, level: float = 0.95) -> CoverageResult:
    """
    Empirical coverage of beta_hat_j +- z sigma sqrt([M^{-1}]_jj / n).

    M is the theoretical information matrix of the optimal design (with
    intercept, in raw coordinates), not the observed one. Coverage is
    averaged over all d + 1 coefficients and the replicates.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")
    if scenario.sigma_eps < 0:
        raise ValueError("sigma_eps must be non-negative")
    d, n = scenario.d, scenario.n
    cov = scenario.cov()
    model = EllipticalModel.normal(cov)
    design = optimal_design(NORMAL, d, scenario.alpha, cov=cov)
    q = optimal_threshold(NORMAL, d, scenario.alpha)
    M_inv = np.linalg.inv(design.information_matrix(original=True))
    z = NormalDist().inv_cdf(0.5 * (1.0 + level))
    half = z * scenario.sigma_eps * np.sqrt(np.diag(M_inv) / n)
    hits = np.zeros(d + 1)
    buffer = np.empty((n, d))
    for v in range(scenario.V):
        stream = RngStream(scenario.seed, v)
        beta = stream.generator.standard_normal(d + 1)
        X = sample_covariates(model, n, stream, out=buffer)
        sub = X.values[select_quantile_threshold(X, cov, q, keep_distances=False).indices]
        if scenario.sigma_eps > 0:
            eps = sample_normal_errors(sub.shape[0], scenario.sigma_eps, stream)
        else:
            eps = np.zeros(sub.shape[0])
        y = beta[0] + sub @ beta[1:] + eps
        beta_hat, _ = solve_least_squares(DataMatrix(sub, y))
        # rounding slack so noiseless fits with zero-width intervals count as covered
        slack = 1e-10 * (1.0 + np.abs(beta))
        hits += np.abs(beta_hat - beta) <= half + slack
    per_coef = hits / scenario.V
    return CoverageResult(float(per_coef.mean()), per_coef, level, scenario.V)


def mse_approximation(scenario: MseScenario) -> float:
    """Per-coordinate slope variance predicted for top-k Mahalanobis selection."""
    model = scenario.model()
    approx = slope_cov_approx(
        scenario.family, scenario.d, scenario.n, scenario.k, model.cov, scenario.nu, scenario.sigma_eps
    )
    return float(np.trace(approx.matrix)) / scenario.d

