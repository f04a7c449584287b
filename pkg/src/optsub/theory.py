"""
Closed-form quantities of D-optimal subsampling designs for elliptical
covariates.

All thresholds live on the squared Mahalanobis scale in standardized
coordinates (location 0, dispersion I). The optimal design of proportion
``alpha`` keeps exactly the mass outside the (1 - alpha) concentration
ellipsoid, so it is described by the cut-off ``q`` and the per-coordinate
second moment ``m2`` of the retained mass; its information matrix is
``diag(alpha, m2 * I_d)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .distributions import FAMILIES, NORMAL, STUDENT_T, RngStream, as_stream
from .errors import KLargerThanN
from .linalg import CovSpec, cholesky
from .special import chi2_density, chi2_quantile, chi2_sf, f_quantile

DEFAULT_MC_N = 1_000_000
DEFAULT_MC_SEED = 20_240_917
_MC_CHUNK = 250_000


def _check_family(family, nu):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if family == STUDENT_T and (nu is None or not nu > 2):
        raise ValueError(f"t family needs nu > 2, got {nu}")


def _check_alpha(alpha):
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"alpha must lie in (0, 1), got {alpha}")


def marginal_variance(family: str, nu: Optional[float] = None) -> float:
    """Variance of one standardized coordinate: 1 (normal) or nu/(nu-2) (t)."""
    _check_family(family, nu)
    return 1.0 if family == NORMAL else nu / (nu - 2.0)


def optimal_threshold(family: str, d: int, alpha: float, nu: Optional[float] = None) -> float:
    """
    Cut-off q on the squared standardized radius with P(R^2 >= q) = alpha.

    Normal covariates give the chi-square quantile; for the t family
    R^2 / d is F(d, nu) distributed, so q = d * F_{d, nu, 1 - alpha}.
    """
    _check_family(family, nu)
    _check_alpha(alpha)
    if family == NORMAL:
        return chi2_quantile(1.0 - alpha, d)
    return d * f_quantile(1.0 - alpha, d, nu)


def second_moment_normal(d: int, alpha: float) -> float:
    """m2 = alpha + (2/d) q f_{chi2_d}(q) with q the (1 - alpha) chi-square quantile."""
    _check_alpha(alpha)
    q = chi2_quantile(1.0 - alpha, d)
    return alpha + 2.0 / d * q * chi2_density(q, d)


def _draw_radius_squared(gen, family, d, nu, size):
    r2 = gen.chisquare(d, size=size)
    if family == STUDENT_T:
        r2 /= gen.chisquare(nu, size=size) / nu
    return r2


def second_moment_mc(
    family: str,
    d: int,
    alpha: float,
    nu: Optional[float] = None,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
    return_stderr: bool = False,
):
    """
    Monte-Carlo estimate of (1/d) E[R^2 1{R^2 >= q}] for the standardized family.

    ``alpha = 1`` means no truncation. With ``return_stderr`` a pair
    ``(estimate, standard_error)`` is returned.
    """
    _check_family(family, nu)
    if not (0.0 < alpha <= 1.0):
        raise ValueError(f"alpha must lie in (0, 1], got {alpha}")
    if mc_n < 10_000:
        raise ValueError(f"mc_n must be at least 1e4, got {mc_n}")
    gen = as_stream(rng if rng is not None else RngStream(DEFAULT_MC_SEED)).generator
    q = 0.0 if alpha == 1.0 else optimal_threshold(family, d, alpha, nu)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_n:
        m = min(_MC_CHUNK, mc_n - done)
        r2 = _draw_radius_squared(gen, family, d, nu, m)
        kept = np.where(r2 >= q, r2, 0.0) / d
        total += kept.sum()
        total_sq += np.dot(kept, kept)
        done += m
    mean = total / mc_n
    if not return_stderr:
        return mean
    var = max(total_sq / mc_n - mean * mean, 0.0)
    return mean, math.sqrt(var / (mc_n - 1))


def second_moment(
    family: str,
    d: int,
    alpha: float,
    nu: Optional[float] = None,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
) -> float:
    """m2 of the optimal design: closed form for normal, Monte Carlo for t."""
    if family == NORMAL:
        return second_moment_normal(d, alpha)
    return second_moment_mc(family, d, alpha, nu, mc_n, rng)


def uniform_efficiency(
    family: str,
    d: int,
    alpha: float,
    nu: Optional[float] = None,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
) -> float:
    """
    D_slope-efficiency of uniform random subsampling relative to the optimum.

    Equals alpha * sigma^2 / m2; for normal covariates this is
    d alpha / (d alpha + 2 q f_{chi2_d}(q)).
    """
    _check_family(family, nu)
    _check_alpha(alpha)
    if family == NORMAL:
        q = chi2_quantile(1.0 - alpha, d)
        return d * alpha / (d * alpha + 2.0 * q * chi2_density(q, d))
    m2 = second_moment_mc(family, d, alpha, nu, mc_n, rng)
    return alpha * marginal_variance(family, nu) / m2


# =============================================================================
# Designs
# =============================================================================


@dataclass
class DesignSpec:
    """
    Summary of a subsampling design that keeps everything with R^2 >= q.

    Attributes
    ----------
    alpha : float
        Intended proportion of the full data.
    d : int
        Number of covariates.
    family, nu
        Covariate family in standardized coordinates.
    q_threshold : float
        Cut-off on the squared standardized radius.
    m2 : float
        Per-coordinate second moment of the retained mass.
    s2 : float
        Per-covariate dispersion; equals ``m2`` because the design is centered.
    cov : CovSpec
        Location and dispersion mapping standardized to raw coordinates.
    """

    alpha: float
    d: int
    family: str
    q_threshold: float
    m2: float
    s2: float
    cov: CovSpec
    nu: Optional[float] = None

    def information_matrix(self, original: bool = False) -> np.ndarray:
        """
        Information matrix of the design.

        Standardized coordinates give diag(alpha, m2 I_d). In raw coordinates
        the slope block is s2 * Sigma shifted by the location vector.
        """
        d = self.d
        if not original:
            M = np.zeros((d + 1, d + 1))
            M[0, 0] = self.alpha
            M[1:, 1:] = self.m2 * np.eye(d)
            return M
        mu = self.cov.mean
        S = self.slope_information(original=True)
        M = np.empty((d + 1, d + 1))
        M[0, 0] = self.alpha
        M[0, 1:] = M[1:, 0] = self.alpha * mu
        M[1:, 1:] = S + self.alpha * np.outer(mu, mu)
        return M

    def slope_information(self, original: bool = False) -> np.ndarray:
        if original:
            return self.s2 * self.cov.dispersion
        return self.m2 * np.eye(self.d)

    def with_threshold(self, q_threshold: float, mc_n: int = DEFAULT_MC_N, rng=None) -> "DesignSpec":
        """
        Same family and nominal alpha, support moved to R^2 >= q_threshold.

        The second moment is recomputed for the new support, so the result
        is a valid description of a (generally non-optimal) design.
        """
        m2 = _truncated_moment(self.family, self.d, q_threshold, self.nu, mc_n, rng)
        return replace(self, q_threshold=float(q_threshold), m2=m2, s2=m2)


def _truncated_moment(family, d, q, nu, mc_n, rng):
    """(1/d) E[R^2 1{R^2 >= q}] at an arbitrary cut-off."""
    if family == NORMAL:
        if q <= 0:
            return 1.0
        # E[W 1{W >= q}] = d P(chi2_{d+2} >= q)
        return chi2_sf(q, d + 2)
    gen = as_stream(rng if rng is not None else RngStream(DEFAULT_MC_SEED)).generator
    total = 0.0
    done = 0
    while done < mc_n:
        m = min(_MC_CHUNK, mc_n - done)
        r2 = _draw_radius_squared(gen, family, d, nu, m)
        total += np.where(r2 >= q, r2, 0.0).sum() / d
        done += m
    return total / mc_n


def optimal_design(
    family: str,
    d: int,
    alpha: float,
    nu: Optional[float] = None,
    cov: Optional[CovSpec] = None,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
) -> DesignSpec:
    """D-optimal subsampling design of proportion alpha."""
    q = optimal_threshold(family, d, alpha, nu)
    m2 = second_moment(family, d, alpha, nu, mc_n, rng)
    if cov is None:
        cov = CovSpec.identity(d)
    elif cov.d != d:
        raise ValueError(f"cov dimension {cov.d} does not match d={d}")
    return DesignSpec(alpha, d, family, q, m2, m2, cov, nu)


@dataclass
class SlopeCovApprox:
    matrix: np.ndarray
    standardized_det: float
    per_coord_var: float


def slope_cov_approx(
    family: str,
    d: int,
    n: int,
    k: int,
    cov: Optional[CovSpec] = None,
    nu: Optional[float] = None,
    sigma_eps: float = 1.0,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
) -> SlopeCovApprox:
    """
    Approximate covariance of the slope estimator when the k rows with the
    largest Mahalanobis distance are kept out of n.

    Uses sigma_eps^2 / (n s2) * Sigma^{-1} with s2 taken from the optimal
    design of proportion k / n.
    """
    if k < 1 or n < 1:
        raise ValueError("n and k must be positive")
    if k > n:
        raise KLargerThanN(f"k={k} exceeds n={n}")
    alpha = k / n
    if alpha == 1.0:
        s2 = marginal_variance(family, nu)
    else:
        s2 = second_moment(family, d, alpha, nu, mc_n, rng)
    if cov is None:
        cov = CovSpec.identity(d)
    per_coord = sigma_eps**2 / (n * s2)
    matrix = per_coord * cov.chol.solve(np.eye(d))
    std_det = per_coord * math.exp(-cov.logdet() / d)
    return SlopeCovApprox(matrix, std_det, per_coord)


def normal_mse_approx(d: int, n: int, k: int, sigma_eps: float = 1.0) -> float:
    """
    Per-coordinate slope variance for standard normal covariates,
    (k + (2n/d) q f_{chi2_d}(q))^{-1} with q = chi2_{d, 1 - k/n}.
    """
    if k > n:
        raise KLargerThanN(f"k={k} exceeds n={n}")
    if k == n:
        return sigma_eps**2 / n
    q = chi2_quantile(1.0 - k / n, d)
    return sigma_eps**2 / (k + 2.0 * n / d * q * chi2_density(q, d))


# =============================================================================
# Equivalence-theorem check
# =============================================================================


@dataclass
class SensitivityReport:
    """
    Outcome of a Monte-Carlo check of the equivalence theorem.

    ``verdict`` requires that the sensitivity on the support dominates it
    off the support (``separation_ok``), that the support carries mass
    alpha (``mass_ok``) and that the design's m2 matches its support
    (``moment_ok``).
    """

    min_inside_support: float
    max_outside_support: float
    c_star_estimate: float
    mc_points: int
    verdict: bool
    mass_fraction: float = math.nan
    separation_ok: bool = False
    mass_ok: bool = False
    moment_ok: bool = False


def sensitivity(x: np.ndarray, design: DesignSpec) -> np.ndarray:
    """psi(x) = alpha f(x)^T M^{-1} f(x) for standardized rows x."""
    x = np.atleast_2d(x)
    F = np.hstack([np.ones((x.shape[0], 1)), x])
    factor = cholesky(design.information_matrix())
    G = factor.solve(F.T)
    return design.alpha * np.einsum("ij,ji->i", F, G)


def verify_optimality_sensitivity(
    design: DesignSpec,
    mc_n: int = 100_000,
    rng=None,
    tol: float = 1e-6,
    mass_sigmas: float = 4.0,
    chunk_rows: int = 20_000,
) -> SensitivityReport:
    """
    Check that ``design`` satisfies the threshold condition on the sensitivity.

    Draws standardized covariates, evaluates psi under the design's
    information matrix, and compares psi on and off the support
    {R^2 >= q}. Mass and moment checks use ``mass_sigmas`` binomial /
    Monte-Carlo standard errors.
    """
    if mc_n < 100_000:
        raise ValueError(f"mc_n must be at least 1e5, got {mc_n}")
    gen = as_stream(rng).generator
    d, q = design.d, design.q_threshold
    min_in = math.inf
    max_out = -math.inf
    inside_count = 0
    moment_sum = 0.0
    moment_sq = 0.0
    done = 0
    while done < mc_n:
        m = min(chunk_rows, mc_n - done)
        x = gen.standard_normal((m, d))
        if design.family == STUDENT_T:
            x /= np.sqrt(gen.chisquare(design.nu, size=m) / design.nu)[:, None]
        psi = sensitivity(x, design)
        r2 = np.einsum("ij,ij->i", x, x)
        inside = r2 >= q
        if inside.any():
            min_in = min(min_in, float(psi[inside].min()))
        if (~inside).any():
            max_out = max(max_out, float(psi[~inside].max()))
        inside_count += int(inside.sum())
        kept = np.where(inside, r2, 0.0) / d
        moment_sum += kept.sum()
        moment_sq += np.dot(kept, kept)
        done += m

    boundary = np.zeros((1, d))
    boundary[0, 0] = math.sqrt(q)
    c_star = float(sensitivity(boundary, design)[0])

    frac = inside_count / mc_n
    alpha = design.alpha
    mass_ok = abs(frac - alpha) <= mass_sigmas * math.sqrt(alpha * (1 - alpha) / mc_n)
    moment_mean = moment_sum / mc_n
    moment_se = math.sqrt(max(moment_sq / mc_n - moment_mean**2, 0.0) / (mc_n - 1))
    moment_ok = abs(moment_mean - design.m2) <= mass_sigmas * moment_se + 1e-12
    separation_ok = min_in >= max_out - tol
    return SensitivityReport(
        min_inside_support=min_in,
        max_outside_support=max_out,
        c_star_estimate=c_star,
        mc_points=mc_n,
        verdict=bool(separation_ok and mass_ok and moment_ok),
        mass_fraction=frac,
        separation_ok=bool(separation_ok),
        mass_ok=bool(mass_ok),
        moment_ok=bool(moment_ok),
    )


def s2_over_alpha_divergence(
    family: str,
    d: int,
    alpha_grid: Sequence[float],
    nu: Optional[float] = None,
    mc_n: int = DEFAULT_MC_N,
    rng=None,
) -> np.ndarray:
    """s2 / alpha of the optimal design along a strictly decreasing alpha grid."""
    grid = np.asarray(alpha_grid, dtype=np.float64)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("alpha_grid must be a non-empty sequence")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("alpha_grid must be strictly decreasing")
    return np.array([second_moment(family, d, a, nu, mc_n, rng) / a for a in grid])


def theory_table(
    d_list: Sequence[int],
    alpha_list: Sequence[float],
    family: str = NORMAL,
    nu: Optional[float] = None,
    sigma_eps: float = 1.0,
    mc_n: int = DEFAULT_MC_N,
    seed: int = DEFAULT_MC_SEED,
):
    """
    Rows of (d, alpha, q, m2, eff_unif, approx_var) over a grid.

    ``approx_var`` is the asymptotic per-coordinate slope variance
    sigma_eps^2 / s2, i.e. n times the variance for a full-data size n.
    """
    rows = []
    for d in d_list:
        for alpha in alpha_list:
            rng = RngStream(seed, int(d))
            q = optimal_threshold(family, d, alpha, nu)
            m2 = second_moment(family, d, alpha, nu, mc_n, rng)
            eff = alpha * marginal_variance(family, nu) / m2
            rows.append(
                {
                    "d": int(d),
                    "alpha": float(alpha),
                    "q": q,
                    "m2": m2,
                    "eff_unif": eff,
                    "approx_var": sigma_eps**2 / m2,
                }
            )
    return rows
