"""
Subdata selection rules.

Every selector returns a :class:`SubsampleResult` holding sorted row
indices into the full data. Ties in a score are broken in favour of the
lower row index, so all deterministic selectors are reproducible on data
with repeated values.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .distributions import NORMAL, as_stream
from .errors import KLargerThanN, KTooSmall, NotPositiveDefinite, SingularInformation
from .linalg import (
    CovSpec,
    as_values,
    mahalanobis_all,
    simplified_distance_all,
    streaming_moments,
)
from .theory import optimal_threshold

DOPT = "dopt"
DOPT_S = "dopt-s"
IBOSS = "iboss"
UNIFORM = "unif"
LEVERAGE = "leverage"
THRESHOLD = "threshold"
FULL = "full"
METHODS = (DOPT, DOPT_S, IBOSS, UNIFORM, LEVERAGE, THRESHOLD)

KEEP_DISTANCES_MAX_N = 10_000_000


@dataclass
class SubsampleResult:
    """
    Selected rows of a full data set.

    Attributes
    ----------
    indices : ndarray of int
        Sorted, unique row indices.
    k_achieved : int
        Number of selected rows.
    distances : ndarray or None
        Selection score of each selected row, aligned with ``indices``.
    elapsed : float
        Wall-clock seconds spent selecting.
    method : str
    """

    indices: np.ndarray
    k_achieved: int
    distances: Optional[np.ndarray]
    elapsed: float
    method: str


def _check_k(k, n):
    if not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if k > n:
        raise KLargerThanN(f"k={k} exceeds n={n}")


def top_k_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """
    Sorted indices of the k largest scores, ties going to lower indices.

    Expected O(n): one introselect pass finds the k-th largest value, the
    rest is a linear scan.
    """
    n = scores.shape[0]
    _check_k(k, n)
    if k == n:
        return np.arange(n)
    kth = np.partition(scores, n - k)[n - k]
    above = np.flatnonzero(scores > kth)
    need = k - above.shape[0]
    ties = np.flatnonzero(scores == kth)[:need]
    return np.sort(np.concatenate([above, ties]))


def _keep(scores, idx, keep_distances):
    if keep_distances is None:
        keep_distances = scores.shape[0] <= KEEP_DISTANCES_MAX_N
    return scores[idx] if keep_distances else None


def select_quantile_threshold(X, cov: CovSpec, q_threshold: float, keep_distances=None) -> SubsampleResult:
    """Keep every row whose Mahalanobis distance is at least ``q_threshold``."""
    if not q_threshold >= 0:
        raise ValueError(f"threshold must be non-negative, got {q_threshold}")
    start = time.perf_counter()
    dist = mahalanobis_all(X, cov)
    idx = np.flatnonzero(dist >= q_threshold)
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, idx.shape[0], _keep(dist, idx, keep_distances), elapsed, THRESHOLD)


def select_top_k_mahalanobis(X, cov: CovSpec, k: int, keep_distances=None) -> SubsampleResult:
    """The k rows farthest from ``cov.mean`` in Mahalanobis distance."""
    start = time.perf_counter()
    dist = mahalanobis_all(X, cov)
    idx = top_k_indices(dist, k)
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, k, _keep(dist, idx, keep_distances), elapsed, DOPT)


def select_top_k_simplified(X, mean, variances, k: int, keep_distances=None) -> SubsampleResult:
    """The k rows with the largest variance-standardized squared distance."""
    start = time.perf_counter()
    dist = simplified_distance_all(X, mean, variances)
    idx = top_k_indices(dist, k)
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, k, _keep(dist, idx, keep_distances), elapsed, DOPT_S)


def _ordered(cand, col, m, smallest):
    key = col[cand] if smallest else -col[cand]
    return cand[np.lexsort((cand, key))[:m]]


def _column_extremes(col, available, m_low, m_high):
    """
    Rows holding the m_low smallest and then the m_high largest available
    entries of col, ties going to lower indices.
    """
    n = col.shape[0]
    taken = n - int(np.count_nonzero(available))
    # the c smallest values contain at least m available rows
    c_low = min(n, m_low + taken)
    c_high = min(n, m_high + m_low + taken)
    if c_low - 1 < n - c_high:
        part = np.partition(col, (c_low - 1, n - c_high))
        lo_bound, hi_bound = part[c_low - 1], part[n - c_high]
        del part
        low = np.flatnonzero(col <= lo_bound)
        low = _ordered(low[available[low]], col, m_low, True)
        high = np.flatnonzero(col >= hi_bound)
        high = high[available[high]]
        high = _ordered(high[~np.isin(high, low)], col, m_high, False)
        return low, high
    # small n: the two tails overlap, fall back to the available rows directly
    rows = np.flatnonzero(available)
    low = _ordered(rows, col, m_low, True)
    rest = rows[~np.isin(rows, low)]
    return low, _ordered(rest, col, m_high, False)


def select_iboss(X, k: int) -> SubsampleResult:
    """
    Information-based optimal subdata selection.

    With r = floor(k / (2d)), each column in turn contributes the r
    smallest and r largest values among rows not yet chosen. Leftover
    slots (k not a multiple of 2d) are filled by a second sweep that
    takes one extra minimum and maximum per column until k is reached.
    """
    values = as_values(X)
    n, d = values.shape
    _check_k(k, n)
    if k < 2 * d:
        raise KTooSmall(f"k={k} is smaller than 2d={2 * d}")
    start = time.perf_counter()
    r = k // (2 * d)
    available = np.ones(n, dtype=bool)
    chosen = 0

    def take(j, m):
        nonlocal chosen
        m_low = min(m, k - chosen)
        m_high = min(m, k - chosen - m_low)
        if m_low <= 0:
            return
        # contiguous copy: the strided column is scanned several times
        col = np.ascontiguousarray(values[:, j])
        low, high = _column_extremes(col, available, m_low, m_high)
        available[low] = False
        available[high] = False
        chosen += low.shape[0] + high.shape[0]

    for j in range(d):
        take(j, r)
    for j in range(d):
        if chosen >= k:
            break
        take(j, 1)
    idx = np.flatnonzero(~available)
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, idx.shape[0], None, elapsed, IBOSS)


def select_uniform(X, k: int, rng) -> SubsampleResult:
    """Simple random sample of k rows without replacement."""
    n = as_values(X).shape[0]
    _check_k(k, n)
    start = time.perf_counter()
    idx = np.sort(as_stream(rng).generator.choice(n, size=k, replace=False, shuffle=False))
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, k, None, elapsed, UNIFORM)


def leverage_scores(X) -> np.ndarray:
    """
    Hat-matrix diagonal of the intercept model, (d_S(x_i, xbar) + 1) / n,
    with S the 1/n covariance; the n x n hat matrix is never formed.
    """
    values = as_values(X)
    n = values.shape[0]
    mean, S = streaming_moments(values)
    try:
        cov = CovSpec.general(S, mean)
    except NotPositiveDefinite as exc:
        raise SingularInformation("empirical covariance is singular") from exc
    return (mahalanobis_all(values, cov) + 1.0) / n


def select_top_k_leverage(X, k: int) -> SubsampleResult:
    """
    The k rows of highest leverage.

    Same index set as top-k Mahalanobis under the empirical mean and
    covariance; ``distances`` holds the leverages.
    """
    start = time.perf_counter()
    h = leverage_scores(X)
    idx = top_k_indices(h, k)
    elapsed = time.perf_counter() - start
    return SubsampleResult(idx, k, h[idx], elapsed, LEVERAGE)


# =============================================================================
# Configured dispatch
# =============================================================================

KNOWN = "known"
ESTIMATED = "estimated"
PILOT = "pilot"


@dataclass
class SelectorConfig:
    """
    Which selector to run and where its moments come from.

    Exactly one of ``k`` and ``alpha`` is set: ``alpha`` for the threshold
    rule, ``k`` for everything else. ``cov_source`` is ``"known"`` (needs
    ``cov``), ``"estimated"`` (full-data moments) or ``"pilot"`` (moments
    from a uniform pilot sample; ``pilot_fraction`` in (0, 0.5], default
    size max(10 d^2, 1000) rows).
    """

    method: str
    k: Optional[int] = None
    alpha: Optional[float] = None
    cov_source: str = ESTIMATED
    cov: Optional[CovSpec] = None
    pilot_fraction: Optional[float] = None
    family: str = NORMAL
    nu: Optional[float] = None
    keep_distances: Optional[bool] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if (self.k is None) == (self.alpha is None):
            raise ValueError("set exactly one of k and alpha")
        if self.method == THRESHOLD and self.alpha is None:
            raise ValueError("the threshold rule is parameterized by alpha")
        if self.method != THRESHOLD and self.k is None:
            raise ValueError(f"method {self.method!r} is parameterized by k")
        if self.cov_source not in (KNOWN, ESTIMATED, PILOT):
            raise ValueError(f"unknown cov_source {self.cov_source!r}")
        if self.cov_source == KNOWN and self.cov is None:
            raise ValueError("cov_source 'known' needs a CovSpec")
        if self.pilot_fraction is not None and not (0.0 < self.pilot_fraction <= 0.5):
            raise ValueError(f"pilot_fraction must lie in (0, 0.5], got {self.pilot_fraction}")


def pilot_size(n: int, d: int, pilot_fraction: Optional[float] = None) -> int:
    if pilot_fraction is None:
        size = max(10 * d * d, 1000)
    else:
        size = max(int(math.ceil(pilot_fraction * n)), d + 1)
    return min(n, size)


def resolve_cov(X, config: SelectorConfig, rng=None) -> CovSpec:
    """Mean/dispersion the selector should use under ``config.cov_source``."""
    values = as_values(X)
    n, d = values.shape
    if config.cov_source == KNOWN:
        return config.cov
    if config.cov_source == PILOT:
        m = pilot_size(n, d, config.pilot_fraction)
        rows = np.sort(as_stream(rng).generator.choice(n, size=m, replace=False))
        values = values[rows]
    mean, S = streaming_moments(values)
    try:
        return CovSpec.general(S, mean)
    except NotPositiveDefinite as exc:
        raise SingularInformation("estimated covariance is singular") from exc


def select(X, config: SelectorConfig, rng=None) -> SubsampleResult:
    """Run the selector described by ``config``."""
    rng = as_stream(rng)
    method = config.method
    if method == IBOSS:
        return select_iboss(X, config.k)
    if method == UNIFORM:
        return select_uniform(X, config.k, rng)
    if method == LEVERAGE:
        return select_top_k_leverage(X, config.k)
    cov = resolve_cov(X, config, rng)
    if method == DOPT:
        return select_top_k_mahalanobis(X, cov, config.k, config.keep_distances)
    if method == DOPT_S:
        return select_top_k_simplified(X, cov.mean, cov.variances, config.k, config.keep_distances)
    q = optimal_threshold(config.family, cov.d, config.alpha, config.nu)
    return select_quantile_threshold(X, cov, q, config.keep_distances)


def select_known(method: str, X, k: int, cov: CovSpec, rng=None) -> SubsampleResult:
    """
    Fixed-size selection with the covariate law's moments taken as known.

    ``method`` is one of ``"full"``, ``"dopt"``, ``"dopt-s"``, ``"iboss"``,
    ``"unif"``, ``"leverage"``; ``"full"`` keeps every row.
    """
    if method == FULL:
        n = as_values(X).shape[0]
        return SubsampleResult(np.arange(n), n, None, 0.0, FULL)
    if method == DOPT:
        return select_top_k_mahalanobis(X, cov, k, keep_distances=False)
    if method == DOPT_S:
        return select_top_k_simplified(X, cov.mean, cov.variances, k, keep_distances=False)
    if method == IBOSS:
        return select_iboss(X, k)
    if method == UNIFORM:
        return select_uniform(X, k, rng)
    if method == LEVERAGE:
        return select_top_k_leverage(X, k)
    raise ValueError(f"unknown fixed-size method {method!r}")
