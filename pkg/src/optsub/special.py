"""
Regularized incomplete gamma and beta functions and the chi-square, F and
Student t distributions built on them.

Lower/upper tails are always produced as a pair with the smaller one
computed directly, so quantiles near either end keep full relative
precision.
"""

from __future__ import annotations

import math
import sys
from statistics import NormalDist

import numpy as np

from .errors import InvalidDegrees, NonConvergence

_EPS = 1e-16
_FPMIN = 1e-300
_SERIES_MAXIT = 100_000
_ROOT_MAXIT = 200


def _check_degrees(*dfs):
    for df in dfs:
        if isinstance(df, bool) or not isinstance(df, (int, float, np.integer, np.floating)):
            raise InvalidDegrees(f"degrees of freedom must be a number, got {df!r}")
        if not (math.isfinite(df) and df > 0):
            raise InvalidDegrees(f"degrees of freedom must be positive and finite, got {df}")


def _check_probability(p):
    if not (0.0 < p < 1.0):
        raise ValueError(f"probability must lie in (0, 1), got {p}")


# =============================================================================
# Incomplete gamma
# =============================================================================


def _gamma_series(a, x):
    # P(a, x) = e^{-x} x^a / Gamma(a+1) * sum_n x^n / ((a+1)...(a+n))
    ap = a
    total = delta = 1.0 / a
    for _ in range(_SERIES_MAXIT):
        ap += 1.0
        delta *= x / ap
        total += delta
        if abs(delta) < abs(total) * _EPS:
            return total * math.exp(-x + a * math.log(x) - math.lgamma(a))
    raise NonConvergence(f"incomplete gamma series failed for a={a}, x={x}")


def _gamma_cf(a, x):
    # Q(a, x) by modified Lentz evaluation of the Legendre continued fraction
    b = x + 1.0 - a
    c = 1.0 / _FPMIN
    d = 1.0 / b
    h = d
    for i in range(1, _SERIES_MAXIT):
        an = -i * (i - a)
        b += 2.0
        d = an * d + b
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = b + an / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return math.exp(-x + a * math.log(x) - math.lgamma(a)) * h
    raise NonConvergence(f"incomplete gamma continued fraction failed for a={a}, x={x}")


def gammainc_pair(a: float, x: float):
    """Regularized incomplete gamma (P(a, x), Q(a, x)) with P + Q = 1."""
    if a <= 0:
        raise ValueError(f"shape must be positive, got {a}")
    if x <= 0.0:
        return 0.0, 1.0
    if math.isinf(x):
        return 1.0, 0.0
    if x < a + 1.0:
        p = _gamma_series(a, x)
        return p, 1.0 - p
    q = _gamma_cf(a, x)
    return 1.0 - q, q


def gammainc_lower(a: float, x: float) -> float:
    return gammainc_pair(a, x)[0]


def gammainc_upper(a: float, x: float) -> float:
    return gammainc_pair(a, x)[1]


# =============================================================================
# Incomplete beta
# =============================================================================


def _beta_cf(a, b, x):
    qab = a + b
    qap = a + 1.0
    qam = a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < _FPMIN:
        d = _FPMIN
    d = 1.0 / d
    h = d
    for m in range(1, _SERIES_MAXIT):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        if abs(d) < _FPMIN:
            d = _FPMIN
        c = 1.0 + aa / c
        if abs(c) < _FPMIN:
            c = _FPMIN
        d = 1.0 / d
        step = d * c
        h *= step
        if abs(step - 1.0) < _EPS:
            return h
    raise NonConvergence(f"incomplete beta continued fraction failed for a={a}, b={b}, x={x}")


def _log_beta(a, b):
    return math.lgamma(a) + math.lgamma(b) - math.lgamma(a + b)


def betainc_pair(a: float, b: float, x: float, y: float | None = None):
    """
    Regularized incomplete beta (I_x(a, b), 1 - I_x(a, b)).

    Pass ``y = 1 - x`` explicitly when it is known more accurately than
    the subtraction would give.
    """
    if a <= 0 or b <= 0:
        raise ValueError(f"shape parameters must be positive, got a={a}, b={b}")
    if y is None:
        y = 1.0 - x
    if x <= 0.0:
        return 0.0, 1.0
    if y <= 0.0:
        return 1.0, 0.0
    front = math.exp(a * math.log(x) + b * math.log(y) - _log_beta(a, b))
    if x < (a + 1.0) / (a + b + 2.0):
        lower = front * _beta_cf(a, b, x) / a
        return lower, 1.0 - lower
    upper = front * _beta_cf(b, a, y) / b
    return 1.0 - upper, upper


def betainc(a: float, b: float, x: float) -> float:
    return betainc_pair(a, b, x)[0]


def _beta_log_density(a, b, x, y):
    return (a - 1.0) * math.log(x) + (b - 1.0) * math.log(y) - _log_beta(a, b)


# =============================================================================
# Safeguarded Newton root finding on a monotone CDF
# =============================================================================


def _newton_bisect(g, dg, lo, hi, x0, geometric=False):
    """
    Root of increasing g in (lo, hi) with g(lo) <= 0 <= g(hi).

    Newton steps are taken when they stay inside the bracket, bisection
    otherwise; the bracket shrinks on every evaluation.
    """
    x = x0 if lo < x0 < hi else 0.5 * (lo + hi)
    for _ in range(_ROOT_MAXIT):
        gx = g(x)
        if gx == 0.0:
            return x
        if gx < 0.0:
            lo = x
        else:
            hi = x
        if hi - lo <= 4.0 * _EPS * abs(hi):
            return 0.5 * (lo + hi)
        slope = dg(x)
        step_ok = False
        if slope > 0.0 and math.isfinite(slope):
            x_new = x - gx / slope
            if lo < x_new < hi:
                if abs(x_new - x) <= 2.0 * _EPS * abs(x_new):
                    return x_new
                x, step_ok = x_new, True
        if not step_ok:
            if geometric and lo > 0.0 and hi / lo > 4.0:
                x = math.sqrt(lo * hi)
            else:
                x = 0.5 * (lo + hi)
    raise NonConvergence("root finder did not converge within the iteration cap")


def betainc_inverse(a: float, b: float, p: float):
    """
    Solve I_x(a, b) = p.

    Returns ``(x, 1 - x)`` with whichever component is small carried at
    full relative precision.
    """
    _check_probability(p)
    if p > 0.5:
        y, x = betainc_inverse(b, a, 1.0 - p)
        return x, y

    def g(t):
        return betainc_pair(a, b, t)[0] - p

    def dg(t):
        if t <= 0.0 or t >= 1.0:
            return 0.0
        return math.exp(_beta_log_density(a, b, t, 1.0 - t))

    # small-x expansion I_x ~ x^a / (a B(a, b)) gives a good start in the lower tail
    start = math.exp((math.log(p) + math.log(a) + _log_beta(a, b)) / a)
    start = min(start, a / (a + b))
    x = _newton_bisect(g, dg, 0.0, 1.0, start, geometric=True)
    return x, 1.0 - x


# =============================================================================
# Chi-square
# =============================================================================


def chi2_density(w, d):
    """
    Density of the chi-square distribution with d degrees of freedom.

    For d = 1 the pole at w = 0 is reported as the largest finite float.
    Accepts scalars or arrays.
    """
    _check_degrees(d)
    w_arr = np.asarray(w, dtype=np.float64)
    if np.any(w_arr < 0):
        raise ValueError("chi-square density needs w >= 0")
    half = 0.5 * d
    with np.errstate(divide="ignore"):
        logw = np.log(w_arr)
    log_norm = -half * math.log(2.0) - math.lgamma(half)
    with np.errstate(invalid="ignore"):
        log_pdf = log_norm + (half - 1.0) * logw - 0.5 * w_arr
    out = np.exp(log_pdf)
    at_zero = w_arr == 0.0
    if np.any(at_zero):
        if d == 2:
            zero_value = 0.5
        elif d < 2:
            zero_value = sys.float_info.max
        else:
            zero_value = 0.0
        out = np.where(at_zero, zero_value, out)
    out = np.minimum(out, sys.float_info.max)
    return float(out) if out.ndim == 0 else out


def chi2_cdf(q: float, d: float) -> float:
    _check_degrees(d)
    return gammainc_pair(0.5 * d, 0.5 * q)[0] if q > 0 else 0.0


def chi2_sf(q: float, d: float) -> float:
    _check_degrees(d)
    return gammainc_pair(0.5 * d, 0.5 * q)[1] if q > 0 else 1.0


def chi2_quantile(p: float, d: float) -> float:
    """
    Value q with P(chi2_d <= q) = p.

    Starts from the Wilson-Hilferty approximation, expands a geometric
    bracket around it, then refines by Newton with bisection fallback.
    """
    _check_degrees(d)
    _check_probability(p)
    a = 0.5 * d
    if p <= 0.5:
        def g(q):
            return gammainc_pair(a, 0.5 * q)[0] - p
    else:
        def g(q):
            return (1.0 - p) - gammainc_pair(a, 0.5 * q)[1]

    def dg(q):
        return chi2_density(q, d) if q > 0 else 0.0

    z = NormalDist().inv_cdf(p)
    h = 2.0 / (9.0 * d)
    x0 = d * (1.0 - h + z * math.sqrt(h)) ** 3
    if not (x0 > 0 and math.isfinite(x0)):
        # lower tail: P(d/2, q/2) ~ (q/2)^{d/2} / Gamma(d/2 + 1)
        x0 = 2.0 * math.exp((math.log(p) + math.lgamma(a + 1.0)) / a)
    lo = hi = x0
    for _ in range(_ROOT_MAXIT):
        if g(hi) >= 0:
            break
        hi *= 2.0
    else:
        raise NonConvergence("could not bracket chi-square quantile from above")
    for _ in range(2000):
        if g(lo) <= 0:
            break
        lo *= 0.5
    else:
        raise NonConvergence("could not bracket chi-square quantile from below")
    if lo == hi:
        return lo
    return _newton_bisect(g, dg, lo, hi, x0, geometric=True)


# =============================================================================
# F and Student t
# =============================================================================


def f_cdf(x: float, d1: float, d2: float) -> float:
    _check_degrees(d1, d2)
    if x <= 0:
        return 0.0
    denom = d1 * x + d2
    return betainc_pair(0.5 * d1, 0.5 * d2, d1 * x / denom, d2 / denom)[0]


def f_sf(x: float, d1: float, d2: float) -> float:
    _check_degrees(d1, d2)
    if x <= 0:
        return 1.0
    denom = d1 * x + d2
    return betainc_pair(0.5 * d1, 0.5 * d2, d1 * x / denom, d2 / denom)[1]


def f_quantile(p: float, d1: float, d2: float) -> float:
    """Quantile of the F(d1, d2) distribution via the inverse incomplete beta."""
    _check_degrees(d1, d2)
    _check_probability(p)
    u, v = betainc_inverse(0.5 * d1, 0.5 * d2, p)
    if v <= 0.0:
        return math.inf
    return d2 * u / (d1 * v)


def t_cdf(t: float, nu: float) -> float:
    _check_degrees(nu)
    denom = nu + t * t
    tail = 0.5 * betainc_pair(0.5 * nu, 0.5, nu / denom, t * t / denom)[0]
    return 1.0 - tail if t > 0 else tail


def t_quantile(p: float, nu: float) -> float:
    """Student t quantile from the symmetric incomplete-beta representation."""
    _check_degrees(nu)
    _check_probability(p)
    if p == 0.5:
        return 0.0
    tail = 2.0 * min(p, 1.0 - p)
    x, y = betainc_inverse(0.5 * nu, 0.5, tail)
    t = math.sqrt(nu * y / x)
    return t if p > 0.5 else -t
