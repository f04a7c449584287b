"""
Dense linear algebra shared by the selection, theory and estimation layers.

Covers Cholesky factorization with an explicit positive-definiteness
tolerance, Mahalanobis distances with structure-aware fast paths,
mergeable single-pass moment estimation, least squares with intercept,
and CSV ingestion of covariate tables.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.linalg import cho_solve, solve_triangular

from .errors import (
    CsvParseError,
    DimensionMismatch,
    NonPositiveVariance,
    NotPositiveDefinite,
    SingularInformation,
    TooFewRows,
)

DEFAULT_BLOCK_ROWS = 4096

GENERAL = "general"
COMPOUND_SYMMETRY = "compound_symmetry"
DIAGONAL = "diagonal"
STRUCTURES = (GENERAL, COMPOUND_SYMMETRY, DIAGONAL)


# =============================================================================
# Data containers
# =============================================================================


@dataclass
class DataMatrix:
    """
    Full data set: an n x d covariate table with an optional response.

    Parameters
    ----------
    values : ndarray, shape (n, d)
        Covariates, stored row-major as float64.
    response : ndarray, shape (n,), optional
        Response vector y.
    """

    values: np.ndarray
    response: Optional[np.ndarray] = None

    def __post_init__(self):
        values = np.ascontiguousarray(self.values, dtype=np.float64)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[0] < 1 or values.shape[1] < 1:
            raise DimensionMismatch(f"covariates must be a non-empty 2-D table, got shape {values.shape}")
        if not np.isfinite(values).all():
            raise ValueError("covariates contain non-finite entries")
        self.values = values
        if self.response is not None:
            response = np.asarray(self.response, dtype=np.float64).reshape(-1)
            if response.shape[0] != values.shape[0]:
                raise DimensionMismatch(
                    f"response has length {response.shape[0]}, expected {values.shape[0]}"
                )
            self.response = response

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "DataMatrix":
        """Row subset as a new DataMatrix."""
        indices = np.asarray(indices, dtype=np.intp)
        y = None if self.response is None else self.response[indices]
        return DataMatrix(self.values[indices], y)


def as_values(X) -> np.ndarray:
    """Covariate array of a DataMatrix or anything array-like."""
    if isinstance(X, DataMatrix):
        return X.values
    arr = np.asarray(X, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    return arr


@dataclass
class CholFactor:
    """Lower-triangular L with L @ L.T equal to the factorized matrix."""

    lower: np.ndarray

    def solve(self, b: np.ndarray) -> np.ndarray:
        """Solve (L L^T) x = b."""
        return cho_solve((self.lower, True), b)

    def logdet(self) -> float:
        """Log-determinant of L L^T."""
        return 2.0 * float(np.sum(np.log(np.diag(self.lower))))


@dataclass
class CovSpec:
    """
    Location vector and dispersion matrix of the covariate distribution.

    ``structure`` selects the distance kernel: ``"general"`` uses a
    Cholesky solve, ``"compound_symmetry"`` and ``"diagonal"`` are O(d)
    per row. Use the ``compound_symmetry``/``diagonal``/``general``
    constructors rather than building one by hand.
    """

    mean: np.ndarray
    dispersion: np.ndarray
    structure: str = GENERAL
    rho: Optional[float] = None

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=np.float64).reshape(-1)
        self.dispersion = np.atleast_2d(np.asarray(self.dispersion, dtype=np.float64))
        d = self.mean.shape[0]
        if self.dispersion.shape != (d, d):
            raise DimensionMismatch(f"dispersion shape {self.dispersion.shape} does not match mean length {d}")
        if self.structure not in STRUCTURES:
            raise ValueError(f"unknown structure {self.structure!r}")
        S = self.dispersion
        scale = max(float(np.max(np.abs(S))), 1e-300)
        if np.max(np.abs(S - S.T)) > 1e-12 * scale:
            raise ValueError("dispersion matrix is not symmetric")
        if self.structure == COMPOUND_SYMMETRY:
            rho = self.rho
            if rho is None:
                raise ValueError("compound symmetry requires rho")
            lo = -1.0 / (d - 1) if d > 1 else -np.inf
            if not (lo < rho < 1.0):
                raise ValueError(f"rho={rho} outside ({lo}, 1) for d={d}")
            target = (1.0 - rho) * np.eye(d) + rho
            if np.max(np.abs(S - target)) > 1e-12:
                raise ValueError("dispersion does not match compound symmetry with the given rho")
        elif self.structure == DIAGONAL:
            if np.any(S[~np.eye(d, dtype=bool)] != 0.0):
                raise ValueError("diagonal structure with non-zero off-diagonal entries")
            if np.any(np.diag(S) <= 0.0):
                raise NonPositiveVariance("diagonal dispersion needs strictly positive variances")
        # fail fast on indefinite input
        _ = self.chol

    @classmethod
    def general(cls, dispersion, mean=None) -> "CovSpec":
        dispersion = np.atleast_2d(np.asarray(dispersion, dtype=np.float64))
        if mean is None:
            mean = np.zeros(dispersion.shape[0])
        return cls(mean, dispersion, GENERAL)

    @classmethod
    def compound_symmetry(cls, d: int, rho: float, mean=None) -> "CovSpec":
        rho = float(rho)
        dispersion = (1.0 - rho) * np.eye(d) + rho * np.ones((d, d))
        if mean is None:
            mean = np.zeros(d)
        return cls(mean, dispersion, COMPOUND_SYMMETRY, rho)

    @classmethod
    def diagonal(cls, variances, mean=None) -> "CovSpec":
        variances = np.asarray(variances, dtype=np.float64).reshape(-1)
        if np.any(variances <= 0):
            raise NonPositiveVariance("variances must be strictly positive")
        if mean is None:
            mean = np.zeros(variances.shape[0])
        return cls(mean, np.diag(variances), DIAGONAL)

    @classmethod
    def identity(cls, d: int) -> "CovSpec":
        return cls.diagonal(np.ones(d))

    @property
    def d(self) -> int:
        return self.mean.shape[0]

    @cached_property
    def chol(self) -> CholFactor:
        return cholesky(self.dispersion)

    @property
    def variances(self) -> np.ndarray:
        return np.diag(self.dispersion).copy()

    def logdet(self) -> float:
        return self.chol.logdet()

    def as_general(self) -> "CovSpec":
        """Same distribution, but force the dense Cholesky distance path."""
        return CovSpec(self.mean, self.dispersion, GENERAL)


# =============================================================================
# Factorization and distances
# =============================================================================


def cholesky(S) -> CholFactor:
    """
    Cholesky factor of a symmetric positive-definite matrix.

    Raises NotPositiveDefinite when any pivot L_jj^2 falls at or below
    ``1e-12 * max(diag(S))``.
    """
    S = np.atleast_2d(np.asarray(S, dtype=np.float64))
    if S.shape[0] != S.shape[1]:
        raise DimensionMismatch(f"matrix must be square, got {S.shape}")
    tol = 1e-12 * max(float(np.max(np.diag(S))), 0.0)
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite("matrix is not positive definite") from exc
    pivots = np.diag(L) ** 2
    if not np.all(pivots > tol) or not np.all(np.isfinite(L)):
        raise NotPositiveDefinite(f"pivot {pivots.min():.3e} below tolerance {tol:.3e}")
    return CholFactor(L)


def _blocks(n: int, block_rows: int):
    for start in range(0, n, block_rows):
        yield start, min(n, start + block_rows)


def mahalanobis_all(X, cov: CovSpec, block_rows: int = DEFAULT_BLOCK_ROWS) -> np.ndarray:
    """
    Squared Mahalanobis distance (x_i - mu)^T Sigma^{-1} (x_i - mu) of every row.

    Diagonal and compound-symmetry dispersions run in O(nd); a general
    dispersion costs one Cholesky plus n triangular solves, O(nd^2).
    """
    values = as_values(X)
    n, d = values.shape
    if d != cov.d:
        raise DimensionMismatch(f"data has {d} columns, covariance has dimension {cov.d}")
    out = np.empty(n)
    mu = cov.mean
    if cov.structure == DIAGONAL:
        inv_var = 1.0 / np.diag(cov.dispersion)
        for a, b in _blocks(n, block_rows):
            c = values[a:b] - mu
            np.square(c, out=c)
            out[a:b] = c @ inv_var
    elif cov.structure == COMPOUND_SYMMETRY:
        rho = cov.rho
        # Sigma^{-1} = (I - g 11^T) / (1 - rho),  g = rho / (1 - rho + d rho)
        g = rho / (1.0 - rho + d * rho)
        for a, b in _blocks(n, block_rows):
            c = values[a:b] - mu
            s = c.sum(axis=1)
            np.square(c, out=c)
            out[a:b] = (c.sum(axis=1) - g * s * s) / (1.0 - rho)
    else:
        L = cov.chol.lower
        for a, b in _blocks(n, block_rows):
            z = solve_triangular(L, (values[a:b] - mu).T, lower=True, check_finite=False)
            out[a:b] = np.einsum("ij,ij->j", z, z)
    np.maximum(out, 0.0, out=out)
    return out


def simplified_distance_all(X, mean, variances, block_rows: int = DEFAULT_BLOCK_ROWS) -> np.ndarray:
    """Sum over covariates of (x_ij - mu_j)^2 / sigma_j^2, ignoring correlation."""
    variances = np.asarray(variances, dtype=np.float64).reshape(-1)
    if np.any(~(variances > 0)):
        raise NonPositiveVariance("variances must be strictly positive")
    mean = np.asarray(mean, dtype=np.float64).reshape(-1)
    if mean.shape != variances.shape:
        raise DimensionMismatch("mean and variances differ in length")
    return mahalanobis_all(X, CovSpec(mean, np.diag(variances), DIAGONAL), block_rows)


# =============================================================================
# Moments
# =============================================================================


@dataclass
class MomentAccumulator:
    """
    Mergeable running mean and scatter matrix (pairwise update).

    ``covariance`` uses the 1/n normalization, not 1/(n-1).
    """

    d: int
    count: int = 0
    mean: np.ndarray = field(default=None)
    scatter: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.mean is None:
            self.mean = np.zeros(self.d)
        if self.scatter is None:
            self.scatter = np.zeros((self.d, self.d))

    def update(self, chunk) -> "MomentAccumulator":
        chunk = as_values(chunk)
        if chunk.shape[1] != self.d:
            raise DimensionMismatch(f"chunk has {chunk.shape[1]} columns, expected {self.d}")
        m = chunk.shape[0]
        if m == 0:
            return self
        mean = chunk.mean(axis=0)
        c = chunk - mean
        other = MomentAccumulator(self.d, m, mean, c.T @ c)
        merged = self.merge(other)
        self.count, self.mean, self.scatter = merged.count, merged.mean, merged.scatter
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Combine two disjoint partial results (Chan et al. update)."""
        if other.d != self.d:
            raise DimensionMismatch("cannot merge accumulators of different dimension")
        if other.count == 0:
            return MomentAccumulator(self.d, self.count, self.mean.copy(), self.scatter.copy())
        if self.count == 0:
            return MomentAccumulator(self.d, other.count, other.mean.copy(), other.scatter.copy())
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        scatter = self.scatter + other.scatter + np.outer(delta, delta) * (self.count * other.count / n)
        return MomentAccumulator(self.d, n, mean, scatter)

    @property
    def covariance(self) -> np.ndarray:
        return self.scatter / self.count


def streaming_moments(X, chunk_rows: int = 65536):
    """
    Mean and 1/n-normalized covariance in one pass over row chunks.

    Returns
    -------
    mean : ndarray, shape (d,)
    covariance : ndarray, shape (d, d)
    """
    values = as_values(X)
    n, d = values.shape
    if n < 2:
        raise TooFewRows(f"need at least 2 rows, got {n}")
    acc = MomentAccumulator(d)
    for a, b in _blocks(n, chunk_rows):
        acc.update(values[a:b])
    return acc.mean, acc.covariance


def centered_gram(values: np.ndarray, block_rows: int = 65536) -> np.ndarray:
    """X^T X - n xbar xbar^T, accumulated blockwise around the exact mean."""
    n, d = values.shape
    mean = values.mean(axis=0)
    G = np.zeros((d, d))
    for a, b in _blocks(n, block_rows):
        c = values[a:b] - mean
        G += c.T @ c
    return G


# =============================================================================
# Least squares
# =============================================================================


def regressors(values: np.ndarray) -> np.ndarray:
    """Rows f(x_i) = (1, x_i^T)."""
    n = values.shape[0]
    return np.hstack([np.ones((n, 1)), values])


def solve_least_squares(X: DataMatrix):
    """
    Ordinary least squares with intercept via the normal equations.

    Returns
    -------
    beta_hat : ndarray, shape (d + 1,)
        Intercept first, then slopes.
    info : ndarray, shape (d + 1, d + 1)
        Observed information sum_i f(x_i) f(x_i)^T.
    """
    if X.response is None:
        raise ValueError("least squares needs a response column")
    if X.n < X.d + 1:
        raise SingularInformation(f"need at least d+1={X.d + 1} rows, got {X.n}")
    F = regressors(X.values)
    info = F.T @ F
    try:
        factor = cholesky(info)
    except NotPositiveDefinite as exc:
        raise SingularInformation("observed information matrix is singular") from exc
    beta = factor.solve(F.T @ X.response)
    return beta, info


# =============================================================================
# CSV ingestion
# =============================================================================


def _parse_float(text: str, row: int, column: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CsvParseError(f"cannot parse {text!r} as a number", row=row, column=column) from None
    if not math.isfinite(value):
        raise CsvParseError(f"non-finite value {text!r}", row=row, column=column)
    return value


def read_data_csv(path) -> DataMatrix:
    """
    Load a covariate table: header ``x1..xd`` plus an optional ``y`` column.

    Row numbers in errors count the header as row 1.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvParseError("empty file", row=1) from None
        xcols = [h for h in header if h.startswith("x") and h[1:].isdigit()]
        expected = [f"x{j}" for j in range(1, len(xcols) + 1)]
        if not xcols or sorted(xcols, key=lambda h: int(h[1:])) != expected:
            raise CsvParseError(f"header must name covariates x1..xd, got {header}", row=1)
        unknown = [h for h in header if h not in xcols and h != "y"]
        if unknown:
            raise CsvParseError(f"unexpected columns {unknown}", row=1)
        pos = {h: i for i, h in enumerate(header)}
        order = [pos[h] for h in expected]
        ypos = pos.get("y")
        rows, ys = [], []
        for rownum, record in enumerate(reader, start=2):
            if not record or all(not cell.strip() for cell in record):
                continue
            if len(record) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(record)}", row=rownum)
            rows.append([_parse_float(record[i], rownum, header[i]) for i in order])
            if ypos is not None:
                ys.append(_parse_float(record[ypos], rownum, "y"))
    if not rows:
        raise CsvParseError("no data rows", row=2)
    return DataMatrix(np.array(rows), np.array(ys) if ypos is not None else None)


def write_data_csv(path, X: DataMatrix, fmt: str = "%.17g") -> None:
    header = [f"x{j}" for j in range(1, X.d + 1)]
    table = X.values
    if X.response is not None:
        header.append("y")
        table = np.column_stack([table, X.response])
    np.savetxt(path, table, delimiter=",", header=",".join(header), comments="", fmt=fmt)


def read_cov_csv(path) -> CovSpec:
    """
    Load a known mean and dispersion matrix.

    Layout: header ``role,x1..xd``; one row with role ``mean``, then d rows
    with role ``sigma`` holding the dispersion matrix row by row.
    """
    mean = None
    sigma_rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvParseError("empty covariance file", row=1) from None
        if not header or header[0] != "role":
            raise CsvParseError("first column must be 'role'", row=1)
        cols = header[1:]
        for rownum, record in enumerate(reader, start=2):
            if not record:
                continue
            if len(record) != len(header):
                raise CsvParseError(f"expected {len(header)} fields, got {len(record)}", row=rownum)
            vals = [_parse_float(v, rownum, c) for v, c in zip(record[1:], cols)]
            role = record[0].strip()
            if role == "mean":
                mean = np.array(vals)
            elif role == "sigma":
                sigma_rows.append(vals)
            else:
                raise CsvParseError(f"unknown role {role!r}", row=rownum, column="role")
    d = len(cols)
    if mean is None:
        mean = np.zeros(d)
    if len(sigma_rows) != d:
        raise CsvParseError(f"expected {d} sigma rows, got {len(sigma_rows)}")
    return CovSpec.general(np.array(sigma_rows), mean)


def write_cov_csv(path, cov: CovSpec) -> None:
    header = ["role"] + [f"x{j}" for j in range(1, cov.d + 1)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        w.writerow(["mean"] + [repr(float(v)) for v in cov.mean])
        for row in cov.dispersion:
            w.writerow(["sigma"] + [repr(float(v)) for v in row])
