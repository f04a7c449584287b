"""
Reproducible random streams and covariate/error samplers.

Streams are Philox counter-based generators keyed by ``(seed, stream_id)``,
so replicate ``v`` of a simulation can be regenerated in isolation.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import NonPositiveSigma
from .linalg import COMPOUND_SYMMETRY, DIAGONAL, CovSpec, DataMatrix

NORMAL = "normal"
STUDENT_T = "t"
FAMILIES = (NORMAL, STUDENT_T)

_MASK64 = (1 << 64) - 1


class RngStream:
    """
    Independent random stream identified by a 64-bit seed and stream id.

    Equal ``(seed, stream_id)`` pairs replay the same variates; distinct
    stream ids use distinct Philox keys.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        self.seed = int(seed) & _MASK64
        self.stream_id = int(stream_id) & _MASK64
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        self.generator = np.random.Generator(np.random.Philox(key=key))

    def substream(self, stream_id: int) -> "RngStream":
        """Fresh stream sharing this seed."""
        return RngStream(self.seed, stream_id)

    def jumped(self, jumps: int = 1) -> "RngStream":
        """Same key, counter advanced by ``jumps * 2**128`` draws."""
        other = RngStream.__new__(RngStream)
        other.seed, other.stream_id = self.seed, self.stream_id
        key = np.array([self.seed, self.stream_id], dtype=np.uint64)
        other.generator = np.random.Generator(np.random.Philox(key=key).jumped(jumps))
        return other

    def __repr__(self):
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"


def as_stream(rng) -> RngStream:
    if isinstance(rng, RngStream):
        return rng
    if rng is None:
        return RngStream(0)
    return RngStream(int(rng))


@dataclass
class EllipticalModel:
    """
    Covariate law: multivariate normal or multivariate t around ``cov``.

    For the t family ``cov.dispersion`` is the scatter matrix; the
    covariance is ``nu / (nu - 2)`` times it.
    """

    family: str
    cov: CovSpec
    nu: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.family == STUDENT_T:
            if self.nu is None or not self.nu > 2:
                raise ValueError(f"t family needs nu > 2 for finite second moments, got {self.nu}")
            self.nu = float(self.nu)

    @classmethod
    def normal(cls, cov: CovSpec) -> "EllipticalModel":
        return cls(NORMAL, cov)

    @classmethod
    def student_t(cls, nu: float, cov: CovSpec) -> "EllipticalModel":
        return cls(STUDENT_T, cov, nu)

    @property
    def d(self) -> int:
        return self.cov.d


def _correlate(z: np.ndarray, cov: CovSpec, gen: np.random.Generator) -> np.ndarray:
    """Turn i.i.d. standard normal rows into N(0, Sigma) rows, in place when possible."""
    n, d = z.shape
    if cov.structure == DIAGONAL:
        z *= np.sqrt(np.diag(cov.dispersion))
        return z
    if cov.structure == COMPOUND_SYMMETRY and cov.rho >= 0:
        # shared-factor form: sqrt(1 - rho) z + sqrt(rho) z0 1^T has covariance Sigma_rho
        z0 = gen.standard_normal(n)
        z *= np.sqrt(1.0 - cov.rho)
        z += np.sqrt(cov.rho) * z0[:, None]
        return z
    return z @ cov.chol.lower.T


def sample_covariates(model: EllipticalModel, n: int, rng, out: Optional[np.ndarray] = None) -> DataMatrix:
    """
    Draw n i.i.d. covariate rows from ``model``.

    ``out`` may supply an (n, d) float64 buffer to reuse across replicates.
    """
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    gen = as_stream(rng).generator
    d = model.d
    if out is None:
        z = gen.standard_normal((n, d))
    else:
        if out.shape != (n, d) or out.dtype != np.float64:
            raise ValueError("output buffer has the wrong shape or dtype")
        z = gen.standard_normal(out=out)
    x = _correlate(z, model.cov, gen)
    if model.family == STUDENT_T:
        w = gen.chisquare(model.nu, size=n)
        x /= np.sqrt(w / model.nu)[:, None]
    if np.any(model.cov.mean != 0.0):
        x += model.cov.mean
    return DataMatrix(x)


def sample_normal_errors(n: int, sigma: float, rng) -> np.ndarray:
    """n i.i.d. N(0, sigma^2) errors."""
    if not sigma > 0:
        raise NonPositiveSigma(f"sigma must be positive, got {sigma}")
    return sigma * as_stream(rng).generator.standard_normal(n)
