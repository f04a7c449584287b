import numpy as np
import pytest
from scipy import stats

from optsub.distributions import EllipticalModel, RngStream, as_stream, sample_covariates, sample_normal_errors
from optsub.errors import NonPositiveSigma
from optsub.linalg import CovSpec, mahalanobis_all


def test_same_key_same_stream():
    a = RngStream(42, 7).generator.standard_normal(5)
    b = RngStream(42, 7).generator.standard_normal(5)
    assert np.array_equal(a, b)


def test_distinct_streams_differ():
    a = RngStream(42, 7).generator.standard_normal(5)
    b = RngStream(42, 8).generator.standard_normal(5)
    c = RngStream(43, 7).generator.standard_normal(5)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)


def test_jumped_stream_is_disjoint_and_reproducible():
    s = RngStream(1, 2)
    j1 = s.jumped().generator.standard_normal(4)
    j2 = RngStream(1, 2).jumped().generator.standard_normal(4)
    assert np.array_equal(j1, j2)
    assert not np.array_equal(j1, RngStream(1, 2).generator.standard_normal(4))


def test_as_stream_accepts_ints():
    assert as_stream(5).seed == 5
    assert as_stream(None).seed == 0


def test_normal_moments():
    X = sample_covariates(EllipticalModel.normal(CovSpec.identity(2)), 100_000, RngStream(1)).values
    assert np.max(np.abs(X.mean(axis=0))) < 0.02
    assert np.max(np.abs(np.cov(X.T) - np.eye(2))) < 0.03


@pytest.mark.parametrize("rho", [0.05, 0.5, -0.2])
def test_compound_symmetry_moments(rho):
    cov = CovSpec.compound_symmetry(4, rho, mean=np.arange(4.0))
    X = sample_covariates(EllipticalModel.normal(cov), 200_000, RngStream(2)).values
    assert np.max(np.abs(X.mean(axis=0) - np.arange(4.0))) < 0.02
    assert np.max(np.abs(np.cov(X.T) - cov.dispersion)) < 0.03


def test_student_t_covariance():
    cov = CovSpec.general(np.array([[1.0, 0.3], [0.3, 2.0]]))
    X = sample_covariates(EllipticalModel.student_t(5, cov), 400_000, RngStream(3)).values
    assert np.allclose(np.cov(X.T), 5 / 3 * cov.dispersion, atol=0.06)


def test_student_t3_covariance_scale():
    # nu = 3 has infinite fourth moments, so the tolerance is loose
    X = sample_covariates(EllipticalModel.student_t(3, CovSpec.identity(2)), 400_000, RngStream(4)).values
    assert np.allclose(np.diag(np.cov(X.T)), 3.0, rtol=0.15)


def test_student_t_radius_is_f_distributed():
    d, nu = 4, 3.0
    cov = CovSpec.compound_symmetry(d, 0.5)
    X = sample_covariates(EllipticalModel.student_t(nu, cov), 100_000, RngStream(5))
    r = mahalanobis_all(X, cov) / d
    ks = stats.kstest(r, stats.f(d, nu).cdf).statistic
    assert ks < 0.01


def test_sampler_bitwise_reproducible_and_buffer():
    model = EllipticalModel.normal(CovSpec.compound_symmetry(3, 0.5))
    a = sample_covariates(model, 1000, RngStream(9, 1)).values
    buf = np.empty((1000, 3))
    b = sample_covariates(model, 1000, RngStream(9, 1), out=buf).values
    assert np.array_equal(a, b)
    assert np.shares_memory(b, buf)


def test_t_requires_finite_variance():
    with pytest.raises(ValueError):
        EllipticalModel.student_t(2.0, CovSpec.identity(2))


def test_errors_variance_and_scaling():
    e1 = sample_normal_errors(100_000, 1.0, RngStream(6))
    assert abs(e1.var() - 1.0) < 0.02
    e2 = sample_normal_errors(100_000, 2.0, RngStream(6))
    assert np.array_equal(e2, 2.0 * e1)


def test_errors_reject_non_positive_sigma():
    with pytest.raises(NonPositiveSigma):
        sample_normal_errors(3, 0.0, RngStream(0))
