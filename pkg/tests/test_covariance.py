import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condedm.covariance import (
    ConfigError,
    CovParams,
    DomainError,
    EmbeddingSpec,
    embed_label,
    g_coeff,
    sigma_dot_mat,
    sigma_mat,
    sigma_sqrt,
    squash_embedding,
)

sigmas = st.floats(1e-3, 1e2)
labels = st.floats(0.0, 1.0)
lambdas = st.floats(0.0, 10.0)


def const_cov(d, lam, h):
    """Covariance params whose squashed embedding is exp(-h) in every entry."""
    return CovParams(d, lambda_y=lam, embedding=EmbeddingSpec("constant", (h,)))


# -- embedding ------------------------------------------------------------

def test_constant_zero_embedding():
    assert np.array_equal(embed_label(0.7, EmbeddingSpec("constant", (0.0,)), 3), np.zeros(3))


def test_affine_embedding_values():
    h = embed_label(0.5, EmbeddingSpec("affine", (1.0, 1.0), (2.0, 0.0)), 2)
    assert h.tolist() == [2.0, 1.0]


def test_sinusoidal_periodic():
    spec = EmbeddingSpec("sinusoidal", (1.0,), (0.5,), (2.0,))
    period = 2 * math.pi / 2.0
    np.testing.assert_allclose(embed_label(0.3, spec, 2), embed_label(0.3 + period, spec, 2), rtol=1e-14)


def test_negative_embedding_rejected():
    with pytest.raises(ConfigError):
        embed_label(0.5, EmbeddingSpec("affine", (0.0,), (-1.0,)), 2)
    with pytest.raises(ConfigError):
        EmbeddingSpec("sinusoidal", (0.1,), (1.0,)).check_range(2, (0, 1))


def test_embedding_length_mismatch():
    with pytest.raises(ConfigError):
        embed_label(0.5, EmbeddingSpec("affine", (0.0, 1.0, 2.0)), 2)


def test_unknown_kind():
    with pytest.raises(ConfigError):
        EmbeddingSpec("cubic")


def test_squash_values():
    assert squash_embedding(np.zeros(2)).tolist() == [1.0, 1.0]
    assert squash_embedding(math.log(2)) == pytest.approx(0.5, abs=1e-15)
    assert 0 < squash_embedding(50.0) < 1e-21


@given(st.floats(0, 50), st.floats(1e-6, 50))
def test_squash_decreasing_into_unit_interval(h, dh):
    a, b = squash_embedding(h), squash_embedding(h + dh)
    assert 0 < a <= 1
    assert b < a


# -- sigma_mat and friends -------------------------------------------------

def test_sigma_mat_examples():
    assert sigma_mat(2.0, 0.3, CovParams(3, 0.0)).tolist() == [4.0] * 3
    assert sigma_mat(1.0, 0.3, const_cov(2, 1.0, 0.0)).tolist() == [2.0, 2.0]
    assert sigma_mat(1.0, 0.3, const_cov(2, 2.5, math.log(2))) == pytest.approx([2.25, 2.25], abs=1e-15)


def test_sigma_dot_examples():
    assert sigma_dot_mat(3.0, 1.0, 0.2, CovParams(2, 0.0)).tolist() == [6.0, 6.0]
    assert sigma_dot_mat(1.0, 1.0, 0.2, const_cov(2, 1.0, 0.0)).tolist() == [3.0, 3.0]


def test_g_coeff_examples():
    assert g_coeff(2.0, 1.0, 0.1, CovParams(2, 0.0)).tolist() == [2.0, 2.0]
    assert g_coeff(0.5, 1.0, 0.1, const_cov(1, 1.0, 0.0))[0] == pytest.approx(1.41421356, abs=1e-8)


def test_g_coeff_accepts_zero_sigma_and_rejects_negative_radicand():
    assert g_coeff(0.0, 1.0, 0.5, CovParams(2, 0.0)).tolist() == [0.0, 0.0]
    with pytest.raises(DomainError):
        g_coeff(1.0, -1.0, 0.5, CovParams(2, 0.0))


def test_sigma_sqrt_examples():
    assert sigma_sqrt(np.ones(3)).tolist() == [1.0] * 3
    assert sigma_sqrt([4.0, 9.0]).tolist() == [2.0, 3.0]
    with pytest.raises(DomainError):
        sigma_sqrt([1.0, -1.0])


@pytest.mark.parametrize("bad", [0.0, -1.0])
def test_sigma_mat_rejects_nonpositive(bad):
    with pytest.raises(DomainError):
        sigma_mat(bad, 0.5, CovParams(2, 1.0))
    with pytest.raises(DomainError):
        sigma_dot_mat(bad, 1.0, 0.5, CovParams(2, 1.0))


def test_covparams_validation():
    with pytest.raises(ConfigError):
        CovParams(0)
    with pytest.raises(ConfigError):
        CovParams(2, lambda_y=-0.1)
    with pytest.raises(ConfigError):
        CovParams(2, sigma_data=0.0)


def test_batch_shapes():
    p = CovParams(3, 1.0)
    assert sigma_mat(np.array([0.1, 0.2]), np.array([0.3, 0.4]), p).shape == (2, 3)
    assert sigma_mat(0.5, np.array([0.3, 0.4, 0.5, 0.6]), p).shape == (4, 3)
    assert sigma_mat(0.5, 0.3, p).shape == (3,)


# -- properties ------------------------------------------------------------

@given(sigmas, labels, lambdas)
def test_sigma_at_least_sigma_squared(s, y, lam):
    p = CovParams(3, lam, embedding=EmbeddingSpec("affine", (0.0, 0.5, 1.0), (1.0, 2.0, 0.0)))
    S = sigma_mat(s, y, p)
    assert np.all(S >= s * s)
    assert np.all(S > 0)
    assert np.all(sigma_dot_mat(s, 1.0, y, p) > 0)
    assert np.all(g_coeff(s, 1.0, y, p) > 0)


@given(sigmas, labels, st.floats(1e-3, 10.0))
def test_edm_reduction_exact(s, y, sdot):
    p = CovParams(4, 0.0)
    assert np.array_equal(sigma_mat(s, y, p), np.full(4, s * s))
    assert np.array_equal(g_coeff(s, sdot, y, p), np.full(4, math.sqrt(2 * sdot * s)))


@given(sigmas, labels, lambdas)
def test_g_squared_is_sigma_dot(s, y, lam):
    p = CovParams(2, lam, embedding=EmbeddingSpec("sinusoidal", (1.0,), (0.5,), (3.0,)))
    g = g_coeff(s, 1.0, y, p)
    np.testing.assert_allclose(g * g, sigma_dot_mat(s, 1.0, y, p), rtol=1e-14)


@given(sigmas, labels, lambdas)
def test_sqrt_squares_back(s, y, lam):
    S = sigma_mat(s, y, CovParams(2, lam))
    r = sigma_sqrt(S)
    np.testing.assert_allclose(r * r, S, rtol=1e-14)


def test_finite_difference_of_sigma_matches_derivative():
    rng = np.random.default_rng(0)
    eps = 1e-4
    for _ in range(120):
        t = rng.uniform(0.01, 20.0)
        y = rng.uniform(0, 1)
        p = CovParams(3, rng.uniform(0, 5), embedding=EmbeddingSpec("affine", (0.2,), (1.5,)))
        fd = (sigma_mat(t + eps, y, p) - sigma_mat(t - eps, y, p)) / (2 * eps)
        np.testing.assert_allclose(fd, sigma_dot_mat(t, 1.0, y, p), rtol=1e-6)
