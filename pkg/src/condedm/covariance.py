"""Condition-specific diagonal covariance family.

Every covariance-like object (Sigma, its time derivative, the diffusion
coefficient G and the square root of Sigma) is diagonal, so it is stored as
a length-d vector.  Functions broadcast over leading batch axes: a scalar
``sigma`` with a scalar ``y`` gives shape ``(d,)``; arrays of shape ``(B,)``
give ``(B, d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np


class ConfigError(ValueError):
    """Invalid configuration (bad embedding, inconsistent dimensions, ...)."""


class DomainError(ValueError):
    """Argument outside the mathematical domain of an operation."""


EMBEDDING_KINDS = ("constant", "affine", "sinusoidal")


@dataclass(frozen=True)
class EmbeddingSpec:
    """Deterministic parametric label embedding h(y).

    constant:   h_i = a_i
    affine:     h_i = a_i + b_i * y
    sinusoidal: h_i = a_i + b_i * sin(w_i * y)

    Parameter sequences of length 1 are broadcast to the data dimension.
    """

    kind: str = "affine"
    offsets: tuple = (0.0,)
    slopes: tuple = (1.0,)
    freqs: tuple = (1.0,)

    def __post_init__(self):
        if self.kind not in EMBEDDING_KINDS:
            raise ConfigError(f"unknown embedding kind {self.kind!r}")
        for name in ("offsets", "slopes", "freqs"):
            object.__setattr__(self, name, tuple(float(v) for v in np.atleast_1d(getattr(self, name))))

    def params(self, d: int):
        a = _broadcast(self.offsets, d, "offsets")
        b = _broadcast(self.slopes, d, "slopes")
        w = _broadcast(self.freqs, d, "freqs")
        return a, b, w

    def check_range(self, d: int, label_range: Sequence[float]) -> None:
        """Raise ConfigError if h(y) can go negative for some y in the range."""
        a, b, w = self.params(d)
        lo, hi = label_range
        if self.kind == "constant":
            worst = a
        elif self.kind == "affine":
            worst = np.minimum(a + b * lo, a + b * hi)
        else:
            worst = a - np.abs(b)
        if np.any(worst < 0):
            raise ConfigError(
                f"{self.kind} embedding is negative on label range [{lo}, {hi}]"
            )


def _broadcast(values, d: int, name: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 1:
        return np.full(d, float(arr.reshape(-1)[0]))
    if arr.size != d:
        raise ConfigError(f"embedding {name} has length {arr.size}, expected 1 or {d}")
    return arr


@dataclass(frozen=True)
class CovParams:
    dim: int
    lambda_y: float = 0.0
    sigma_data: float = 0.5
    embedding: EmbeddingSpec = field(default_factory=EmbeddingSpec)

    def __post_init__(self):
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        if self.lambda_y < 0:
            raise ConfigError("lambda_y must be non-negative")
        if self.sigma_data <= 0:
            raise ConfigError("sigma_data must be positive")


def embed_label(y, spec: EmbeddingSpec, d: int) -> np.ndarray:
    """Evaluate the non-negative label embedding h(y); shape ``y.shape + (d,)``."""
    if d < 1:
        raise ConfigError("d must be >= 1")
    a, b, w = spec.params(d)
    y = np.asarray(y, dtype=float)[..., None]
    if spec.kind == "constant":
        h = np.broadcast_to(a, y.shape[:-1] + (d,)).copy()
    elif spec.kind == "affine":
        h = a + b * y
    else:
        h = a + b * np.sin(w * y)
    if np.any(h < 0):
        raise ConfigError("label embedding produced a negative entry")
    return h


def squash_embedding(h) -> np.ndarray:
    """Map a non-negative embedding into (0, 1] with exp(-h)."""
    return np.exp(-np.asarray(h, dtype=float))


def _htilde(y, p: CovParams) -> np.ndarray:
    return squash_embedding(embed_label(y, p.embedding, p.dim))


def sigma_mat(sigma, y, p: CovParams) -> np.ndarray:
    """Sigma(sigma, y)_ii = sigma^2 + lambda_y * htilde_i(y) * sigma."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0):
        raise DomainError("sigma must be positive")
    s = s[..., None]
    return s * s + p.lambda_y * _htilde(y, p) * s


def sigma_dot_mat(sigma, sigma_dot, y, p: CovParams) -> np.ndarray:
    """Time derivative of Sigma: 2 sigma' sigma + lambda_y htilde_i sigma'."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s <= 0):
        raise DomainError("sigma must be positive")
    s = s[..., None]
    sd = np.asarray(sigma_dot, dtype=float)[..., None]
    return 2.0 * sd * s + p.lambda_y * _htilde(y, p) * sd


def g_coeff(sigma, sigma_dot, y, p: CovParams) -> np.ndarray:
    """Diagonal diffusion coefficient G with G*G = dSigma/dt.

    ``sigma = 0`` is accepted here (the forward SDE starts at t = 0).
    """
    s = np.asarray(sigma, dtype=float)[..., None]
    sd = np.asarray(sigma_dot, dtype=float)[..., None]
    radicand = 2.0 * sd * s + p.lambda_y * _htilde(y, p) * sd
    if np.any(radicand < 0):
        raise DomainError("negative radicand in diffusion coefficient (check sign of sigma_dot)")
    return np.sqrt(radicand)


def sigma_sqrt(S) -> np.ndarray:
    S = np.asarray(S, dtype=float)
    if np.any(S < 0):
        raise DomainError("covariance has a negative entry")
    return np.sqrt(S)
