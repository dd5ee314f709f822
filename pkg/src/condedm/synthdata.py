"""Synthetic regression-conditioned datasets with known conditionals.

* ``gaussian_shift``: y ~ U(label_range), x | y ~ N(y * u, s^2 I)
* ``ring``: 2-D, angle theta(y) mapped linearly from label_range onto
  [0, pi/2), x = r (cos theta, sin theta) + s z
* ``imbalanced_shift``: gaussian_shift with labels drawn from a mixture of a
  narrow truncated normal at the range centre and a uniform floor, so the
  ends of the range are sparsely populated.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .covariance import ConfigError
from .vicinity import LabeledDataset

DATASET_KINDS = ("gaussian_shift", "ring", "imbalanced_shift")


@dataclass(frozen=True)
class DatasetSpec:
    kind: str = "gaussian_shift"
    n_samples: int = 2000
    d: int = 2
    label_range: tuple = (0.0, 1.0)
    noise_std: float = 0.1
    radius: float = 1.0
    direction: tuple | None = None
    # imbalanced_shift label density: weight and relative width of the central bump
    center_weight: float = 0.9
    center_width: float = 0.08
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DATASET_KINDS:
            raise ConfigError(f"unknown dataset kind {self.kind!r}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ConfigError("n_samples must be a positive integer")
        if self.d < 1:
            raise ConfigError("d must be >= 1")
        if self.kind == "ring" and self.d != 2:
            raise ConfigError("ring dataset is 2-dimensional")
        if not self.noise_std >= 0:
            raise ConfigError("noise_std must be non-negative")
        if not self.radius > 0:
            raise ConfigError("radius must be positive")
        lo, hi = (float(v) for v in self.label_range)
        if not hi > lo:
            raise ConfigError("label_range must have hi > lo")
        object.__setattr__(self, "label_range", (lo, hi))
        if not 0.0 <= self.center_weight <= 1.0 or not self.center_width > 0:
            raise ConfigError("invalid imbalanced label density parameters")

    @property
    def unit_direction(self) -> np.ndarray:
        if self.direction is None:
            u = np.ones(self.d)
        else:
            u = np.asarray(self.direction, dtype=float)
            if u.shape != (self.d,):
                raise ConfigError(f"direction must have length {self.d}")
        nrm = np.linalg.norm(u)
        if nrm == 0:
            raise ConfigError("direction must be nonzero")
        return u / nrm

    def mean(self, y) -> np.ndarray:
        """Conditional mean of the shift datasets, m(y) = y u."""
        return np.asarray(y, dtype=float)[..., None] * self.unit_direction

    def ring_angle(self, y) -> np.ndarray:
        lo, hi = self.label_range
        return (np.asarray(y, dtype=float) - lo) / (hi - lo) * (np.pi / 2)

    def label_distribution(self):
        """Frozen scipy distribution of the labels (or a mixture description)."""
        lo, hi = self.label_range
        if self.kind != "imbalanced_shift":
            return stats.uniform(lo, hi - lo)
        c = 0.5 * (lo + hi)
        w = self.center_width * (hi - lo)
        return stats.truncnorm((lo - c) / w, (hi - c) / w, loc=c, scale=w)

    def label_cdf(self, y) -> np.ndarray:
        lo, hi = self.label_range
        uni = stats.uniform(lo, hi - lo)
        if self.kind != "imbalanced_shift":
            return uni.cdf(y)
        return self.center_weight * self.label_distribution().cdf(y) + (1 - self.center_weight) * uni.cdf(y)


def sample_labels(spec: DatasetSpec, n: int, rng: np.random.Generator) -> np.ndarray:
    lo, hi = spec.label_range
    if spec.kind != "imbalanced_shift":
        return rng.uniform(lo, hi, size=n)
    bump = spec.label_distribution()
    from_bump = rng.random(n) < spec.center_weight
    y = rng.uniform(lo, hi, size=n)
    nb = int(from_bump.sum())
    if nb:
        y[from_bump] = bump.rvs(size=nb, random_state=rng)
    return y


def sample_given_labels(spec: DatasetSpec, y, rng: np.random.Generator) -> np.ndarray:
    y = np.asarray(y, dtype=float).reshape(-1)
    z = rng.standard_normal((y.size, spec.d))
    if spec.kind == "ring":
        th = spec.ring_angle(y)
        centre = spec.radius * np.stack([np.cos(th), np.sin(th)], axis=-1)
    else:
        centre = spec.mean(y)
    return centre + spec.noise_std * z


def generate(spec: DatasetSpec, rng: np.random.Generator | None = None) -> LabeledDataset:
    if rng is None:
        rng = np.random.default_rng(spec.seed)
    y = sample_labels(spec, spec.n_samples, rng)
    x = sample_given_labels(spec, y, rng)
    return LabeledDataset(x, y, spec.label_range)


@dataclass(frozen=True)
class AnalyticOracle:
    """Exact noised conditional for the Gaussian-shift family."""

    spec: DatasetSpec

    def __post_init__(self):
        if self.spec.kind not in ("gaussian_shift", "imbalanced_shift"):
            raise ConfigError(f"no analytic oracle for {self.spec.kind!r} data")

    def __call__(self, x, y, Sigma, cond=True):
        return analytic_denoiser(self, x, y, Sigma)


def analytic_score(oracle: AnalyticOracle, x, y, Sigma) -> np.ndarray:
    """Score of N(m(y), s^2 I + Sigma) at x."""
    if not isinstance(oracle, AnalyticOracle):
        raise ConfigError("analytic score needs a Gaussian oracle")
    x = np.asarray(x, dtype=float)
    var = oracle.spec.noise_std ** 2 + np.asarray(Sigma, dtype=float)
    return -(x - oracle.spec.mean(y)) / var


def analytic_denoiser(oracle: AnalyticOracle, x, y, Sigma) -> np.ndarray:
    """Posterior mean E[x0 | x, y] = x + Sigma * score."""
    x = np.asarray(x, dtype=float)
    Sigma = np.asarray(Sigma, dtype=float)
    s2 = oracle.spec.noise_std ** 2
    m = oracle.spec.mean(y)
    # s2/(s2+S) x + S/(s2+S) m; written this way to stay exact as S -> inf
    return (s2 * x + Sigma * m) / (s2 + Sigma)
