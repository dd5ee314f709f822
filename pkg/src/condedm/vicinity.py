"""Labelled datasets, hard vicinities and the label KDE.

Labels are scalars.  A vicinity of a target label ``y`` is the set of training
indices whose label lies within ``kappa`` of ``y``; ``kappa`` is either fixed or
grown until at least ``n_av`` samples are covered.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from .covariance import ConfigError, DomainError


class EmptyVicinityError(RuntimeError):
    """No training sample falls inside the vicinity of the requested label."""


@dataclass(frozen=True)
class LabeledDataset:
    samples: np.ndarray
    labels: np.ndarray
    label_range: tuple

    def __post_init__(self):
        x = np.atleast_2d(np.asarray(self.samples, dtype=float))
        y = np.asarray(self.labels, dtype=float).reshape(-1)
        if x.shape[0] < 1:
            raise ConfigError("dataset must contain at least one sample")
        if x.shape[0] != y.shape[0]:
            raise ConfigError(f"{x.shape[0]} samples but {y.shape[0]} labels")
        lo, hi = (float(v) for v in self.label_range)
        if lo > hi:
            raise ConfigError("label_range must satisfy lo <= hi")
        if np.any(y < lo) or np.any(y > hi):
            raise ConfigError("a label falls outside label_range")
        object.__setattr__(self, "samples", x)
        object.__setattr__(self, "labels", y)
        object.__setattr__(self, "label_range", (lo, hi))

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]

    def sigma_data(self) -> float:
        """Per-dimension standard deviation averaged to a scalar."""
        return float(np.mean(np.std(self.samples, axis=0)))


def write_dataset_csv(ds: LabeledDataset, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(["y"] + [f"x_{k + 1}" for k in range(ds.dim)])
        for yi, xi in zip(ds.labels, ds.samples):
            w.writerow([repr(float(yi))] + [repr(float(v)) for v in xi])


def read_labeled_csv(path):
    """Read a ``y,x_1,...,x_d`` file; returns (labels, samples)."""
    with open(path, newline="", encoding="utf-8") as f:
        rows = list(csv.reader(f))
    if not rows or rows[0][0].strip() != "y":
        raise ConfigError(f"{path}: expected header starting with 'y'")
    d = len(rows[0]) - 1
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        body = body.reshape(0, d + 1)
    if body.shape[1] != d + 1:
        raise ConfigError(f"{path}: ragged rows")
    return body[:, 0], body[:, 1:]


def read_dataset_csv(path, label_range=None) -> LabeledDataset:
    y, x = read_labeled_csv(path)
    if label_range is None:
        label_range = (float(y.min()), float(y.max()))
    return LabeledDataset(x, y, label_range)


@dataclass(frozen=True)
class HardFixed:
    kappa: float

    def __post_init__(self):
        if not self.kappa > 0:
            raise ConfigError("kappa must be positive")


@dataclass(frozen=True)
class HardAdaptive:
    n_av: int

    def __post_init__(self):
        if int(self.n_av) != self.n_av or self.n_av < 1:
            raise ConfigError("n_av must be a positive integer")


VicinityConfig = Union[HardFixed, HardAdaptive]


@dataclass(frozen=True)
class KdeConfig:
    sigma_kde: float

    def __post_init__(self):
        if not self.sigma_kde > 0:
            raise ConfigError("sigma_kde must be positive")


def silverman_bandwidth(labels) -> float:
    labels = np.asarray(labels, dtype=float)
    n = labels.size
    sd = float(np.std(labels, ddof=1)) if n > 1 else 0.0
    bw = 1.06 * sd * n ** (-0.2)
    if bw <= 0:
        # degenerate label set; fall back to a tiny positive width
        bw = 1e-3 * max(1.0, float(np.max(np.abs(labels))) if n else 1.0)
    return bw


def adaptive_radius(labels, y, n_av: int):
    """Smallest kappa such that at least min(n_av, N) labels lie within kappa of y.

    ``y`` may be a scalar or an array; the result has the same shape.
    """
    labels = np.asarray(labels, dtype=float).reshape(-1)
    if labels.size == 0:
        raise DomainError("empty label set")
    if n_av < 1:
        raise DomainError("n_av must be >= 1")
    k = min(int(n_av), labels.size)
    y = np.asarray(y, dtype=float)
    dist = np.abs(y[..., None] - labels)
    kappa = np.partition(dist, k - 1, axis=-1)[..., k - 1]
    span = float(labels.max() - labels.min())
    floor = np.finfo(float).eps * max(span, 1.0)
    kappa = np.maximum(kappa, floor)
    return float(kappa) if kappa.ndim == 0 else kappa


def vicinity_radius(labels, y, cfg: VicinityConfig):
    if isinstance(cfg, HardFixed):
        y = np.asarray(y, dtype=float)
        return cfg.kappa if y.ndim == 0 else np.full(y.shape, cfg.kappa)
    return adaptive_radius(labels, y, cfg.n_av)


def vicinal_weights(labels, y, cfg: VicinityConfig) -> np.ndarray:
    """Indicator weights 1{|y - y_i| <= kappa}; shape ``y.shape + (N,)``."""
    labels = np.asarray(labels, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float)
    kappa = np.asarray(vicinity_radius(labels, y, cfg), dtype=float)
    return (np.abs(y[..., None] - labels) <= kappa[..., None]).astype(float)


def kde_density(labels, y, cfg: KdeConfig):
    """Unnormalised Gaussian KDE: mean_j exp(-(y - y_j)^2 / (2 sigma_kde^2))."""
    labels = np.asarray(labels, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float)
    z = (y[..., None] - labels) / cfg.sigma_kde
    out = np.mean(np.exp(-0.5 * z * z), axis=-1)
    return float(out) if out.ndim == 0 else out


def sample_target_label(labels, cfg: KdeConfig, rng: np.random.Generator) -> float:
    labels = np.asarray(labels, dtype=float).reshape(-1)
    j = rng.integers(labels.size)
    return float(labels[j] + cfg.sigma_kde * rng.standard_normal())


def sample_vicinal_index(ds: LabeledDataset, y: float, cfg: VicinityConfig,
                         rng: np.random.Generator) -> int:
    w = vicinal_weights(ds.labels, y, cfg)
    idx = np.flatnonzero(w)
    if idx.size == 0:
        raise EmptyVicinityError(f"empty vicinity at y={y!r} (kappa={getattr(cfg, 'kappa', None)})")
    return int(idx[rng.integers(idx.size)])

