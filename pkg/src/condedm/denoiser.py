"""Denoisers D(x, y, Sigma) and the vicinal training objective.

Two realisations share the call signature ``D(x, y, Sigma, cond=True)``:

* :class:`ClosedFormDenoiser` -- the exact minimiser of the vicinal denoising
  loss, a responsibility-weighted average of in-vicinity training points.
* :class:`TrainableDenoiser` -- a preconditioned MLP trained with the
  noise-weighted vicinal loss.

``cond=False`` evaluates the unconditional branch used by classifier-free
guidance.
"""
from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covariance import ConfigError, CovParams, DomainError, sigma_mat
from .network import MLP, label_features, noise_features
from .vicinity import (
    EmptyVicinityError,
    HardFixed,
    KdeConfig,
    LabeledDataset,
    VicinityConfig,
    sample_target_label,
    sample_vicinal_index,
    vicinal_weights,
    vicinity_radius,
)

log = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-300


def _check_sigma(Sigma) -> np.ndarray:
    Sigma = np.asarray(Sigma, dtype=float)
    if np.any(~(Sigma >= SIGMA_FLOOR)):
        raise DomainError("covariance entries must be positive")
    return Sigma


# ---------------------------------------------------------------------------
# closed-form vicinal denoiser
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormDenoiser:
    """Optimal denoiser of the vicinal loss over a finite labelled dataset.

    ``on_empty`` decides what happens when a label has an empty vicinity:
    ``"raise"`` (default) raises :class:`EmptyVicinityError`;
    ``"unconditional"`` falls back to the whole dataset for that row.
    """

    dataset: LabeledDataset
    vicinity: VicinityConfig = HardFixed(np.inf)
    on_empty: str = "raise"

    def __post_init__(self):
        if self.on_empty not in ("raise", "unconditional"):
            raise ConfigError(f"unknown on_empty policy {self.on_empty!r}")
        order = np.argsort(self.dataset.labels, kind="stable")
        object.__setattr__(self, "_order", order)
        object.__setattr__(self, "_sorted_labels", self.dataset.labels[order])

    def weights(self, y, cond=True) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        if not cond:
            return np.ones(y.shape + (self.dataset.n,))
        return vicinal_weights(self.dataset.labels, y, self.vicinity)

    def starved(self, y) -> np.ndarray:
        """Boolean mask of labels whose vicinity is empty."""
        return self.weights(y).sum(axis=-1) == 0

    def members(self, y):
        """Padded in-vicinity indices for a batch of labels.

        Returns ``(idx, mask)`` of shape ``(B, K)``; ``mask`` marks real members.
        Candidates come from a binary search over the sorted labels and are then
        filtered with the exact test ``|y - y_i| <= kappa``.
        """
        y = np.atleast_1d(np.asarray(y, dtype=float))
        labels = self._sorted_labels
        kappa = np.atleast_1d(np.asarray(vicinity_radius(labels, y, self.vicinity), dtype=float))
        kappa = np.broadcast_to(kappa, y.shape)
        finite = np.isfinite(kappa)
        slack = 8 * np.finfo(float).eps * (np.abs(y) + np.where(finite, kappa, 0.0) + 1.0)
        lo = np.where(finite, np.searchsorted(labels, y - kappa - slack, "left"), 0)
        hi = np.where(finite, np.searchsorted(labels, y + kappa + slack, "right"), labels.size)
        K = max(int(np.max(hi - lo)), 1)
        pos = lo[:, None] + np.arange(K)
        inside = pos < hi[:, None]
        pos = np.minimum(pos, labels.size - 1)
        mask = inside & (np.abs(y[:, None] - labels[pos]) <= kappa[:, None])
        return self._order[pos], mask

    def __call__(self, x, y, Sigma, cond=True):
        return closed_form_denoise(self, x, y, Sigma, cond=cond)


def closed_form_denoise(cf: ClosedFormDenoiser, x, y, Sigma, cond=True) -> np.ndarray:
    """Responsibility-weighted mean of in-vicinity samples.

    ``x`` has shape ``(d,)`` or ``(B, d)``; ``y`` is a scalar or ``(B,)``;
    ``Sigma`` is ``(d,)`` or ``(B, d)``.  Responsibilities are normalised in
    the log domain so tiny Sigma never underflows to 0/0.
    """
    Sigma = _check_sigma(Sigma)
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    xb = np.atleast_2d(x)
    B, n = xb.shape[0], cf.dataset.n
    X = cf.dataset.samples
    if cond:
        yb = np.broadcast_to(np.asarray(y, dtype=float), (B,))
        idx, mask = cf.members(yb)
        empty = ~mask.any(axis=1)
        if empty.any():
            if cf.on_empty != "unconditional":
                raise EmptyVicinityError(f"{int(empty.sum())} label(s) have an empty vicinity")
            if empty.all():
                idx, mask = np.broadcast_to(np.arange(n), (B, n)), np.ones((B, n), bool)
            else:
                # pad every row to N so starved rows can use the whole dataset
                full = np.broadcast_to(np.arange(n), (B, n))
                pad = n - idx.shape[1]
                idx = np.concatenate([idx, np.zeros((B, pad), int)], axis=1) if pad > 0 else idx
                mask = np.concatenate([mask, np.zeros((B, pad), bool)], axis=1) if pad > 0 else mask
                idx = np.where(empty[:, None], full, idx)
                mask = np.where(empty[:, None], True, mask)
    else:
        idx, mask = np.broadcast_to(np.arange(n), (B, n)), np.ones((B, n), bool)

    pts = X[idx]
    Sb = np.broadcast_to(Sigma, xb.shape)
    diff = xb[:, None, :] - pts
    logp = -0.5 * np.sum(diff * diff / Sb[:, None, :], axis=-1)
    logp = np.where(mask, logp, -np.inf)
    logp -= logp.max(axis=-1, keepdims=True)
    r = np.exp(logp)
    r /= r.sum(axis=-1, keepdims=True)
    out = np.einsum("bk,bkd->bd", r, pts)
    return out[0] if single else out


def vicinal_score(cf: ClosedFormDenoiser, x, y, Sigma, cond=True) -> np.ndarray:
    """Score of the vicinal noised density: Sigma^{-1} (D*(x) - x)."""
    Sigma = _check_sigma(Sigma)
    return (closed_form_denoise(cf, x, y, Sigma, cond=cond) - np.asarray(x, dtype=float)) / Sigma


# ---------------------------------------------------------------------------
# preconditioning
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PrecondCoeffs:
    c_in: np.ndarray
    c_skip: np.ndarray
    c_out: np.ndarray
    c_noise: np.ndarray


def precond_coeffs(Sigma, sigma_data: float) -> PrecondCoeffs:
    Sigma = np.asarray(Sigma, dtype=float)
    if np.any(~(Sigma > 0)):
        raise DomainError("preconditioning needs Sigma > 0")
    sd2 = sigma_data * sigma_data
    tot = sd2 + Sigma
    return PrecondCoeffs(
        c_in=1.0 / np.sqrt(tot),
        c_skip=sd2 / tot,
        c_out=sigma_data * np.sqrt(Sigma) / np.sqrt(tot),
        c_noise=0.25 * np.log(Sigma),
    )


def noise_weight(Sigma, sigma_data: float) -> np.ndarray:
    """Per-dimension loss weight (Sigma + sd^2) / (sd^2 Sigma)."""
    Sigma = np.asarray(Sigma, dtype=float)
    if np.any(~(Sigma > 0)):
        raise DomainError("noise weight needs Sigma > 0")
    sd2 = sigma_data * sigma_data
    return (Sigma + sd2) / (sd2 * Sigma)


# ---------------------------------------------------------------------------
# trainable denoiser
# ---------------------------------------------------------------------------

class TrainableDenoiser:
    """Preconditioned network: D = c_skip x + c_out F(c_in x, y, c_noise)."""

    def __init__(self, net: MLP, sigma_data: float, label_range):
        self.net = net
        self.sigma_data = float(sigma_data)
        self.label_range = tuple(float(v) for v in label_range)

    @classmethod
    def create(cls, d, sigma_data, label_range, width=64, depth=3, seed=0, out_scale=1.0):
        return cls(MLP(d, width, depth, np.random.default_rng(seed), out_scale), sigma_data, label_range)

    def _inputs(self, x, y, Sigma, drop):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        B = x.shape[0]
        Sigma = np.broadcast_to(np.asarray(Sigma, dtype=float), x.shape)
        c = precond_coeffs(Sigma, self.sigma_data)
        yb = np.broadcast_to(np.asarray(y, dtype=float), (B,))
        drop = np.broadcast_to(np.asarray(drop, dtype=bool), (B,))
        inp = self.net.assemble(c.c_in * x, label_features(yb, self.label_range),
                                noise_features(c.c_noise), drop)
        return x, c, inp, drop

    def __call__(self, x, y, Sigma, cond=True):
        return precond_denoise(self, x, y, Sigma, cond=cond)

    def copy(self):
        return TrainableDenoiser(self.net.copy(), self.sigma_data, self.label_range)

    def save(self, path, config_hash: str = "") -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        payload = {
            "format": "condedm-mlp-v1",
            "layer_shapes": self.net.layer_shapes,
            "null_token_size": int(self.net.null_token.size),
            "sigma_data": self.sigma_data,
            "label_range": list(self.label_range),
            "config_hash": config_hash,
            "params": [float(v) for v in self.net.get_flat()],
        }
        path.write_text(json.dumps(payload) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "TrainableDenoiser":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        shapes = payload["layer_shapes"]
        d = shapes[-1][1]
        net = MLP(d, width=shapes[0][1], depth=len(shapes) - 1)
        if net.layer_shapes != shapes:
            raise ConfigError(f"{path}: unsupported layer shapes {shapes}")
        net.set_flat(payload["params"])
        return cls(net, payload["sigma_data"], payload["label_range"])


def precond_denoise(td: TrainableDenoiser, x, y, Sigma, cond=True) -> np.ndarray:
    single = np.ndim(x) == 1
    xb, c, inp, _ = td._inputs(x, y, Sigma, not cond)
    F, _ = td.net.forward(inp)
    out = c.c_skip * xb + c.c_out * F
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite denoiser output")
    return out[0] if single else out


# ---------------------------------------------------------------------------
# vicinal training loss
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class LossConfig:
    p_mean: float = -1.2
    p_std: float = 1.2
    sigma_data: float = 0.5
    batch_size: int = 64
    label_drop_prob: float = 0.1

    def __post_init__(self):
        if not self.p_std >= 0:
            raise ConfigError("p_std must be non-negative")
        if not self.sigma_data > 0:
            raise ConfigError("sigma_data must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not 0.0 <= self.label_drop_prob <= 1.0:
            raise ConfigError("label_drop_prob must lie in [0, 1]")


def sample_sigma(cfg: LossConfig, rng: np.random.Generator) -> float:
    """Log-normal noise level: ln sigma ~ N(p_mean, p_std^2)."""
    return float(np.exp(cfg.p_mean + cfg.p_std * rng.standard_normal()))


@dataclass
class VicinalBatch:
    x0: np.ndarray
    x_noisy: np.ndarray
    y: np.ndarray
    sigma: np.ndarray
    Sigma: np.ndarray
    drop: np.ndarray
    index: np.ndarray


def draw_vicinal_batch(ds: LabeledDataset, vic: VicinityConfig, kde: KdeConfig,
                       cov: CovParams, cfg: LossConfig, rng: np.random.Generator,
                       max_retries: int = 100) -> VicinalBatch:
    """Draw one training batch from the KDE-vicinal joint estimate.

    Target labels are clipped into the dataset's label range so the label
    embedding stays inside its validated domain.
    """
    lo, hi = ds.label_range
    B = cfg.batch_size
    ys = np.empty(B)
    idx = np.empty(B, dtype=int)
    sig = np.empty(B)
    for b in range(B):
        sig[b] = sample_sigma(cfg, rng)
        for _ in range(max_retries):
            yb = min(max(sample_target_label(ds.labels, kde, rng), lo), hi)
            try:
                idx[b] = sample_vicinal_index(ds, yb, vic, rng)
                break
            except EmptyVicinityError:
                continue
        else:
            raise EmptyVicinityError(f"no non-empty vicinity after {max_retries} label draws")
        ys[b] = yb
    Sigma = sigma_mat(sig, ys, cov)
    x0 = ds.samples[idx]
    x_noisy = x0 + np.sqrt(Sigma) * rng.standard_normal(x0.shape)
    drop = rng.random(B) < cfg.label_drop_prob
    return VicinalBatch(x0, x_noisy, ys, sig, Sigma, drop, idx)


def batch_loss_and_grad(td: TrainableDenoiser, batch: VicinalBatch, need_grad=True):
    """Mean over the batch of ||Lambda^{1/2} (D(x_noisy) - x0)||^2 and its gradient."""
    xb, c, inp, drop = td._inputs(batch.x_noisy, batch.y, batch.Sigma, batch.drop)
    F, cache = td.net.forward(inp)
    D = c.c_skip * xb + c.c_out * F
    lam = noise_weight(batch.Sigma, td.sigma_data)
    resid = D - batch.x0
    B = xb.shape[0]
    loss = float(np.sum(lam * resid * resid) / B)
    if not need_grad:
        return loss, None
    dF = (2.0 / B) * lam * resid * c.c_out
    grads = td.net.backward(dF, cache, drop)
    return loss, np.concatenate([g.ravel() for g in grads])


def vicinal_loss_batch(td, ds, vic, kde, cov, cfg, rng):
    return batch_loss_and_grad(td, draw_vicinal_batch(ds, vic, kde, cov, cfg, rng))


class TrainingDivergedError(FloatingPointError):
    def __init__(self, step, trace):
        super().__init__(f"non-finite loss at step {step}")
        self.step = step
        self.trace = trace


def train(td: TrainableDenoiser, ds, vic, kde, cov, cfg: LossConfig, steps: int,
          lr: float, rng: np.random.Generator, log_every: int = 0):
    """Plain SGD on the vicinal loss.  Returns (trained copy, per-step losses)."""
    if steps < 0:
        raise ConfigError("steps must be >= 0")
    td = td.copy()
    theta = td.net.get_flat()
    trace = []
    for step in range(steps):
        loss, grad = vicinal_loss_batch(td, ds, vic, kde, cov, cfg, rng)
        if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
            raise TrainingDivergedError(step, trace)
        trace.append(loss)
        theta -= lr * grad
        td.net.set_flat(theta)
        if log_every and step % log_every == 0:
            log.info("step %d loss %.5f", step, loss)
    return td, np.asarray(trace)
