"""Small fully connected regressor with hand-written backpropagation.

The network maps a feature row ``[c_in * x, label features, noise features]``
to R^d.  Hidden layers use SiLU.  Gradients are derived by hand and checked
against finite differences in the test-suite.
"""
from __future__ import annotations

import numpy as np

N_LABEL_FREQS = 3
LABEL_FEATURES = 1 + 2 * N_LABEL_FREQS
NOISE_FEATURES = 3


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def silu(z):
    return z * _sigmoid(z)


def silu_grad(z):
    s = _sigmoid(z)
    return s * (1.0 + z * (1.0 - s))


def label_features(y, label_range) -> np.ndarray:
    """Sinusoidal features of the label rescaled to [-1, 1]; shape ``(B, LABEL_FEATURES)``."""
    lo, hi = label_range
    span = hi - lo if hi > lo else 1.0
    u = 2.0 * (np.asarray(y, dtype=float).reshape(-1) - lo) / span - 1.0
    cols = [u]
    for k in range(N_LABEL_FREQS):
        w = np.pi * 2.0 ** k
        cols += [np.sin(w * u), np.cos(w * u)]
    return np.stack(cols, axis=-1)


def noise_features(c_noise) -> np.ndarray:
    """Mean of the per-dimension noise code plus its first two cosine Fourier coefficients."""
    c = np.atleast_2d(np.asarray(c_noise, dtype=float))
    d = c.shape[-1]
    i = np.arange(d)
    f1 = np.mean(c * np.cos(2 * np.pi * i / d), axis=-1)
    f2 = np.mean(c * np.cos(4 * np.pi * i / d), axis=-1)
    return np.stack([c.mean(axis=-1), f1, f2], axis=-1)


class MLP:
    """Feed-forward net ``in -> width x depth -> out`` plus a learned null-label token."""

    def __init__(self, d: int, width: int = 64, depth: int = 3, rng=None, out_scale: float = 1.0):
        rng = np.random.default_rng(0) if rng is None else rng
        self.d = d
        sizes = [d + LABEL_FEATURES + NOISE_FEATURES] + [width] * depth + [d]
        self.weights = []
        self.biases = []
        for k, (m, n) in enumerate(zip(sizes[:-1], sizes[1:])):
            scale = 1.0 / np.sqrt(m)
            if k == len(sizes) - 2:
                scale *= out_scale
            self.weights.append(rng.normal(0.0, scale, size=(m, n)))
            self.biases.append(np.zeros(n))
        self.null_token = rng.normal(0.0, 0.1, size=LABEL_FEATURES)

    @property
    def layer_shapes(self):
        return [list(W.shape) for W in self.weights]

    def parameters(self):
        return [*self.weights, *self.biases, self.null_token]

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.ravel() for p in self.parameters()])

    def set_flat(self, flat) -> None:
        flat = np.asarray(flat, dtype=float)
        k = 0
        for p in self.parameters():
            p[...] = flat[k:k + p.size].reshape(p.shape)
            k += p.size
        if k != flat.size:
            raise ValueError(f"expected {k} parameters, got {flat.size}")

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.parameters())

    def copy(self) -> "MLP":
        other = MLP.__new__(MLP)
        other.d = self.d
        other.weights = [W.copy() for W in self.weights]
        other.biases = [b.copy() for b in self.biases]
        other.null_token = self.null_token.copy()
        return other

    def assemble(self, x_in, lab, noise, drop) -> np.ndarray:
        lab = np.array(lab, dtype=float)
        drop = np.asarray(drop, dtype=bool)
        if drop.any():
            lab[drop] = self.null_token
        return np.concatenate([x_in, lab, noise], axis=-1)

    def forward(self, inp):
        """Returns the output and the activations needed by ``backward``."""
        acts = [inp]
        pre = []
        h = inp
        last = len(self.weights) - 1
        for k, (W, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ W + b
            if k == last:
                return z, (acts, pre)
            pre.append(z)
            h = silu(z)
            acts.append(h)

    def backward(self, dout, cache, drop):
        """Gradient of a scalar loss w.r.t. every parameter, given dL/d(output)."""
        acts, pre = cache
        n = len(self.weights)
        gW = [None] * n
        gb = [None] * n
        g = dout
        for k in range(n - 1, -1, -1):
            gW[k] = acts[k].T @ g
            gb[k] = g.sum(axis=0)
            g = g @ self.weights[k].T
            if k > 0:
                g = g * silu_grad(pre[k - 1])
        lab = slice(self.d, self.d + LABEL_FEATURES)
        drop = np.asarray(drop, dtype=bool)
        g_null = g[drop, lab].sum(axis=0) if drop.any() else np.zeros(LABEL_FEATURES)
        return [*gW, *gb, g_null]
