"""Time grid, Heun PF-ODE sampler, churned stochastic sampler and forward SDE.

During sampling sigma(t) = t and sigma'(t) = 1, so
Sigma(t, y) = t^2 + lambda_y h~(y) t and dSigma/dt = 2t + lambda_y h~(y).

All samplers run a batch of chains at once: the state has shape ``(B, d)``
and the label is either shared (scalar) or per chain ``(B,)``.  Any object
with a ``standard_normal(shape)`` method can serve as the noise source.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .covariance import ConfigError, CovParams, DomainError, g_coeff, sigma_dot_mat, sigma_mat

SIGMA_INV_FLOOR = 1e-300


@dataclass(frozen=True)
class SamplerConfig:
    n_steps: int = 32
    sigma_min: float = 0.002
    sigma_max: float = 80.0
    rho: float = 7.0
    s_churn: float = 80.0
    s_tmin: float = 0.05
    s_tmax: float = 50.0
    s_noise: float = 1.003
    cfg_gamma: float = 1.5

    def __post_init__(self):
        if not 0 < self.sigma_min < self.sigma_max:
            raise ConfigError("need 0 < sigma_min < sigma_max")
        if self.n_steps < 2:
            raise ConfigError("n_steps must be >= 2")
        if not self.rho > 0 or not self.s_noise > 0:
            raise ConfigError("rho and s_noise must be positive")
        if self.s_churn < 0:
            raise ConfigError("s_churn must be non-negative")
        if not self.cfg_gamma >= 1:
            raise ConfigError("cfg_gamma must be >= 1")


def time_grid(cfg: SamplerConfig) -> np.ndarray:
    """``t[0] = 0 < t[1] = sigma_min < ... < t[N] = sigma_max`` with rho-power spacing."""
    N = cfg.n_steps
    i = np.arange(1, N + 1)
    a = cfg.sigma_max ** (1.0 / cfg.rho)
    b = cfg.sigma_min ** (1.0 / cfg.rho)
    t = (a + (N - i) / (N - 1) * (b - a)) ** cfg.rho
    t[0] = cfg.sigma_min
    t[-1] = cfg.sigma_max
    return np.concatenate([[0.0], t])


def cfg_denoise(D, x, y, Sigma, gamma: float):
    """Classifier-free guidance: D_u + gamma (D_c - D_u)."""
    if gamma == 1:
        return D(x, y, Sigma)
    d_cond = D(x, y, Sigma)
    d_unc = D(x, y, Sigma, cond=False)
    return d_unc + gamma * (d_cond - d_unc)


def ode_slope(x, den, t, y, cov: CovParams):
    """0.5 * dSigma/dt * Sigma^{-1} * (x - D)."""
    S = sigma_mat(t, y, cov)
    if np.any(S < SIGMA_INV_FLOOR):
        raise DomainError("Sigma too small to invert")
    Sd = sigma_dot_mat(t, 1.0, y, cov)
    return 0.5 * Sd / S * (x - den)


def _init_state(y, cov, cfg, rng, n_chains, x_init):
    if x_init is not None:
        return np.atleast_2d(np.array(x_init, dtype=float))
    B = n_chains if n_chains is not None else (np.size(y) if np.ndim(y) else 1)
    S = sigma_mat(cfg.sigma_max, y, cov)
    return np.sqrt(S) * rng.standard_normal((B, cov.dim))


def _check_finite(x, step):
    if not np.all(np.isfinite(x)):
        raise FloatingPointError(f"non-finite sampler state at step {step}")


def heun_sample(D, y, cov: CovParams, cfg: SamplerConfig, rng=None, *, n_chains=None,
                x_init=None, gamma=1.0, return_trajectory=False):
    """Deterministic second-order sampler for the probability-flow ODE.

    The chain starts from N(0, Sigma(t_N, y)) (or ``x_init``) and takes one
    Euler step plus a trapezoidal correction per interval; the last interval,
    which ends at t = 0, is Euler only.
    """
    t = time_grid(cfg)
    x = _init_state(y, cov, cfg, rng, n_chains, x_init)
    traj = [x.copy()]
    for i in range(cfg.n_steps, 0, -1):
        x = _heun_step(D, x, t[i], t[i - 1], y, cov, gamma)
        _check_finite(x, i)
        traj.append(x.copy())
    if return_trajectory:
        return x, t[::-1].copy(), np.stack(traj)
    return x


def _heun_step(D, x, t_cur, t_next, y, cov, gamma):
    S = sigma_mat(t_cur, y, cov)
    d = ode_slope(x, cfg_denoise(D, x, y, S, gamma), t_cur, y, cov)
    x_next = x + (t_next - t_cur) * d
    if t_next != 0:
        S_next = sigma_mat(t_next, y, cov)
        d2 = ode_slope(x_next, cfg_denoise(D, x_next, y, S_next, gamma), t_next, y, cov)
        x_next = x + (t_next - t_cur) * (0.5 * d + 0.5 * d2)
    return x_next


def churn_gamma(t_i: float, cfg: SamplerConfig) -> float:
    if cfg.s_tmin <= t_i <= cfg.s_tmax:
        return min(cfg.s_churn / cfg.n_steps, math.sqrt(2.0) - 1.0)
    return 0.0


def stochastic_sample(D, y, cov: CovParams, cfg: SamplerConfig, rng, *, n_chains=None,
                      x_init=None, gamma=1.0, return_trajectory=False):
    """Stochastic sampler: raise the noise level by a churn factor, then take a Heun step.

    Fresh noise is drawn at every step, even when no churn is applied, so the
    random stream stays aligned with churned runs.
    """
    if not cfg.s_tmin < cfg.s_tmax:
        raise ConfigError("need s_tmin < s_tmax")
    t = time_grid(cfg)
    x = _init_state(y, cov, cfg, rng, n_chains, x_init)
    traj = [x.copy()]
    for i in range(cfg.n_steps, 0, -1):
        eps = cfg.s_noise * rng.standard_normal(x.shape)
        t_cur = t[i]
        t_hat = t_cur + churn_gamma(t_cur, cfg) * t_cur
        extra = sigma_mat(t_hat, y, cov) - sigma_mat(t_cur, y, cov)
        if np.any(extra < 0):
            raise DomainError("Sigma decreased under churn (non-monotone in t)")
        x_hat = x + np.sqrt(extra) * eps
        x = _heun_step(D, x_hat, t_hat, t[i - 1], y, cov, gamma)
        _check_finite(x, i)
        traj.append(x.copy())
    if return_trajectory:
        return x, t[::-1].copy(), np.stack(traj)
    return x


def forward_simulate(x0, y, cov: CovParams, t_end: float, n_substeps: int, rng):
    """Euler-Maruyama path of dX = G(t, y) dB from t = 0 to ``t_end``."""
    if n_substeps < 1:
        raise ConfigError("n_substeps must be >= 1")
    if not t_end > 0:
        raise ConfigError("t_end must be positive")
    x = np.array(x0, dtype=float)
    dt = t_end / n_substeps
    for k in range(n_substeps):
        G = g_coeff(k * dt, 1.0, y, cov)
        x = x + G * math.sqrt(dt) * rng.standard_normal(x.shape)
    return x


def direct_perturb(x0, y, sigma, cov: CovParams, rng):
    """x0 + Sigma(sigma, y)^{1/2} eps in one shot."""
    x0 = np.asarray(x0, dtype=float)
    return x0 + np.sqrt(sigma_mat(sigma, y, cov)) * rng.standard_normal(x0.shape)


class ChainRNG:
    """Noise source with an independent generator per chain.

    ``standard_normal((B, d))`` draws row ``b`` from generator ``b`` so a chain
    reproduces exactly whether it runs alone or inside a batch.
    """

    def __init__(self, generators):
        self.generators = list(generators)

    @classmethod
    def from_seeds(cls, seeds):
        return cls(np.random.default_rng(s) for s in seeds)

    def standard_normal(self, shape):
        shape = tuple(shape)
        if shape[0] != len(self.generators):
            raise ValueError(f"asked for {shape[0]} rows from {len(self.generators)} chains")
        return np.stack([g.standard_normal(shape[1:]) for g in self.generators])
