"""Verification suite behind ``condedm verify`` and the acceptance tests.

Each check builds a small problem, runs the library path and an independent
oracle (scalar reference sampler, numerical optimiser, finite differences,
Monte-Carlo statistics, exact Gaussian solutions), and compares them at a
fixed tolerance.  Every check is seeded and deterministic.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import optimize, special, stats

from .covariance import CovParams, EmbeddingSpec, g_coeff, sigma_mat
from .denoiser import (
    ClosedFormDenoiser,
    LossConfig,
    TrainableDenoiser,
    batch_loss_and_grad,
    closed_form_denoise,
    draw_vicinal_batch,
    noise_weight,
    precond_coeffs,
    vicinal_score,
)
from .metrics import EvalConfig, label_consistency, sliding_distance
from .sampler import SamplerConfig, forward_simulate, heun_sample, stochastic_sample
from .synthdata import AnalyticOracle, DatasetSpec, generate, sample_given_labels, sample_labels
from .vicinity import HardAdaptive, HardFixed, KdeConfig, LabeledDataset, silverman_bandwidth, vicinal_weights

# tolerances of the acceptance criteria
EDM_REDUCTION_RTOL = 1e-12
FORWARD_VAR_RTOL = 0.05
FORWARD_MEAN_SE = 3.0
FORWARD_KS_P = 1e-3
DSTAR_ATOL = 1e-8
SCORE_RTOL = 1e-5
HEUN_RATIO = (3.0, 5.0)
CHURN_ATOL = 1e-12
LAMBDA_ATOL = 1e-12
GRAD_RTOL = 1e-4
E2E_RATIO = 1.5
E2E_MAE_RTOL = 0.25


@dataclass
class CheckResult:
    name: str
    passed: bool
    metrics: dict = field(default_factory=dict)
    seconds: float = 0.0
    limit_s: float = math.inf
    skipped: bool = False

    def line(self) -> str:
        status = "SKIP" if self.skipped else ("PASS" if self.passed else "FAIL")
        keys = ", ".join(f"{k}={_short(v)}" for k, v in self.metrics.items())
        return f"[{status}] {self.name} ({self.seconds:.2f}s < {self.limit_s:g}s) {keys}"


def _short(v):
    if isinstance(v, float):
        return f"{v:.4g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


# ---------------------------------------------------------------------------
# 1. EDM reduction
# ---------------------------------------------------------------------------

def _edm_reference(X, x_T, sigma_min, sigma_max, rho, n):
    """Scalar-noise Heun sampler over the empirical distribution of X."""
    ts = [(sigma_max ** (1 / rho) + i / (n - 1) * (sigma_min ** (1 / rho) - sigma_max ** (1 / rho))) ** rho
          for i in range(n)] + [0.0]

    def den(x, s):
        logw = -np.sum((x[:, None, :] - X[None]) ** 2, axis=-1) / (2 * s * s)
        return special.softmax(logw, axis=1) @ X

    x = x_T
    traj = [x]
    for t, tn in zip(ts[:-1], ts[1:]):
        d = (x - den(x, t)) / t
        xn = x + (tn - t) * d
        if tn != 0:
            d2 = (xn - den(xn, tn)) / tn
            xn = x + (tn - t) * (0.5 * d + 0.5 * d2)
        x = xn
        traj.append(x)
    return np.stack(traj)


def check_edm_reduction(seed: int = 0) -> CheckResult:
    rng = np.random.default_rng(seed)
    d, n = 2, 6
    ds = LabeledDataset(rng.standard_normal((n, d)), rng.uniform(0, 1, n), (0.0, 1.0))
    cov = CovParams(d, lambda_y=0.0, embedding=EmbeddingSpec("affine", (0.3,), (1.0,)))
    cfg = SamplerConfig(cfg_gamma=1.0)
    y = 0.4
    exact = True
    for t in np.linspace(0.01, 80.0, 200):
        exact &= bool(np.array_equal(sigma_mat(t, y, cov), np.full(d, t * t)))
        exact &= bool(np.array_equal(g_coeff(t, 1.0, y, cov), np.full(d, math.sqrt(2 * t))))
    cf = ClosedFormDenoiser(ds, HardFixed(math.inf))
    exact &= bool(np.all(cf.weights(y) == 1.0))
    x_T = cfg.sigma_max * rng.standard_normal((16, d))
    _, _, traj = heun_sample(cf, y, cov, cfg, x_init=x_T, return_trajectory=True)
    ref = _edm_reference(ds.samples, x_T, cfg.sigma_min, cfg.sigma_max, cfg.rho, cfg.n_steps)
    denom = np.maximum(np.maximum(np.abs(traj), np.abs(ref)), 1e-300)
    rel = float(np.max(np.abs(traj - ref) / denom))
    return CheckResult("edm_reduction", exact and rel <= EDM_REDUCTION_RTOL,
                       {"exact_sigma": exact, "max_rel_step_err": rel})


# ---------------------------------------------------------------------------
# 2. forward SDE marginal (Monte-Carlo)
# ---------------------------------------------------------------------------

def check_forward_marginal(seed: int = 1, n_paths: int = 10_000, n_substeps: int = 200) -> CheckResult:
    rng = np.random.default_rng(seed)
    cov = CovParams(2, lambda_y=1.5, embedding=EmbeddingSpec("affine", (0.0, 1.0), (1.0, 0.0)))
    y, t_end = 0.5, 1.0
    x0 = np.array([1.0, -2.0])
    xt = forward_simulate(np.tile(x0, (n_paths, 1)), y, cov, t_end, n_substeps, rng)
    inc = xt - x0
    target = sigma_mat(t_end, y, cov)
    var = inc.var(axis=0, ddof=1)
    var_rel = np.abs(var / target - 1)
    z_mean = np.abs(inc.mean(axis=0)) / np.sqrt(var / n_paths)
    ks_p = [stats.kstest(inc[:, k], stats.norm(0, math.sqrt(target[k])).cdf).pvalue for k in range(2)]
    ok = bool(np.all(var_rel <= FORWARD_VAR_RTOL) and np.all(z_mean <= FORWARD_MEAN_SE)
              and min(ks_p) > FORWARD_KS_P)
    return CheckResult("forward_marginal", ok, {
        "target_var": target.tolist(), "var_rel_err": var_rel.tolist(),
        "mean_z": z_mean.tolist(), "ks_p": ks_p})


# ---------------------------------------------------------------------------
# 3. closed-form denoiser is the minimiser of the weighted quadratic
# ---------------------------------------------------------------------------

def _random_instance(rng):
    n = int(rng.integers(1, 9))
    d = int(rng.integers(1, 5))
    X = rng.standard_normal((n, d))
    labels = rng.uniform(0, 1, n)
    ds = LabeledDataset(X, labels, (0.0, 1.0))
    y = float(rng.uniform(0, 1))
    vic = HardAdaptive(int(rng.integers(1, n + 1))) if rng.random() < 0.5 else HardFixed(float(rng.uniform(0.2, 1.5)))
    if vicinal_weights(labels, y, vic).sum() == 0:
        vic = HardAdaptive(1)
    Sigma = np.exp(rng.uniform(np.log(0.05), np.log(5.0), d))
    x = 1.5 * rng.standard_normal(d)
    return ds, y, vic, Sigma, x


def _log_gauss(x, X, Sigma, W):
    lp = np.array([stats.multivariate_normal(mean=xi, cov=np.diag(Sigma)).logpdf(x) for xi in X])
    return np.where(W > 0, lp, -np.inf)


def check_dstar_optimality(seed: int = 2, n_instances: int = 50) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_instances):
        ds, y, vic, Sigma, x = _random_instance(rng)
        W = vicinal_weights(ds.labels, y, vic)
        lp = _log_gauss(x, ds.samples, Sigma, W)
        w = np.exp(lp - lp.max())
        w = w / w.sum()

        def f(D):
            r = D[None, :] - ds.samples
            return float(np.sum(w * np.sum(r * r, axis=1))), 2 * (w[:, None] * r).sum(axis=0)

        res = optimize.minimize(f, x, jac=True, method="BFGS", options={"gtol": 1e-13})
        got = closed_form_denoise(ClosedFormDenoiser(ds, vic), x, y, Sigma)
        worst = max(worst, float(np.max(np.abs(got - res.x))))
    return CheckResult("dstar_optimality", worst <= DSTAR_ATOL, {"max_abs_err": worst})


# ---------------------------------------------------------------------------
# 4. score = gradient of the log vicinal mixture
# ---------------------------------------------------------------------------

def check_score_identity(seed: int = 3, n_probes: int = 100, h: float = 1e-5) -> CheckResult:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_probes):
        ds, y, vic, Sigma, x = _random_instance(rng)
        W = vicinal_weights(ds.labels, y, vic)

        def logp(z):
            return special.logsumexp(_log_gauss(z, ds.samples, Sigma, W))

        fd = np.array([(logp(x + h * e) - logp(x - h * e)) / (2 * h) for e in np.eye(x.size)])
        got = vicinal_score(ClosedFormDenoiser(ds, vic), x, y, Sigma)
        worst = max(worst, float(np.linalg.norm(got - fd) / max(np.linalg.norm(fd), 1e-300)))
    return CheckResult("score_identity", worst <= SCORE_RTOL, {"max_rel_err": worst})


# ---------------------------------------------------------------------------
# 5. Heun global order on the Gaussian problem
# ---------------------------------------------------------------------------

def check_heun_order(seed: int = 4, steps=(16, 32, 64, 128)) -> CheckResult:
    rng = np.random.default_rng(seed)
    spec = DatasetSpec("gaussian_shift", d=2, noise_std=0.5)
    oracle = AnalyticOracle(spec)
    cov = CovParams(2, lambda_y=1.0, embedding=EmbeddingSpec("affine", (0.0, 0.5), (1.0, 2.0)))
    y = 0.3
    s2 = spec.noise_std ** 2
    m = spec.mean(y)
    S_T = sigma_mat(80.0, y, cov)
    x_T = np.sqrt(S_T) * rng.standard_normal((20, 2))
    # the probability-flow ODE keeps (x - m) / sqrt(s^2 + Sigma(t)) constant
    exact = m + (x_T - m) * np.sqrt(s2 / (s2 + S_T))
    errs = []
    for n in steps:
        x0 = heun_sample(oracle, y, cov, SamplerConfig(n_steps=n, cfg_gamma=1.0), x_init=x_T)
        errs.append(float(np.max(np.abs(x0 - exact))))
    ratios = [a / b for a, b in zip(errs[:-1], errs[1:])]
    ok = all(HEUN_RATIO[0] <= r <= HEUN_RATIO[1] for r in ratios)
    return CheckResult("heun_order", ok, {"steps": list(steps), "errors": errs, "ratios": ratios})


# ---------------------------------------------------------------------------
# 6. churn collapse
# ---------------------------------------------------------------------------

def check_churn_collapse(seed: int = 5) -> CheckResult:
    spec = DatasetSpec("gaussian_shift", n_samples=200, d=2, noise_std=0.1, seed=seed)
    ds = generate(spec)
    cov = CovParams(2, lambda_y=0.5)
    cf = ClosedFormDenoiser(ds, HardAdaptive(10))
    cfg = SamplerConfig(s_churn=0.0, cfg_gamma=1.0)
    a = heun_sample(cf, 0.4, cov, cfg, np.random.default_rng(seed), n_chains=8)
    b = stochastic_sample(cf, 0.4, cov, cfg, np.random.default_rng(seed), n_chains=8)
    err = float(np.max(np.abs(a - b)))
    return CheckResult("churn_collapse", err <= CHURN_ATOL, {"max_abs_diff": err})


# ---------------------------------------------------------------------------
# 7. loss-weight normalisation
# ---------------------------------------------------------------------------

def check_lambda_normalization(seed: int = 6, n: int = 1000) -> CheckResult:
    rng = np.random.default_rng(seed)
    Sigma = np.exp(rng.uniform(np.log(1e-6), np.log(1e4), n))
    sd = np.exp(rng.uniform(np.log(0.05), np.log(5.0), n))
    prod = noise_weight(Sigma, sd) * precond_coeffs(Sigma, sd).c_out ** 2
    err = float(np.max(np.abs(prod - 1)))
    return CheckResult("lambda_normalization", err <= LAMBDA_ATOL, {"max_abs_err": err})


# ---------------------------------------------------------------------------
# 8. training gradient vs finite differences
# ---------------------------------------------------------------------------

def grad_check(td: TrainableDenoiser, batch, h: float = 1e-5, floor: float = 1e-12):
    """Max relative error between analytic and central-difference gradients."""
    theta = td.net.get_flat()
    _, g = batch_loss_and_grad(td, batch)
    fd = np.empty_like(theta)
    for k in range(theta.size):
        tp = theta.copy()
        tp[k] += h
        td.net.set_flat(tp)
        lp, _ = batch_loss_and_grad(td, batch, need_grad=False)
        tp[k] -= 2 * h
        td.net.set_flat(tp)
        lm, _ = batch_loss_and_grad(td, batch, need_grad=False)
        fd[k] = (lp - lm) / (2 * h)
    td.net.set_flat(theta)
    scale = np.maximum(np.maximum(np.abs(g), np.abs(fd)), floor)
    return float(np.max(np.abs(g - fd) / scale)), g, fd


def check_gradient(seed: int = 7) -> CheckResult:
    spec = DatasetSpec("gaussian_shift", n_samples=200, d=2, noise_std=0.1, seed=seed)
    ds = generate(spec)
    cov = CovParams(2, lambda_y=0.5)
    td = TrainableDenoiser.create(2, 0.5, ds.label_range, width=8, depth=3, seed=seed)
    cfg = LossConfig(batch_size=16, label_drop_prob=0.5)
    batch = draw_vicinal_batch(ds, HardAdaptive(10), KdeConfig(silverman_bandwidth(ds.labels)),
                               cov, cfg, np.random.default_rng(seed))
    rel, g, _ = grad_check(td, batch)
    return CheckResult("gradient", rel <= GRAD_RTOL,
                       {"n_params": int(g.size), "max_rel_err": rel, "dropped": int(batch.drop.sum())})


# ---------------------------------------------------------------------------
# 9. end-to-end closed-form generation
# ---------------------------------------------------------------------------

def window_labels(rng, centers, window, label_range, n):
    lo, hi = label_range
    return np.concatenate([rng.uniform(max(lo, c - window), min(hi, c + window), n) for c in centers])


def check_end_to_end(seed: int = 8, per_window: int = 100, n_av: int = 20, lam: float = 0.1) -> CheckResult:
    spec = DatasetSpec("gaussian_shift", n_samples=2000, d=2, noise_std=0.1, seed=seed)
    ds = generate(spec)
    cov = CovParams(2, lambda_y=lam, sigma_data=ds.sigma_data())
    cf = ClosedFormDenoiser(ds, HardAdaptive(n_av))
    ev = EvalConfig(window=0.05, seed=seed)
    rng = np.random.default_rng(seed + 1000)
    gen_y = window_labels(rng, ev.centers, ev.window, spec.label_range, per_window)
    gen_x = stochastic_sample(cf, gen_y, cov, SamplerConfig(cfg_gamma=1.0), rng)
    real_y = window_labels(rng, ev.centers, ev.window, spec.label_range, per_window)
    real_x = sample_given_labels(spec, real_y, rng)
    base_y = window_labels(rng, ev.centers, ev.window, spec.label_range, per_window)
    base_x = sample_given_labels(spec, base_y, rng)
    gen = sliding_distance(real_y, real_x, gen_y, gen_x, ev)
    base = sliding_distance(real_y, real_x, base_y, base_x, ev)
    ratio = gen.mean_distance / base.mean_distance
    mae = label_consistency(gen_x, gen_y, spec)
    floor = spec.noise_std * math.sqrt(2 / math.pi)
    ok = ratio <= E2E_RATIO and abs(mae / floor - 1) <= E2E_MAE_RTOL
    return CheckResult("end_to_end", ok, {
        "seed": seed, "gen_w1": gen.mean_distance, "baseline_w1": base.mean_distance,
        "ratio": ratio, "label_mae": mae, "noise_floor": floor})


# ---------------------------------------------------------------------------
# 10. adaptive vs fixed vicinity on imbalanced labels
# ---------------------------------------------------------------------------

def check_adaptive_vicinity(seed: int = 9, n_av: int = 10, kappa: float = 0.001,
                            n_tail: int = 100) -> CheckResult:
    spec = DatasetSpec("imbalanced_shift", n_samples=2000, d=2, noise_std=0.1, seed=seed)
    ds = generate(spec)
    cov = CovParams(2, lambda_y=0.1, sigma_data=ds.sigma_data())
    rng = np.random.default_rng(seed + 1000)
    tail_y = np.concatenate([rng.uniform(0.0, 0.1, n_tail // 2), rng.uniform(0.9, 1.0, n_tail - n_tail // 2)])
    cfg = SamplerConfig(cfg_gamma=1.0)
    av = ClosedFormDenoiser(ds, HardAdaptive(n_av))
    fv = ClosedFormDenoiser(ds, HardFixed(kappa), on_empty="unconditional")
    starved_fv = int(fv.starved(tail_y).sum())
    grid = np.linspace(*spec.label_range, 1001)
    av_counts = vicinal_weights(ds.labels, grid, HardAdaptive(n_av)).sum(axis=1)
    av_never_empty = bool(np.all(av_counts >= min(n_av, ds.n)))
    x_av = stochastic_sample(av, tail_y, cov, cfg, np.random.default_rng(seed))
    x_fv = stochastic_sample(fv, tail_y, cov, cfg, np.random.default_rng(seed))
    mae_av = label_consistency(x_av, tail_y, spec)
    mae_fv = label_consistency(x_fv, tail_y, spec)
    ok = av_never_empty and starved_fv > 0 and mae_av <= mae_fv
    return CheckResult("adaptive_vicinity", ok, {
        "tail_mae_av": mae_av, "tail_mae_fv": mae_fv, "fv_starved_labels": starved_fv,
        "n_tail_labels": n_tail, "av_min_count": int(av_counts.min())})


@dataclass(frozen=True)
class Check:
    name: str
    fn: Callable[[], CheckResult]
    limit_s: float
    monte_carlo: bool = False
    criterion: int = 0


CHECKS = [
    Check("edm_reduction", check_edm_reduction, 1.0, criterion=1),
    Check("forward_marginal", check_forward_marginal, 30.0, monte_carlo=True, criterion=2),
    Check("dstar_optimality", check_dstar_optimality, 5.0, criterion=3),
    Check("score_identity", check_score_identity, 5.0, criterion=4),
    Check("heun_order", check_heun_order, 30.0, criterion=5),
    Check("churn_collapse", check_churn_collapse, 1.0, criterion=6),
    Check("lambda_normalization", check_lambda_normalization, 1.0, criterion=7),
    Check("gradient", check_gradient, 10.0, criterion=8),
    Check("end_to_end", check_end_to_end, 120.0, monte_carlo=True, criterion=9),
    Check("adaptive_vicinity", check_adaptive_vicinity, 120.0, monte_carlo=True, criterion=10),
]


def run_check(check: Check) -> CheckResult:
    t0 = time.perf_counter()
    res = check.fn()
    res.seconds = time.perf_counter() - t0
    res.limit_s = check.limit_s
    res.passed = bool(res.passed and res.seconds < check.limit_s)
    return res


def run_all(level: str = "full") -> list[CheckResult]:
    if level not in ("fast", "full"):
        raise ValueError(f"unknown level {level!r}")
    out = []
    for c in CHECKS:
        if level == "fast" and c.monte_carlo:
            out.append(CheckResult(c.name, True, {}, 0.0, c.limit_s, skipped=True))
            continue
        out.append(run_check(c))
    return out
