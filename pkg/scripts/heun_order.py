"""Terminal error of the Heun sampler on the Gaussian-shift problem versus step count."""
import argparse

import numpy as np

from condedm.covariance import CovParams, EmbeddingSpec, sigma_mat
from condedm.sampler import SamplerConfig, heun_sample
from condedm.synthdata import AnalyticOracle, DatasetSpec


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--lam", type=float, default=1.0)
    ap.add_argument("--steps", default="8,16,32,64,128,256")
    ap.add_argument("--chains", type=int, default=20)
    ap.add_argument("--seed", type=int, default=0)
    a = ap.parse_args()
    spec = DatasetSpec("gaussian_shift", d=2, noise_std=0.5)
    cov = CovParams(2, a.lam, embedding=EmbeddingSpec("affine", (0.0, 0.5), (1.0, 2.0)))
    y = 0.3
    S_T = sigma_mat(80.0, y, cov)
    x_T = np.sqrt(S_T) * np.random.default_rng(a.seed).standard_normal((a.chains, 2))
    m = spec.mean(y)
    exact = m + (x_T - m) * np.sqrt(spec.noise_std ** 2 / (spec.noise_std ** 2 + S_T))
    prev = None
    print(f"{'N':>5} {'max error':>12} {'ratio':>7}")
    for n in (int(s) for s in a.steps.split(",")):
        x = heun_sample(AnalyticOracle(spec), y, cov, SamplerConfig(n_steps=n), x_init=x_T)
        err = float(np.max(np.abs(x - exact)))
        print(f"{n:>5} {err:>12.4e} {'' if prev is None else f'{prev / err:7.3f}'}")
        prev = err


if __name__ == "__main__":
    main()
