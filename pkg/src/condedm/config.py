"""Run configuration: flat ``section.key = value`` text files and presets.

Grammar (one entry per line)::

    # comment               -- '#' starts a comment anywhere on a line
    section.key = value     -- whitespace around '=' is ignored

Values are coerced to the type of the key's default: int, float, str, or a
comma-separated list of floats.  ``cov.sigma_data`` and ``kde.sigma`` also
accept ``auto`` (estimated from the dataset).  ``run.preset`` names a preset
whose values are applied first; explicit keys in the file win.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .covariance import ConfigError, CovParams, EmbeddingSpec
from .denoiser import LossConfig
from .metrics import EvalConfig
from .sampler import SamplerConfig
from .synthdata import DatasetSpec
from .vicinity import HardAdaptive, HardFixed, KdeConfig, LabeledDataset, silverman_bandwidth

DEFAULTS = {
    "run.seed": 0,
    "run.out_dir": "runs",
    "run.denoiser": "closed_form",
    "run.preset": "",
    "dataset.kind": "gaussian_shift",
    "dataset.n_samples": 2000,
    "dataset.d": 2,
    "dataset.label_lo": 0.0,
    "dataset.label_hi": 1.0,
    "dataset.noise_std": 0.1,
    "dataset.radius": 1.0,
    "dataset.direction": "",
    "dataset.center_weight": 0.9,
    "dataset.center_width": 0.08,
    "dataset.path": "",
    "embedding.kind": "affine",
    "embedding.offsets": (0.0,),
    "embedding.slopes": (1.0,),
    "embedding.freqs": (1.0,),
    "cov.lambda_train": 0.1,
    "cov.lambda_sample": 0.1,
    "cov.sigma_data": "0.5",
    "vicinity.mode": "hard_adaptive",
    "vicinity.kappa": 0.01,
    "vicinity.n_av": 20,
    "kde.sigma": "auto",
    "loss.p_mean": -1.2,
    "loss.p_std": 1.2,
    "loss.batch_size": 64,
    "loss.label_drop_prob": 0.1,
    "train.steps": 2000,
    "train.lr": 1e-3,
    "train.width": 64,
    "train.depth": 3,
    "sampler.kind": "sde",
    "sampler.n_steps": 32,
    "sampler.sigma_min": 0.002,
    "sampler.sigma_max": 80.0,
    "sampler.rho": 7.0,
    "sampler.s_churn": 80.0,
    "sampler.s_tmin": 0.05,
    "sampler.s_tmax": 50.0,
    "sampler.s_noise": 1.003,
    "sampler.cfg_gamma": 1.5,
    "eval.centers": tuple(round(float(c), 10) for c in np.linspace(0.05, 0.95, 10)),
    "eval.window": 0.05,
    "eval.n_projections": 64,
}


def _row(n_av, lam_t, lam_s, gamma, steps, lr, bs):
    return {
        "vicinity.mode": "hard_adaptive",
        "vicinity.n_av": n_av,
        "cov.lambda_train": lam_t,
        "cov.lambda_sample": lam_s,
        "sampler.cfg_gamma": gamma,
        "sampler.kind": "sde",
        "sampler.n_steps": 32,
        "train.steps": steps,
        "train.lr": lr,
        "loss.batch_size": bs,
    }


# per-dataset settings of the reference image experiments
PRESETS = {
    "rc49_64": _row(50, 0.001, 0.001, 1.2, 100_000, 1e-4, 128),
    "cell200_64": _row(20, 0.01, 0.01, 1.5, 50_000, 5e-5, 64),
    "utkface_64": _row(400, 0.05, 0.05, 1.5, 100_000, 1e-4, 128),
    "utkface_128": _row(400, 0.01, 0.01, 1.5, 200_000, 1e-5, 128),
    "utkface_192": _row(400, 0.01, 0.01, 1.5, 800_000, 1e-5, 112),
    "utkface_256": _row(400, 0.01, 0.01, 1.5, 800_000, 1e-5, 32),
    "steering_angle_64": _row(10, 2.5, 2.5, 1.5, 100_000, 1e-4, 128),
    "steering_angle_128": _row(10, 0.01, 0.1, 1.5, 400_000, 5e-5, 112),
    "steering_angle_256": _row(20, 0.01, 0.1, 2.0, 400_000, 1e-5, 36),
}

SAMPLER_KINDS = ("ode", "sde")
DENOISER_KINDS = ("closed_form", "trained")


def _coerce(key, raw):
    default = DEFAULTS[key]
    if not isinstance(raw, str):
        value = raw
    elif isinstance(default, tuple):
        value = tuple(float(v) for v in raw.split(",") if v.strip())
    elif isinstance(default, bool):
        value = raw.strip().lower() in ("1", "true", "yes")
    elif isinstance(default, int):
        f = float(raw)
        if f != int(f):
            raise ConfigError(f"{key} must be an integer, got {raw!r}")
        value = int(f)
    elif isinstance(default, float):
        value = float(raw)
    else:
        value = raw.strip()
    if isinstance(default, tuple):
        value = tuple(float(v) for v in np.atleast_1d(value))
    return value


def parse_text(text: str, source: str = "<config>") -> dict:
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'section.key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        try:
            out[key] = _coerce(key, raw)
        except ValueError as e:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {e}") from None
    return out


def _fmt(v) -> str:
    if isinstance(v, tuple):
        return ",".join(repr(float(x)) for x in v)
    if isinstance(v, float):
        return repr(v)
    return str(v)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    @classmethod
    def from_dict(cls, overrides: dict | None = None) -> "RunConfig":
        overrides = dict(overrides or {})
        vals = dict(DEFAULTS)
        preset = overrides.get("run.preset", "")
        if preset:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
            vals.update(PRESETS[preset])
        for k, v in overrides.items():
            if k not in DEFAULTS:
                raise ConfigError(f"unknown key {k!r}")
            vals[k] = _coerce(k, v)
        cfg = cls(vals)
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        path = Path(path)
        return cls.from_dict(parse_text(path.read_text(encoding="utf-8"), str(path)))

    def __getitem__(self, key):
        return self.values[key]

    # -- snapshot / hash -------------------------------------------------

    def snapshot(self) -> str:
        """Canonical text of every setting that affects results (output root excluded)."""
        keys = sorted(k for k in self.values if k != "run.out_dir")
        return "".join(f"{k} = {_fmt(self.values[k])}\n" for k in keys)

    @property
    def hash(self) -> str:
        return hashlib.sha256(self.snapshot().encode("utf-8")).hexdigest()[:12]

    # -- section builders ------------------------------------------------

    @property
    def seed(self) -> int:
        return int(self["run.seed"])

    @property
    def dim(self) -> int:
        return int(self["dataset.d"])

    @property
    def label_range(self):
        return (float(self["dataset.label_lo"]), float(self["dataset.label_hi"]))

    def dataset_spec(self) -> DatasetSpec:
        direction = self["dataset.direction"]
        if direction:
            direction = tuple(float(v) for v in str(direction).split(","))
        return DatasetSpec(
            kind=self["dataset.kind"],
            n_samples=self["dataset.n_samples"],
            d=self.dim,
            label_range=self.label_range,
            noise_std=self["dataset.noise_std"],
            radius=self["dataset.radius"],
            direction=direction or None,
            center_weight=self["dataset.center_weight"],
            center_width=self["dataset.center_width"],
            seed=self.seed,
        )

    def embedding(self) -> EmbeddingSpec:
        return EmbeddingSpec(self["embedding.kind"], self["embedding.offsets"],
                             self["embedding.slopes"], self["embedding.freqs"])

    def sigma_data(self, ds: LabeledDataset | None = None) -> float:
        raw = str(self["cov.sigma_data"]).strip().lower()
        if raw == "auto":
            if ds is None:
                raise ConfigError("cov.sigma_data = auto needs a dataset")
            return ds.sigma_data()
        return float(raw)

    def cov_params(self, stage: str, ds: LabeledDataset | None = None,
                   sigma_data: float | None = None) -> CovParams:
        """Covariance parameters for ``stage``; an explicit ``sigma_data`` wins over the config."""
        if stage not in ("train", "sample"):
            raise ValueError(stage)
        sd = self.sigma_data(ds) if sigma_data is None else float(sigma_data)
        return CovParams(self.dim, float(self[f"cov.lambda_{stage}"]), sd, self.embedding())

    def vicinity(self):
        mode = self["vicinity.mode"]
        if mode == "hard_fixed":
            return HardFixed(float(self["vicinity.kappa"]))
        if mode == "hard_adaptive":
            return HardAdaptive(int(self["vicinity.n_av"]))
        raise ConfigError(f"unknown vicinity mode {mode!r}")

    def kde(self, labels) -> KdeConfig:
        raw = str(self["kde.sigma"]).strip().lower()
        return KdeConfig(silverman_bandwidth(labels) if raw == "auto" else float(raw))

    def loss(self, ds: LabeledDataset | None = None) -> LossConfig:
        return LossConfig(self["loss.p_mean"], self["loss.p_std"], self.sigma_data(ds),
                          self["loss.batch_size"], self["loss.label_drop_prob"])

    def sampler(self) -> SamplerConfig:
        return SamplerConfig(
            n_steps=self["sampler.n_steps"],
            sigma_min=self["sampler.sigma_min"],
            sigma_max=self["sampler.sigma_max"],
            rho=self["sampler.rho"],
            s_churn=self["sampler.s_churn"],
            s_tmin=self["sampler.s_tmin"],
            s_tmax=self["sampler.s_tmax"],
            s_noise=self["sampler.s_noise"],
            cfg_gamma=self["sampler.cfg_gamma"],
        )

    def eval(self) -> EvalConfig:
        return EvalConfig(self["eval.centers"], self["eval.window"], self["eval.n_projections"], self.seed)

    def validate(self) -> None:
        spec = self.dataset_spec()
        spec.unit_direction  # length check
        self.embedding().check_range(self.dim, self.label_range)
        for stage in ("train", "sample"):
            if float(self[f"cov.lambda_{stage}"]) < 0:
                raise ConfigError(f"cov.lambda_{stage} must be non-negative")
        if str(self["cov.sigma_data"]).strip().lower() != "auto":
            self.cov_params("train")
            self.loss()
        kde = str(self["kde.sigma"]).strip().lower()
        if kde != "auto":
            KdeConfig(float(kde))
        self.vicinity()
        if self["train.steps"] < 0 or not self["train.lr"] > 0:
            raise ConfigError("train.steps must be >= 0 and train.lr > 0")
        if self["train.width"] < 1 or self["train.depth"] < 1:
            raise ConfigError("train.width and train.depth must be >= 1")
        if self["sampler.kind"] not in SAMPLER_KINDS:
            raise ConfigError(f"sampler.kind must be one of {SAMPLER_KINDS}")
        if self["run.denoiser"] not in DENOISER_KINDS:
            raise ConfigError(f"run.denoiser must be one of {DENOISER_KINDS}")
        self.sampler()
        self.eval().check_range(self.label_range)
        path = self["dataset.path"]
        if path and not Path(path).exists():
            raise FileNotFoundError(f"dataset.path {path!r} does not exist")
