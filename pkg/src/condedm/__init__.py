"""Label-conditioned diffusion with condition-specific diagonal noise covariances."""
from .covariance import ConfigError, CovParams, DomainError, EmbeddingSpec, g_coeff, sigma_dot_mat, sigma_mat
from .denoiser import ClosedFormDenoiser, LossConfig, TrainableDenoiser, closed_form_denoise, train, vicinal_score
from .metrics import EvalConfig, label_consistency, sliding_distance
from .sampler import SamplerConfig, forward_simulate, heun_sample, stochastic_sample, time_grid
from .synthdata import AnalyticOracle, DatasetSpec, generate
from .vicinity import EmptyVicinityError, HardAdaptive, HardFixed, KdeConfig, LabeledDataset

__all__ = [
    "AnalyticOracle", "ClosedFormDenoiser", "ConfigError", "CovParams", "DatasetSpec", "DomainError",
    "EmbeddingSpec", "EmptyVicinityError", "EvalConfig", "HardAdaptive", "HardFixed", "KdeConfig",
    "LabeledDataset", "LossConfig", "SamplerConfig", "TrainableDenoiser", "closed_form_denoise",
    "forward_simulate", "g_coeff", "generate", "heun_sample", "label_consistency", "sigma_dot_mat",
    "sigma_mat", "sliding_distance", "stochastic_sample", "time_grid", "train", "vicinal_score",
]
