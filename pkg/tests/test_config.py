import hashlib

import pytest

from condedm.config import DEFAULTS, PRESETS, RunConfig, parse_text
from condedm.covariance import ConfigError
from condedm.vicinity import HardAdaptive, HardFixed


def test_parse_grammar():
    vals = parse_text("""
        # comment line
        run.seed = 7          # trailing comment
        sampler.kind=ode
        eval.centers = 0.25, 0.75
        cov.sigma_data = auto
    """)
    assert vals == {"run.seed": 7, "sampler.kind": "ode", "eval.centers": (0.25, 0.75), "cov.sigma_data": "auto"}


@pytest.mark.parametrize("text", ["nonsense", "run.nope = 1", "run.seed = 1.5", "train.lr = fast"])
def test_parse_errors(text):
    with pytest.raises(ConfigError):
        parse_text(text)


def test_hash_recomputable_and_ignores_output_root():
    a = RunConfig.from_dict({"run.seed": 3})
    b = RunConfig.from_dict({"run.seed": 3, "run.out_dir": "/elsewhere"})
    assert a.hash == b.hash
    assert a.hash == hashlib.sha256(a.snapshot().encode()).hexdigest()[:12]
    assert RunConfig.from_dict({"run.seed": 4}).hash != a.hash


def test_builders():
    cfg = RunConfig.from_dict({"vicinity.mode": "hard_fixed", "vicinity.kappa": 0.05, "cov.lambda_sample": 0.3})
    assert cfg.vicinity() == HardFixed(0.05)
    assert cfg.cov_params("sample").lambda_y == 0.3
    assert cfg.cov_params("train").lambda_y == DEFAULTS["cov.lambda_train"]
    assert cfg.sampler().n_steps == 32
    assert cfg.eval().centers[0] == 0.05


@pytest.mark.parametrize("bad", [
    {"dataset.n_samples": 0},
    {"dataset.kind": "spiral"},
    {"vicinity.mode": "soft"},
    {"sampler.kind": "euler"},
    {"embedding.slopes": "-5"},
    {"embedding.offsets": "0,1,2"},
    {"cov.lambda_train": -1.0},
    {"eval.centers": "2.0"},
    {"run.preset": "imagenet"},
])
def test_validation_rejects(bad):
    with pytest.raises(ConfigError):
        RunConfig.from_dict(bad)


def test_missing_dataset_path():
    with pytest.raises(FileNotFoundError):
        RunConfig.from_dict({"dataset.path": "/no/such/file.csv"})


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_load(name):
    cfg = RunConfig.from_dict({"run.preset": name})
    assert cfg.sampler().n_steps == 32
    assert cfg["sampler.kind"] == "sde"


def test_steering_angle_preset_values():
    cfg = RunConfig.from_dict({"run.preset": "steering_angle_128"})
    assert cfg["cov.lambda_train"] == 0.01
    assert cfg["cov.lambda_sample"] == 0.1
    assert cfg.vicinity() == HardAdaptive(10)
    assert cfg["sampler.cfg_gamma"] == 1.5
    assert RunConfig.from_dict({"run.preset": "steering_angle_64"})["cov.lambda_sample"] == 2.5


def test_explicit_keys_override_preset():
    cfg = RunConfig.from_dict({"run.preset": "steering_angle_128", "vicinity.n_av": 5})
    assert cfg.vicinity() == HardAdaptive(5)


def test_load_file(tmp_path):
    p = tmp_path / "c.cfg"
    p.write_text("run.seed = 2\ndataset.d = 3\n")
    cfg = RunConfig.load(p)
    assert cfg.seed == 2 and cfg.dim == 3
