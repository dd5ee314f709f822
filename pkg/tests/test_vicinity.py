import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from condedm.covariance import ConfigError, DomainError
from condedm.vicinity import (
    EmptyVicinityError,
    HardAdaptive,
    HardFixed,
    KdeConfig,
    LabeledDataset,
    adaptive_radius,
    kde_density,
    read_dataset_csv,
    sample_target_label,
    sample_vicinal_index,
    silverman_bandwidth,
    vicinal_weights,
    write_dataset_csv,
)

label_sets = st.lists(st.floats(0.0, 1.0), min_size=1, max_size=40).map(np.array)
FIVE = np.array([1.0, 2.0, 3.0, 4.0, 5.0])


def ds_of(labels, d=1):
    labels = np.asarray(labels, dtype=float)
    return LabeledDataset(np.zeros((labels.size, d)), labels, (labels.min(), labels.max()))


# -- adaptive radius --------------------------------------------------------

def test_adaptive_radius_examples():
    assert adaptive_radius([0.0], 0.3, 1) == pytest.approx(0.3, abs=0)
    assert adaptive_radius(FIVE, 3.0, 3) == 1.0
    assert adaptive_radius(FIVE, 2.2, 10) == pytest.approx(2.8)


def test_adaptive_radius_floor_positive():
    assert adaptive_radius([0.5, 0.5], 0.5, 1) > 0


def test_adaptive_radius_errors():
    with pytest.raises(DomainError):
        adaptive_radius([], 0.5, 1)


@given(label_sets, st.floats(0, 1), st.integers(1, 50), st.integers(0, 10))
def test_adaptive_radius_monotone_and_permutation_invariant(labels, y, n_av, extra):
    r1 = adaptive_radius(labels, y, n_av)
    r2 = adaptive_radius(labels, y, n_av + extra)
    assert r1 <= r2
    perm = np.random.default_rng(0).permutation(labels)
    assert adaptive_radius(perm, y, n_av) == r1


@given(label_sets, st.floats(0, 1), st.integers(1, 50))
def test_adaptive_vicinity_never_too_small(labels, y, n_av):
    w = vicinal_weights(labels, y, HardAdaptive(n_av))
    assert w.sum() >= min(n_av, labels.size)


@given(label_sets, st.floats(0, 1), st.integers(1, 20))
def test_weights_reflection_symmetry(labels, y, n_av):
    for cfg in (HardAdaptive(n_av), HardFixed(0.1)):
        a = vicinal_weights(labels, y, cfg)
        b = vicinal_weights(2 * y - labels, y, cfg)
        # reflection can perturb distances by one rounding step; compare away from the boundary
        kappa = adaptive_radius(labels, y, n_av) if isinstance(cfg, HardAdaptive) else 0.1
        safe = np.abs(np.abs(labels - y) - kappa) > 1e-12
        assert np.array_equal(a[safe], b[safe])


# -- weights ----------------------------------------------------------------

def test_weights_examples():
    assert vicinal_weights(FIVE, 3.0, HardFixed(math.inf)).tolist() == [1.0] * 5
    assert vicinal_weights(FIVE, 3.0, HardAdaptive(3)).tolist() == [0, 1, 1, 1, 0]
    assert vicinal_weights([0.0, 1.0], 0.4, HardFixed(0.5)).tolist() == [1, 0]


def test_weights_batch_shape():
    assert vicinal_weights(FIVE, np.array([1.0, 2.0, 3.5]), HardAdaptive(2)).shape == (3, 5)


def test_config_validation():
    with pytest.raises(ConfigError):
        HardFixed(0.0)
    with pytest.raises(ConfigError):
        HardAdaptive(0)
    with pytest.raises(ConfigError):
        KdeConfig(-1.0)


# -- KDE --------------------------------------------------------------------

def test_kde_examples():
    assert kde_density([0.4], 0.4, KdeConfig(0.1)) == 1.0
    assert kde_density([0.0], 0.2, KdeConfig(0.2)) == pytest.approx(0.60653, abs=1e-5)
    assert kde_density([-0.3, 0.3], 0.1, KdeConfig(0.2)) == pytest.approx(kde_density([-0.3, 0.3], -0.1, KdeConfig(0.2)))


@given(label_sets, st.floats(0, 1), st.floats(-5, 5))
def test_kde_translation_invariant(labels, y, c):
    cfg = KdeConfig(0.1)
    a = kde_density(labels, y, cfg)
    assert 0 <= a <= 1
    assert kde_density(labels + c, y + c, cfg) == pytest.approx(a, rel=1e-9, abs=1e-300)


def test_silverman_bandwidth():
    labels = np.linspace(0, 1, 1000)
    assert silverman_bandwidth(labels) == pytest.approx(1.06 * np.std(labels, ddof=1) * 1000 ** -0.2)
    assert silverman_bandwidth([0.5, 0.5]) > 0


def test_sample_target_label_degenerate_and_seeded():
    labels = np.array([0.1, 0.5, 0.9])
    rng = np.random.default_rng(0)
    draws = [sample_target_label(labels, KdeConfig(1e-300), rng) for _ in range(20)]
    assert set(draws) <= set(labels.tolist())
    a = [sample_target_label(labels, KdeConfig(0.1), np.random.default_rng(7)) for _ in range(3)]
    b = [sample_target_label(labels, KdeConfig(0.1), np.random.default_rng(7)) for _ in range(3)]
    assert a == b


def test_sample_target_label_mean():
    rng = np.random.default_rng(1)
    labels = rng.uniform(0, 1, 200)
    cfg = KdeConfig(0.05)
    draws = np.array([sample_target_label(labels, cfg, rng) for _ in range(100_000)])
    se = math.sqrt((np.var(labels) + cfg.sigma_kde ** 2) / draws.size)
    assert abs(draws.mean() - labels.mean()) < 3 * se


# -- vicinal index ----------------------------------------------------------

def test_single_member_vicinity():
    ds = ds_of([0.0, 0.5, 1.0])
    rng = np.random.default_rng(0)
    assert {sample_vicinal_index(ds, 0.5, HardFixed(0.1), rng) for _ in range(20)} == {1}


def test_vicinal_index_uniform():
    ds = ds_of(FIVE)
    rng = np.random.default_rng(3)
    draws = np.array([sample_vicinal_index(ds, 3.0, HardAdaptive(3), rng) for _ in range(10_000)])
    assert set(np.unique(draws)) == {1, 2, 3}
    counts = np.bincount(draws, minlength=5)[1:4]
    assert stats.chisquare(counts).pvalue > 1e-3


def test_empty_fixed_vicinity_raises():
    with pytest.raises(EmptyVicinityError):
        sample_vicinal_index(ds_of(FIVE), 2.5, HardFixed(1e-9), np.random.default_rng(0))


# -- dataset ----------------------------------------------------------------

def test_dataset_validation():
    with pytest.raises(ConfigError):
        LabeledDataset(np.zeros((2, 2)), np.zeros(3), (0, 1))
    with pytest.raises(ConfigError):
        LabeledDataset(np.zeros((1, 2)), np.array([2.0]), (0, 1))
    with pytest.raises(ConfigError):
        LabeledDataset(np.zeros((0, 2)), np.zeros(0), (0, 1))


def test_csv_round_trip(tmp_path, rng):
    ds = LabeledDataset(rng.standard_normal((7, 3)), rng.uniform(0, 1, 7), (0, 1))
    write_dataset_csv(ds, tmp_path / "d.csv")
    back = read_dataset_csv(tmp_path / "d.csv", (0, 1))
    assert np.array_equal(back.samples, ds.samples)
    assert np.array_equal(back.labels, ds.labels)
    assert (tmp_path / "d.csv").read_text().splitlines()[0] == "y,x_1,x_2,x_3"
