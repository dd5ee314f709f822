import json
import math
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from condedm.covariance import ConfigError
from condedm.metrics import (
    EvalConfig,
    MetricsReport,
    label_consistency,
    random_directions,
    recover_labels,
    sliced_w1,
    sliding_distance,
    w1_1d,
)
from condedm.synthdata import DatasetSpec, generate

samples = st.lists(st.floats(-100, 100), min_size=1, max_size=30)


def test_w1_examples():
    assert w1_1d([0.3, 0.1], [0.1, 0.3]) == 0.0
    assert w1_1d([0.0], [1.0]) == 1.0
    assert w1_1d([0.0, 0.0], [0.0, 2.0]) == 1.0
    assert w1_1d([0.0], [0.0, 2.0]) == 1.0
    with pytest.raises(ValueError):
        w1_1d([], [1.0])


def test_w1_unequal_sizes_against_scipy(rng):
    from scipy.stats import wasserstein_distance

    for _ in range(20):
        a = rng.standard_normal(rng.integers(1, 30))
        b = rng.standard_normal(rng.integers(1, 30)) + 0.5
        assert w1_1d(a, b) == pytest.approx(wasserstein_distance(a, b), rel=1e-10, abs=1e-12)


@given(samples, samples, st.floats(-50, 50))
def test_w1_symmetric_and_translation_equivariant(a, b, c):
    d = w1_1d(a, b)
    assert d >= 0
    assert d == pytest.approx(w1_1d(b, a), rel=1e-12, abs=1e-9)
    assert w1_1d(np.add(a, c), np.add(b, c)) == pytest.approx(d, rel=1e-9, abs=1e-9)


@given(samples, samples, samples)
def test_w1_triangle(a, b, c):
    assert w1_1d(a, c) <= w1_1d(a, b) + w1_1d(b, c) + 1e-9


def test_directions_unit_and_seeded():
    u = random_directions(3, 10, 4)
    np.testing.assert_allclose(np.linalg.norm(u, axis=1), 1.0, rtol=1e-15)
    assert np.array_equal(u, random_directions(3, 10, 4))


def test_sliced_shift_along_direction(rng):
    x = rng.standard_normal((50, 2))
    u = np.array([[0.6, 0.8]])
    assert sliced_w1(x, x + 0.3 * u[0], u) == pytest.approx(0.3, rel=1e-12)


def _real(seed=0, n=2000):
    spec = DatasetSpec("gaussian_shift", n_samples=n, noise_std=0.1, seed=seed)
    return spec, generate(spec)


def test_sliding_identical_is_zero():
    _, ds = _real()
    res = sliding_distance(ds.labels, ds.samples, ds.labels, ds.samples, EvalConfig())
    assert res.distances == [0.0] * 10 and res.mean_distance == 0.0 and not res.starved


def test_sliding_order_invariant_and_deterministic(rng):
    _, ds = _real()
    _, other = _real(seed=1)
    cfg = EvalConfig(seed=3)
    a = sliding_distance(ds.labels, ds.samples, other.labels, other.samples, cfg)
    p = rng.permutation(other.n)
    b = sliding_distance(ds.labels, ds.samples, other.labels[p], other.samples[p], cfg)
    assert a.distances == pytest.approx(b.distances, rel=1e-12)
    c = sliding_distance(ds.labels, ds.samples, other.labels, other.samples, cfg)
    assert a.distances == c.distances


def test_sliding_starved_window_reported():
    _, ds = _real(n=200)
    keep = ds.labels < 0.5
    with pytest.warns(RuntimeWarning, match="starved"):
        res = sliding_distance(ds.labels, ds.samples, ds.labels[keep], ds.samples[keep], EvalConfig())
    assert res.starved and all(c > 0.5 for c in res.starved)
    assert all(d is None for c, d in zip(res.centers, res.distances) if c in res.starved)
    assert math.isfinite(res.mean_distance)


def test_sliding_dimension_mismatch():
    with pytest.raises(ConfigError):
        sliding_distance([0.5, 0.5], np.zeros((2, 2)), [0.5, 0.5], np.zeros((2, 3)), EvalConfig())


def test_eval_config_validation():
    with pytest.raises(ConfigError):
        EvalConfig(window=0.0)
    with pytest.raises(ConfigError):
        EvalConfig(centers=(1.5,)).check_range((0, 1))


# -- label consistency -------------------------------------------------------------

def test_exact_samples_have_zero_error():
    spec = DatasetSpec("ring", noise_std=0.0)
    y = np.linspace(0, 0.99, 25)
    ds_ring = generate(DatasetSpec("ring", n_samples=25, noise_std=0.0, seed=1))
    assert label_consistency(ds_ring.samples, ds_ring.labels, spec) == pytest.approx(0.0, abs=1e-14)
    shift = DatasetSpec("gaussian_shift", d=3)
    assert label_consistency(shift.mean(y), y, shift) == pytest.approx(0.0, abs=1e-14)


def test_real_data_at_noise_floor():
    spec, ds = _real(n=20_000)
    floor = spec.noise_std * math.sqrt(2 / math.pi)
    assert label_consistency(ds.samples, ds.labels, spec) == pytest.approx(floor, rel=0.2)


def test_real_data_lower_bounds_noisy_generator():
    for seed in range(5):
        spec, ds = _real(seed=seed)
        rng = np.random.default_rng(seed)
        fake = ds.samples + 0.1 * rng.standard_normal(ds.samples.shape)
        assert label_consistency(ds.samples, ds.labels, spec) <= label_consistency(fake, ds.labels, spec)


def test_recover_unsupported():
    spec = DatasetSpec("ring")
    object.__setattr__(spec, "kind", "other")
    with pytest.raises(ConfigError):
        recover_labels(np.zeros((1, 2)), spec)


def test_report_json(tmp_path):
    rep = MetricsReport([0.5], [0.1], 0.1, 0.08, "abc", 3, [])
    rep.write(tmp_path / "r" / "m.json")
    back = json.loads((tmp_path / "r" / "m.json").read_text())
    assert back["config_hash"] == "abc" and back["seed"] == 3
    assert rep.to_json() == rep.to_json()


def test_no_warning_when_full():
    _, ds = _real()
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        sliding_distance(ds.labels, ds.samples, ds.labels, ds.samples, EvalConfig())
