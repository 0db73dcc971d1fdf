import math

import numpy as np
import pytest
from scipy import stats

from lfblue.channel import (
    FadingModel,
    NetworkModel,
    load_network,
    path_gain,
    sample_distances,
    sample_fading,
    sample_network,
    save_network,
)
from lfblue.flatfile import FormatError
from lfblue.model import ChannelRealization

N = 1_000_000


def within(sample, mean, var, k=5.0):
    return abs(np.mean(sample) - mean) < k * math.sqrt(var / sample.size)


def test_defaults():
    f = FadingModel()
    assert f.nominal_gain == pytest.approx(1e-3, rel=1e-15)
    assert (f.ref_distance, f.path_loss_exp, f.d_min, f.d_max) == (1.0, 2.0, 50.0, 150.0)
    m = NetworkModel()
    assert m.chan_noise_var == pytest.approx(1e-12, rel=1e-15)
    assert (m.obs_gain_mean, m.obs_gain_var, m.obs_noise_var_range) == (1.0, 0.09, (0.05, 0.15))


def test_network_moments():
    p = sample_network(NetworkModel(), N, 0.01, np.random.default_rng(1))
    h, so = p.obs_gains, p.obs_noise_vars
    assert within(h, 1.0, 0.09)
    assert np.var(h) == pytest.approx(0.09, rel=0.01)
    assert within(so, 0.1, 0.01 / 12)
    assert np.var(so) == pytest.approx(0.01 / 12, rel=0.01)
    assert so.min() >= 0.05 and so.max() <= 0.15
    assert np.all(p.chan_noise_vars == p.chan_noise_vars[0]) and p.total_power == 0.01


def test_h_power_target():
    model = NetworkModel(h_power_target=1.2)
    p = sample_network(model, 50, 0.01, np.random.default_rng(2))
    assert np.mean(p.obs_gains**2) == pytest.approx(1.2, rel=1e-12)


def test_distance_moments():
    d = sample_distances(FadingModel(), N, np.random.default_rng(3))
    assert d.min() >= 50 and d.max() <= 150
    assert within(d, 100.0, 100.0**2 / 12)
    assert np.var(d) == pytest.approx(100.0**2 / 12, rel=0.01)


def test_path_gain_points():
    f = FadingModel()
    assert path_gain(f, 1.0) == pytest.approx(1e-3, rel=1e-14)
    assert path_gain(f, 100.0) == pytest.approx(1e-5, rel=1e-14)
    assert sample_fading(f, [1.0], None, small_scale=[1.0]).g[0] == pytest.approx(1e-3, rel=1e-14)
    steep = FadingModel(path_loss_exp=4.0)
    assert path_gain(steep, 10.0) == pytest.approx(1e-5, rel=1e-14)
    with pytest.raises(ValueError):
        path_gain(f, [0.0])


def test_unit_power_rayleigh():
    d = np.array([60.0, 140.0])
    g = sample_fading(FadingModel(), d, np.random.default_rng(4), size=N)
    power = g**2 / (1e-6 / d**2)
    for col in power.T:
        assert within(col, 1.0, 1.0)
    f = g[:, 0] / path_gain(FadingModel(), 60.0)
    assert stats.kstest(f, "rayleigh", args=(0, math.sqrt(0.5))).pvalue > 1e-3


def test_unit_variance_rayleigh():
    fading = FadingModel(rayleigh="unit_variance")
    f = sample_fading(fading, [1.0], np.random.default_rng(5), size=N)[:, 0] / 1e-3
    assert np.var(f) == pytest.approx(1.0, rel=0.01)


def test_single_draw_type_and_determinism():
    f = FadingModel()
    a = sample_fading(f, [70.0, 80.0], np.random.default_rng(6))
    b = sample_fading(f, [70.0, 80.0], np.random.default_rng(6))
    assert isinstance(a, ChannelRealization)
    np.testing.assert_array_equal(a.g, b.g)
    x = sample_network(NetworkModel(), 5, 0.1, np.random.default_rng(7))
    y = sample_network(NetworkModel(), 5, 0.1, np.random.default_rng(7))
    assert x == y


@pytest.mark.parametrize(
    "kwargs",
    [dict(nominal_gain=0.0), dict(ref_distance=-1.0), dict(path_loss_exp=-2.0), dict(d_min=200.0), dict(rayleigh="nope")],
)
def test_invalid_fading(kwargs):
    with pytest.raises(ValueError):
        FadingModel(**kwargs)


@pytest.mark.parametrize(
    "kwargs",
    [dict(obs_noise_var_range=(0.2, 0.1)), dict(obs_gain_var=-1.0), dict(chan_noise_var=0.0), dict(h_power_target=0.0)],
)
def test_invalid_network(kwargs):
    with pytest.raises(ValueError):
        NetworkModel(**kwargs)


def test_zero_sensors():
    with pytest.raises(ValueError):
        sample_network(NetworkModel(), 0, 1.0, np.random.default_rng(0))
    with pytest.raises(ValueError):
        sample_distances(FadingModel(), 0, np.random.default_rng(0))


def test_network_file_round_trip(tmp_path):
    rng = np.random.default_rng(8)
    p = sample_network(NetworkModel(), 7, 0.0123, rng)
    d = sample_distances(FadingModel(), 7, rng)
    path = tmp_path / "net.txt"
    save_network(path, p, d)
    q, e = load_network(path)
    assert q == p
    np.testing.assert_array_equal(e, d)
    save_network(path, p)
    assert load_network(path)[1] is None


def test_network_file_length_mismatch(tmp_path):
    path = tmp_path / "net.txt"
    path.write_text(
        "format lfblue-network\nformat_version 1\nK 3\nP_total 1.0\nprior_variance 1.0\n"
        "obs_gains 1.0 1.0\nobs_noise_vars 0.1 0.1\nchan_noise_vars 1e-12 1e-12\n"
    )
    with pytest.raises(FormatError):
        load_network(path)
