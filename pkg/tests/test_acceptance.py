"""Acceptance suite: one test per criterion, each printed as PASS/FAIL in the
terminal summary.  Seeds are fixed up front (``SEED``) and never tuned."""

import math
import time

import numpy as np
import pytest

from lfblue.allocator import optimal_gains
from lfblue.channel import FadingModel, NetworkModel, sample_distances, sample_fading, sample_network
from lfblue.cli import main
from lfblue.codebook import TrainingSet, load_codebook, save_codebook, select_index, select_indices, train
from lfblue.estimator import blue_estimate, blue_variance, simulate_measurement
from lfblue.harness import (
    EVALUATION,
    TRAINING,
    ExperimentConfig,
    full_feedback_variances,
    limited_feedback_variances,
    sample_geometry,
    stream,
    train_codebook,
)
from lfblue.model import compute_snrs, dbm_to_watts, total_power

SEED = 2026


def default_instance(rng, k, total_power):
    fading = FadingModel()
    params = sample_network(NetworkModel(), k, total_power, rng)
    d = sample_distances(fading, k, rng)
    return params, fading, d


def direct_variance(params, a, g):
    """Inverse of sum h^2 a^2 g^2 / (a^2 g^2 so + sc), independent of the library."""
    h, so, sc = params.obs_gains, params.obs_noise_vars, params.chan_noise_vars
    return 1.0 / np.sum(h**2 * a**2 * g**2 / (a**2 * g**2 * so + sc), axis=-1)


def test_criterion_1_allocator_beats_power_grid():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    frac = np.linspace(0.0, 1.0, 60)
    p1, p2 = (x.ravel() for x in np.meshgrid(frac, frac))
    keep = p1 + p2 <= 1.0 + 1e-12
    split = np.stack([p1[keep], p2[keep], np.clip(1.0 - p1[keep] - p2[keep], 0.0, None)], axis=1)
    worst = -np.inf
    for _ in range(100):
        p_dbm = rng.uniform(5.0, 20.0)
        params, fading, d = default_instance(rng, 3, dbm_to_watts(p_dbm))
        g = sample_fading(fading, d, rng).g
        v = blue_variance(params, optimal_gains(params, g).gains, g)
        powers = split * params.total_power
        a = np.sqrt(powers / (params.obs_gains**2 * params.prior_variance + params.obs_noise_vars))
        best = direct_variance(params, a, g).min()
        worst = max(worst, v / best - 1.0)
        assert v <= best * (1 + 1e-3)
    print(f"max relative excess over grid optimum: {worst:.3e}")
    assert time.perf_counter() - t0 < 30


def test_criterion_2_single_sensor_closed_form():
    rng = np.random.default_rng(SEED)
    for _ in range(200):
        params, fading, d = default_instance(rng, 1, dbm_to_watts(rng.uniform(-10, 30)))
        g = sample_fading(fading, d, rng).g
        a = optimal_gains(params, g).gains
        assert total_power(params, a) == pytest.approx(params.total_power, rel=1e-9)
        s = compute_snrs(params, g)
        x = s.gamma * a**2 * params.obs_noise_vars
        closed = params.prior_variance * (1 + x) / (s.beta * x)
        assert blue_variance(params, a, g) == pytest.approx(closed[0], rel=1e-12)


def test_criterion_3_blue_mse_matches_variance():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    params, fading, d = default_instance(rng, 5, dbm_to_watts(10.0))
    g = sample_fading(fading, d, rng)
    a = optimal_gains(params, g).gains
    theta, y = simulate_measurement(params, a, g, rng, size=1_000_000)
    mse = np.mean((blue_estimate(params, a, g, y) - theta) ** 2)
    var = blue_variance(params, a, g)
    print(f"empirical MSE {mse:.6g} vs variance {var:.6g}")
    assert mse == pytest.approx(var, rel=0.01)
    assert time.perf_counter() - t0 < 60


def test_criterion_4_lloyd_history_monotone():
    t0 = time.perf_counter()
    rng = np.random.default_rng(SEED)
    for run in range(20):
        bits = 2 if run % 2 == 0 else 3
        params, fading, d = default_instance(rng, 5, dbm_to_watts(rng.uniform(5.0, 20.0)))
        ts = TrainingSet.from_channels(params, sample_fading(fading, d, rng, size=1000))
        book = train(params, ts, bits, 1e-6, rng=rng)
        h = np.array(book.history)
        assert np.all(h[1:] <= h[:-1]), f"run {run}: history increased"
        assert book.iterations <= 500 and book.converged
    assert time.perf_counter() - t0 < 120


@pytest.fixture(scope="module")
def sweep():
    """Per-trial variances on the default sweep, drawn with the harness streams.

    Returns ``{(K, L): (P_dBm, trials)}`` arrays with ``L = None`` for full feedback.
    """
    cfg = ExperimentConfig(master_seed=SEED)
    plan = {3: (2,), 5: (2, 4), 10: (2, 4)}
    out = {}
    for k, bit_list in plan.items():
        params, d = sample_geometry(cfg, k)
        train_g = sample_fading(cfg.fading, d, stream(SEED, TRAINING, k, 0), size=cfg.train_size)
        eval_g = sample_fading(cfg.fading, d, stream(SEED, EVALUATION, k, 0), size=cfg.mc_trials)
        full, limited = [], {b: [] for b in bit_list}
        for p_dbm in cfg.p_total_dbm:
            p = params.with_power(dbm_to_watts(p_dbm))
            full.append(full_feedback_variances(p, eval_g))
            for b in bit_list:
                book = train_codebook(cfg, p, train_g, b, (k, 0))
                limited[b].append(limited_feedback_variances(p, book, eval_g))
        out[k, None] = np.array(full)
        for b in bit_list:
            out[k, b] = np.array(limited[b])
    out["p_dbm"] = cfg.p_total_dbm
    return out


def test_criterion_5_limited_never_beats_full(sweep):
    for k in (5, 10):
        full = sweep[k, None]
        assert full.shape[1] == 5000
        for b in (2, 4):
            q = sweep[k, b]
            frac = np.mean(q >= full)
            print(f"K={k} L={b}: limited >= full in {100 * frac:.4f}% of {q.size} trials")
            assert np.all(q >= full)


def _mean_se(x):
    assert np.all(np.isfinite(x))
    return x.mean(), x.std(ddof=1) / math.sqrt(x.size)


def test_criterion_6_more_bits_close_the_gap(sweep):
    full, q4, q2 = sweep[5, None], sweep[5, 4], sweep[5, 2]
    for i, p_dbm in enumerate(sweep["p_dbm"]):
        mf, m4, m2 = full[i].mean(), q4[i].mean(), q2[i].mean()
        # paired difference of the two gaps: (q2 - full) - (q4 - full)
        diff, se = _mean_se(q2[i] - q4[i])
        print(f"P={p_dbm:5.1f} dBm full={mf:.5f} L4={m4:.5f} L2={m2:.5f} gap2-gap4={diff:.5f} ({diff / se:.1f} SE)")
        assert mf <= m4 <= m2
        assert diff > 3 * se


def test_criterion_7_more_sensors_lower_variance(sweep):
    for i, p_dbm in enumerate(sweep["p_dbm"]):
        stats = {k: _mean_se(sweep[k, 2][i]) for k in (3, 5, 10)}
        print(f"P={p_dbm:5.1f} dBm " + " ".join(f"K={k}: {m:.5f}+-{s:.5f}" for k, (m, s) in stats.items()))
        for lo, hi in ((10, 5), (5, 3)):
            (m_lo, s_lo), (m_hi, s_hi) = stats[lo], stats[hi]
            assert m_lo + 3 * math.hypot(s_lo, s_hi) < m_hi


def test_criterion_8_run_is_byte_deterministic(tmp_path):
    t0 = time.perf_counter()
    cfg = tmp_path / "cfg.json"
    cfg.write_text(
        '{"k_values": [5, 10], "l_values": [2, 4], "p_sweep_dbm": {"start": 5, "stop": 20, "step": 5},'
        ' "train_size": 2000, "mc_trials": 2000}'
    )
    outs = []
    for name, threads in (("a", "1"), ("b", "1"), ("c", "2"), ("d", "4")):
        path = tmp_path / f"{name}.csv"
        assert main(["run", "--config", str(cfg), "--seed", str(SEED), "--out", str(path), "--threads", threads]) == 0
        outs.append(path.read_bytes())
    assert all(o == outs[0] for o in outs[1:])
    assert time.perf_counter() - t0 < 600


def test_criterion_9_codebook_persistence(tmp_path):
    t0 = time.perf_counter()
    cfg = ExperimentConfig(master_seed=SEED)
    params, d = sample_geometry(cfg, 5)
    params = params.with_power(dbm_to_watts(12.0))
    train_g = sample_fading(cfg.fading, d, stream(SEED, TRAINING, 5, 0), size=cfg.train_size)
    book = train_codebook(cfg, params, train_g, 4, (5, 0))
    path = tmp_path / "book.txt"
    save_codebook(book, path)
    back = load_codebook(path)
    fresh = sample_fading(cfg.fading, d, np.random.default_rng(SEED + 1), size=1000)
    i1, v1, _ = select_indices(params, book, fresh)
    i2, v2, _ = select_indices(params, back, fresh)
    np.testing.assert_array_equal(i1, i2)
    np.testing.assert_array_equal(v1, v2)
    assert [select_index(params, back, g) for g in fresh] == list(i1)
    assert time.perf_counter() - t0 < 60

