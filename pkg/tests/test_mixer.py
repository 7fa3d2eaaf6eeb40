import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisy_target.mixer import (
    CLEAN,
    MixError,
    SnrSpec,
    Strategy,
    default_snr_spec,
    fit_length,
    gain_for_snr,
    make_pair,
    measured_snr,
    mix_at_snr,
    swap_noise_augment,
)
from noisy_target.signal import Waveform, mean_power


def _noise(n, seed, scale=1.0):
    return Waveform(scale * np.random.default_rng(seed).standard_normal(n))


def _unit_power(n, seed):
    x = np.random.default_rng(seed).standard_normal(n)
    return Waveform(x / np.sqrt(np.mean(x ** 2)))


def test_gain_closed_forms():
    s, n = _unit_power(1000, 0), _unit_power(1000, 1)
    assert gain_for_snr(s, n, 0.0) == pytest.approx(1.0, abs=1e-12)
    assert gain_for_snr(s, n, 20.0) == pytest.approx(0.1, abs=1e-12)
    assert gain_for_snr(s, n.scaled(2.0), 6.0) == pytest.approx(0.25059, abs=5e-6)
    assert gain_for_snr(s, n.scaled(2.0), 6.0) == pytest.approx(math.sqrt(1 / (4 * 10 ** 0.6)), rel=1e-12)


def test_gain_errors():
    s = _noise(100, 0)
    with pytest.raises(MixError, match="undefined SNR"):
        gain_for_snr(s, Waveform(np.zeros(100)), 0.0)
    with pytest.raises(MixError, match="undefined SNR"):
        gain_for_snr(Waveform(np.zeros(100)), s, 0.0)
    with pytest.raises(MixError):
        gain_for_snr(s, s, float("nan"))


def test_fit_length_crop_and_tile():
    n = Waveform(np.arange(200.0))
    out = fit_length(n, 100, seed=3).samples
    assert np.array_equal(out, np.arange(out[0], out[0] + 100))
    short = Waveform(np.arange(50.0))
    tiled = fit_length(short, 100, seed=4).samples
    assert np.array_equal(tiled[:50], tiled[50:])
    assert np.array_equal(fit_length(n, 77, 9).samples, fit_length(n, 77, 9).samples)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 400), st.integers(1, 900), st.integers(0, 2 ** 31))
def test_fit_length_is_cyclic_slice(src_len, target_len, seed):
    n = Waveform(np.arange(float(src_len)))
    out = fit_length(n, target_len, seed).samples
    assert len(out) == target_len
    # consecutive samples step by one modulo the source length
    assert np.all((np.diff(out) % src_len) == 1 % src_len)


def test_mix_clean_passthrough():
    x, n = _noise(500, 0), _noise(300, 1)
    y, g_n = mix_at_snr(x, n, CLEAN, seed=0)
    assert np.array_equal(y.samples, x.samples)
    assert not np.any(g_n.samples)


def test_mix_equal_power_zero_db():
    x, n = _unit_power(400, 2), _unit_power(400, 3)
    y, g_n = mix_at_snr(x, n, 0.0, seed=1)
    assert np.allclose(g_n.samples, n.samples, atol=1e-12)
    assert np.allclose(y.samples, x.samples + n.samples, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(st.floats(-10, 20), st.integers(0, 2 ** 31), st.integers(200, 4000))
def test_mix_snr_exact(snr, seed, n_len):
    x, n = _noise(1000, seed, 0.3), _noise(n_len, seed + 1, 2.0)
    y, g_n = mix_at_snr(x, n, snr, seed)
    assert abs(measured_snr(x, g_n) - snr) < 1e-9
    assert np.allclose((y - x).samples, g_n.samples, atol=1e-15)


def test_snr_spec_draws():
    rng = np.random.default_rng(0)
    d = [SnrSpec.discrete().draw(rng) for _ in range(200)]
    assert set(d) == {-5.0, 0.0, 5.0, 10.0}
    u = [SnrSpec.uniform().draw(rng) for _ in range(200)]
    assert min(u) >= -5 and max(u) <= 5 and len(set(u)) == 200
    assert SnrSpec.constant(3).draw(rng) == 3.0
    assert default_snr_spec("NyTT") == SnrSpec.uniform()
    assert default_snr_spec(Strategy.CTT) == SnrSpec.discrete()
    with pytest.raises(MixError):
        SnrSpec.uniform(5, -5)


def test_nytt_clean_sentinel_is_identity():
    x, n = _noise(800, 0), _noise(800, 1)
    pair = make_pair("NyTT", {"noisy": x, "noise": n}, SnrSpec.constant(CLEAN), seed=2)
    assert np.array_equal(pair.input.samples, x.samples)
    assert np.array_equal(pair.target.samples, x.samples)


def test_nett_same_noise_same_snr_is_identity():
    s, n = _noise(800, 0), _noise(800, 1)
    pair = make_pair("NeTT", {"clean": s, "noise1": n, "noise2": n}, SnrSpec.constant(5.0), seed=3)
    # same length noise means both crops are the whole clip
    assert np.array_equal(pair.input.samples, pair.target.samples)


def test_ctt_pair_decomposition():
    s, n = _noise(1600, 4), _noise(3000, 5)
    pair = make_pair("CTT", {"clean": s, "noise": n}, SnrSpec.constant(10.0), seed=6)
    assert abs(measured_snr(pair.target, pair.input - pair.target) - 10.0) < 1e-9
    assert pair.strategy is Strategy.CTT


def test_nytt_pair_matches_nett_view():
    # the noisy target of NyTT plays the role of x1 in NeTT with a fixed snr
    s, n_obs, n_add = _noise(1000, 7), _noise(1000, 8), _noise(1000, 9)
    x, _ = mix_at_snr(s, n_obs, 10.0, seed=0)
    pair = make_pair("NyTT", {"noisy": x, "noise": n_add}, SnrSpec.constant(0.0), seed=1)
    assert np.array_equal(pair.target.samples, x.samples)
    assert abs(measured_snr(x, pair.input - x) - 0.0) < 1e-9


def test_make_pair_missing_sources():
    with pytest.raises(MixError, match="missing"):
        make_pair("NyTT", {"clean": _noise(10, 0), "noise": _noise(10, 1)})
    with pytest.raises(ValueError):
        make_pair("XYZ", {})


def test_make_pair_deterministic():
    src = {"clean": _noise(900, 1), "noise": _noise(2000, 2)}
    a, b = make_pair("CTT", src, seed=5), make_pair("CTT", src, seed=5)
    assert np.array_equal(a.input.samples, b.input.samples)
    assert a.meta == b.meta


def test_swap_singleton_pool():
    clean = [_noise(500, i) for i in range(5)]
    pairs = swap_noise_augment(clean, [_noise(700, 99)], seed=0)
    assert all(p.meta["noise_index"] == 0 for p in pairs)


def test_swap_deterministic():
    clean = [_noise(500, i) for i in range(4)]
    pool = [_noise(600, 50 + j) for j in range(3)]
    a = swap_noise_augment(clean, pool, seed=1)
    b = swap_noise_augment(clean, pool, seed=1)
    assert all(np.array_equal(p.input.samples, q.input.samples) for p, q in zip(a, b))


def test_swap_draws_uniform():
    clean = [Waveform(np.full(300, 0.1) + 0.01 * i) for i in range(1000)]
    pool = [_noise(300, j) for j in range(3)]
    counts = np.bincount([p.meta["noise_index"] for p in swap_noise_augment(clean, pool, seed=11)],
                         minlength=3)
    assert np.all(np.abs(counts - 333) <= 60), counts


def test_swap_empty_pool():
    with pytest.raises(MixError):
        swap_noise_augment([_noise(10, 0)], [], seed=0)


def test_mean_power_of_mixture_components():
    x, n = _noise(2000, 1), _noise(2000, 2)
    _, g_n = mix_at_snr(x, n, 5.0, seed=0)
    assert mean_power(x) / mean_power(g_n) == pytest.approx(10 ** 0.5, rel=1e-12)
