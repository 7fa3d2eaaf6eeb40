import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from noisy_target.harness.corpus import family_spec
from noisy_target.harness.overlap import (
    embed,
    hz_to_mel,
    mel_filterbank,
    mel_to_hz,
    noise_overlap_diagnostic,
    overlap_from_embeddings,
)
from noisy_target.signal import synth


def _pool(family, base, n=8):
    return [synth(family_spec(family, 0.5, base + i)) for i in range(n)]


def test_mel_inverse():
    f = np.array([0.0, 100.0, 1000.0, 8000.0])
    assert np.allclose(mel_to_hz(hz_to_mel(f)), f)
    assert hz_to_mel(1000.0) == pytest.approx(1000.0, abs=0.5)


def test_filterbank_shape():
    fb = mel_filterbank(16, 512, 16000)
    assert fb.shape == (16, 257)
    assert np.all(fb >= 0) and np.all(fb.max(axis=1) > 0.5)


def test_self_overlap_is_one():
    pool = _pool("pink", 0)
    assert noise_overlap_diagnostic(pool, pool) == 1.0


def test_pink_closer_than_band():
    obs = _pool("pink", 100)
    same = noise_overlap_diagnostic(obs, _pool("pink", 200))
    band = noise_overlap_diagnostic(obs, _pool("band", 300))
    assert 0 < band < same <= 1


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31), st.integers(8, 14), st.integers(8, 14))
def test_symmetric_and_bounded(seed, na, nb):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((na, 16))
    b = rng.standard_normal((nb, 16)) + rng.uniform(0, 3)
    s = overlap_from_embeddings(a, b)
    assert s == overlap_from_embeddings(b, a)
    assert 0 < s <= 1


def test_small_pool_rejected():
    pool = _pool("white", 0)
    with pytest.raises(ValueError, match="at least 8"):
        noise_overlap_diagnostic(pool[:7], pool)


def test_embedding_is_16_bands():
    assert embed(_pool("white", 0, 1)[0]).shape == (16,)
