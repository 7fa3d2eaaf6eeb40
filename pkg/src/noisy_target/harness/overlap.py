"""Scalar overlap score between two noise pools.

Each clip is embedded as its per-band mean log energy over a mel-spaced
triangular filterbank. The score is exp(-d), where d is the symmetrized mean
nearest-neighbour distance between the pools divided by the median
within-pool pairwise distance of both pools together.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..signal import Waveform
from ..stft import StftParams, stft

N_BANDS = 16
MIN_POOL = 8
_LOG_FLOOR = 1e-10


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_bands: int, n_fft: int, sample_rate: int) -> np.ndarray:
    """Triangular filters, shape (n_bands, n_fft // 2 + 1), spanning 0..sr/2."""
    freqs = np.fft.rfftfreq(n_fft, d=1.0 / sample_rate)
    edges = mel_to_hz(np.linspace(0.0, hz_to_mel(sample_rate / 2), n_bands + 2))
    fb = np.zeros((n_bands, freqs.size))
    for b in range(n_bands):
        lo, mid, hi = edges[b], edges[b + 1], edges[b + 2]
        rise = (freqs - lo) / (mid - lo)
        fall = (hi - freqs) / (hi - mid)
        fb[b] = np.maximum(0.0, np.minimum(rise, fall))
    return fb


def embed(w: Waveform, p: StftParams = StftParams(), n_bands: int = N_BANDS) -> np.ndarray:
    power = np.abs(stft(w, p).bins) ** 2
    fb = mel_filterbank(n_bands, p.win_len, w.sample_rate)
    band_energy = fb @ power
    return np.log(band_energy + _LOG_FLOOR).mean(axis=1)


def _pairwise(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.sqrt(np.maximum(((a[:, None, :] - b[None, :, :]) ** 2).sum(-1), 0.0))


def overlap_from_embeddings(ea: np.ndarray, eb: np.ndarray) -> float:
    if len(ea) < MIN_POOL or len(eb) < MIN_POOL:
        raise ValueError(f"each pool needs at least {MIN_POOL} clips, got {len(ea)} and {len(eb)}")
    cross = _pairwise(ea, eb)
    d_ab = cross.min(axis=1).mean()
    d_ba = cross.min(axis=0).mean()
    within = np.concatenate([
        _pairwise(ea, ea)[np.triu_indices(len(ea), 1)],
        _pairwise(eb, eb)[np.triu_indices(len(eb), 1)],
    ])
    scale = float(np.median(within))
    d = 0.5 * (d_ab + d_ba)
    if d == 0.0:
        return 1.0
    if scale <= 0.0:
        return 0.0 if d > 0 else 1.0
    return float(np.exp(-d / scale))


def noise_overlap_diagnostic(pool_a: Sequence[Waveform], pool_b: Sequence[Waveform],
                             p: StftParams = StftParams()) -> float:
    """Overlap score in (0, 1]; 1 when the pools coincide."""
    if len(pool_a) < MIN_POOL or len(pool_b) < MIN_POOL:
        raise ValueError(f"each pool needs at least {MIN_POOL} clips, got {len(pool_a)} and {len(pool_b)}")
    ea = np.stack([embed(w, p) for w in pool_a])
    eb = np.stack([embed(w, p) for w in pool_b])
    return overlap_from_embeddings(ea, eb)
