"""STFT analysis/synthesis with exact adjoint, complex masking and log-magnitude features.

Framing: the signal is reflect-padded by win_len/2 on both sides, frames start
every ``hop`` samples, and synthesis divides the overlap-added frames by the
summed squared window, so ``istft(stft(x))`` reconstructs ``x`` for any
hop <= win_len/2.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .signal import Waveform


class StftError(ValueError):
    pass


_NORM_FLOOR = 1e-12


@dataclass(frozen=True)
class StftParams:
    win_len: int = 512
    hop: int = 128
    window: str = "hamming"

    def __post_init__(self):
        if self.win_len <= 0 or self.win_len % 2:
            raise StftError(f"win_len must be a positive even number, got {self.win_len}")
        if not 0 < self.hop <= self.win_len:
            raise StftError(f"hop must satisfy 0 < hop <= win_len, got {self.hop}")
        if self.window != "hamming":
            raise StftError(f"only the hamming window is supported, got {self.window!r}")

    @property
    def fft_len(self) -> int:
        return self.win_len

    @property
    def n_bins(self) -> int:
        return self.win_len // 2 + 1

    def n_frames(self, n_samples: int) -> int:
        return n_samples // self.hop + 1

    def to_dict(self) -> dict:
        return {"win_len": self.win_len, "hop": self.hop, "window": self.window}


@lru_cache(maxsize=16)
def _window(win_len: int) -> np.ndarray:
    # periodic Hamming
    n = np.arange(win_len)
    w = 0.54 - 0.46 * np.cos(2 * np.pi * n / win_len)
    w.flags.writeable = False
    return w


def hamming(win_len: int) -> np.ndarray:
    return _window(win_len)


@lru_cache(maxsize=64)
def _synthesis_norm(win_len: int, hop: int, n_frames: int) -> np.ndarray:
    w2 = _window(win_len) ** 2
    total = np.zeros((n_frames - 1) * hop + win_len)
    for k in range(n_frames):
        total[k * hop:k * hop + win_len] += w2
    inv = 1.0 / np.maximum(total, _NORM_FLOOR)
    inv.flags.writeable = False
    return inv


@lru_cache(maxsize=16)
def bin_weights(win_len: int) -> np.ndarray:
    """Multiplicity of each one-sided bin in the full spectrum: 1, 2, ..., 2, 1."""
    c = np.full(win_len // 2 + 1, 2.0)
    c[0] = 1.0
    c[-1] = 1.0
    c.flags.writeable = False
    return c


@dataclass(frozen=True, eq=False)
class Spectrogram:
    """One-sided complex STFT, shape (F, K)."""

    bins: np.ndarray
    params: StftParams
    orig_len: int
    sample_rate: int = 16000

    def __post_init__(self):
        b = np.asarray(self.bins, dtype=np.complex128)
        if b.ndim != 2 or b.shape[0] != self.params.n_bins:
            raise StftError(f"expected {self.params.n_bins} frequency bins, got shape {b.shape}")
        if b.shape[1] != self.params.n_frames(self.orig_len):
            raise StftError(
                f"{b.shape[1]} frames inconsistent with orig_len {self.orig_len} "
                f"(expected {self.params.n_frames(self.orig_len)})"
            )
        if not np.all(np.isfinite(b)):
            raise StftError("spectrogram contains non-finite values")
        object.__setattr__(self, "bins", b)

    @property
    def shape(self) -> tuple[int, int]:
        return self.bins.shape

    def with_bins(self, bins) -> "Spectrogram":
        return Spectrogram(bins, self.params, self.orig_len, self.sample_rate)

    def __add__(self, other: "Spectrogram") -> "Spectrogram":
        _check_same_layout(self, other)
        return self.with_bins(self.bins + other.bins)


def _check_same_layout(a: Spectrogram, b: Spectrogram) -> None:
    if a.params != b.params or a.orig_len != b.orig_len:
        raise StftError("spectrograms have different STFT parameters or lengths")


def tf_inner(a: Spectrogram, b: Spectrogram) -> float:
    """Re<a, b> over the full (two-sided) spectrum, using one-sided storage."""
    _check_same_layout(a, b)
    c = bin_weights(a.params.win_len)[:, None]
    return float(np.sum(c * (a.bins * np.conj(b.bins)).real))


def _frames(x: np.ndarray, p: StftParams, n_frames: int) -> np.ndarray:
    view = np.lib.stride_tricks.sliding_window_view(x, p.win_len)[::p.hop]
    return view[:n_frames]


def stft(w: Waveform, p: StftParams = StftParams()) -> Spectrogram:
    x = w.samples
    half = p.win_len // 2
    if len(x) <= half:
        raise StftError(f"signal of {len(x)} samples is too short for reflect padding of {half}")
    padded = np.pad(x, half, mode="reflect")
    n_frames = p.n_frames(len(x))
    frames = _frames(padded, p, n_frames) * _window(p.win_len)
    return Spectrogram(np.fft.rfft(frames, axis=1).T, p, len(x), w.sample_rate)


def istft(S: Spectrogram) -> Waveform:
    p = S.params
    n_frames = S.shape[1]
    frames = np.fft.irfft(S.bins.T, n=p.win_len, axis=1) * _window(p.win_len)
    out = np.zeros((n_frames - 1) * p.hop + p.win_len)
    for k in range(n_frames):
        out[k * p.hop:k * p.hop + p.win_len] += frames[k]
    out *= _synthesis_norm(p.win_len, p.hop, n_frames)
    half = p.win_len // 2
    return Waveform(out[half:half + S.orig_len], S.sample_rate)


def istft_adjoint(w: Waveform, p: StftParams = StftParams(), orig_len: int | None = None) -> Spectrogram:
    """Adjoint of ``istft`` under the bin-weighted inner product (see ``tf_inner``)."""
    n = len(w)
    if orig_len is not None and orig_len != n:
        raise StftError(f"length mismatch: waveform has {n} samples, forward pass had {orig_len}")
    n_frames = p.n_frames(n)
    half = p.win_len // 2
    buf = np.zeros((n_frames - 1) * p.hop + p.win_len)
    buf[half:half + n] = w.samples
    buf *= _synthesis_norm(p.win_len, p.hop, n_frames)
    frames = _frames(buf, p, n_frames) * _window(p.win_len)
    # irfft's 1/N and the bin multiplicity cancel against the weighted inner product
    return Spectrogram(np.fft.rfft(frames, axis=1).T / p.win_len, p, n, w.sample_rate)


@dataclass(frozen=True, eq=False)
class Mask:
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.ndim != 2:
            raise StftError(f"mask must be 2-D (F, K), got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise StftError("mask contains non-finite values")
        object.__setattr__(self, "values", v)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def apply_mask(S: Spectrogram, mask: Mask | np.ndarray) -> Spectrogram:
    m = mask.values if isinstance(mask, Mask) else np.asarray(mask)
    if m.shape != S.shape:
        raise StftError(f"mask shape {m.shape} does not match spectrogram shape {S.shape}")
    return S.with_bins(m * S.bins)


def log_magnitude(S: Spectrogram, eps: float = 1e-8) -> np.ndarray:
    if not eps > 0:
        raise StftError(f"eps must be positive, got {eps}")
    return np.log(np.abs(S.bins) + eps)
