"""Waveforms, synthetic signal generation, power measurement and WAV I/O."""

from __future__ import annotations

import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile
from scipy.signal import lfilter

DEFAULT_SAMPLE_RATE = 16000
PEAK_LEVEL = 0.5

SYNTH_KINDS = ("speech_like", "white_noise", "pink_noise", "band_noise", "babble_like")

# Kellet's "economy" pink filter, ~1/f within +-0.05 dB above 9 Hz at 44.1 kHz
_PINK_B = np.array([0.049922035, -0.095993537, 0.050612699, -0.004408786])
_PINK_A = np.array([1.0, -2.494956002, 2.017265875, -0.522189400])


class SignalError(ValueError):
    pass


class WavFormatError(SignalError):
    pass


@dataclass(frozen=True, eq=False)
class Waveform:
    """Mono real signal in double precision. Samples are read-only."""

    samples: np.ndarray
    sample_rate: int = DEFAULT_SAMPLE_RATE

    def __post_init__(self):
        arr = np.array(self.samples, dtype=np.float64, copy=True).reshape(-1)
        if arr.size < 1:
            raise SignalError("waveform must contain at least one sample")
        if not np.all(np.isfinite(arr)):
            raise SignalError("waveform samples must be finite")
        if int(self.sample_rate) <= 0:
            raise SignalError(f"sample_rate must be positive, got {self.sample_rate}")
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "sample_rate", int(self.sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate

    def with_samples(self, samples) -> "Waveform":
        return Waveform(samples, self.sample_rate)

    def __add__(self, other: "Waveform") -> "Waveform":
        _check_compatible(self, other)
        return Waveform(self.samples + other.samples, self.sample_rate)

    def __sub__(self, other: "Waveform") -> "Waveform":
        _check_compatible(self, other)
        return Waveform(self.samples - other.samples, self.sample_rate)

    def scaled(self, gain: float) -> "Waveform":
        return Waveform(self.samples * gain, self.sample_rate)


def _check_compatible(a: Waveform, b: Waveform) -> None:
    if len(a) != len(b):
        raise SignalError(f"length mismatch: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise SignalError(f"sample rate mismatch: {a.sample_rate} vs {b.sample_rate}")


def mean_power(w) -> float:
    """Mean of squared samples. Accepts a Waveform or a raw array."""
    x = w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)
    if x.size == 0:
        raise SignalError("mean power of an empty signal is undefined")
    return float(np.dot(x, x) / x.size)


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from a mix of ints and strings."""
    ints = []
    for p in parts:
        if isinstance(p, str):
            ints.append(zlib.crc32(p.encode("utf-8")))
        else:
            ints.append(int(p) & 0xFFFFFFFFFFFFFFFF)
    ss = np.random.SeedSequence(ints)
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def child_seeds(seed, n: int) -> list[np.random.SeedSequence]:
    """``n`` independent child seeds. Unlike ``SeedSequence.spawn`` this never
    mutates its argument, so repeated calls give the same children."""
    if isinstance(seed, np.random.SeedSequence):
        entropy, key = seed.entropy, tuple(seed.spawn_key)
    else:
        entropy, key = int(seed), ()
    return [np.random.SeedSequence(entropy, spawn_key=key + (i,)) for i in range(n)]


@dataclass(frozen=True)
class SynthSpec:
    kind: str
    duration_s: float
    seed: int = 0
    lo_hz: float | None = None
    hi_hz: float | None = None

    def __post_init__(self):
        if self.kind not in SYNTH_KINDS:
            raise SignalError(f"unknown synth kind {self.kind!r}; expected one of {SYNTH_KINDS}")
        if not self.duration_s > 0:
            raise SignalError(f"duration_s must be positive, got {self.duration_s}")
        if self.kind == "band_noise" and (self.lo_hz is None or self.hi_hz is None):
            raise SignalError("band_noise needs lo_hz and hi_hz")

    def validate(self, sample_rate: int) -> None:
        if self.kind == "band_noise":
            if not (0 <= self.lo_hz < self.hi_hz <= sample_rate / 2):
                raise SignalError(
                    f"invalid band edges [{self.lo_hz}, {self.hi_hz}] Hz for sample rate {sample_rate}"
                )

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "duration_s": self.duration_s, "seed": self.seed}
        if self.kind == "band_noise":
            d.update(lo_hz=self.lo_hz, hi_hz=self.hi_hz)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthSpec":
        return cls(
            kind=d["kind"],
            duration_s=float(d["duration_s"]),
            seed=int(d.get("seed", 0)),
            lo_hz=None if d.get("lo_hz") is None else float(d["lo_hz"]),
            hi_hz=None if d.get("hi_hz") is None else float(d["hi_hz"]),
        )


def _peak_normalize(x: np.ndarray) -> np.ndarray:
    peak = np.max(np.abs(x))
    if peak == 0:
        return x
    return x * (PEAK_LEVEL / peak)


def _gap_mask(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    """Envelope multiplier with 2-4 silent gaps covering 20% of the signal."""
    n_gaps = int(rng.integers(2, 5))
    silent = int(round(0.2 * n))
    weights = rng.uniform(0.5, 1.5, size=n_gaps)
    lengths = np.floor(silent * weights / weights.sum()).astype(int)
    lengths[-1] += silent - lengths.sum()
    voiced = n - silent
    # split voiced samples into n_gaps + 1 runs, interior runs non-empty
    cuts = np.sort(rng.choice(np.arange(1, max(voiced, n_gaps + 1)), size=n_gaps, replace=False))
    runs = np.diff(np.concatenate([[0], cuts, [voiced]]))
    mask = np.ones(n)
    pos = 0
    for i in range(n_gaps):
        pos += runs[i]
        mask[pos:pos + lengths[i]] = 0.0
        pos += lengths[i]
    # 5 ms ramps so gaps do not click
    ramp = max(1, int(0.005 * sample_rate))
    kernel = np.hanning(2 * ramp + 1)
    kernel /= kernel.sum()
    smooth = np.convolve(mask, kernel, mode="same")
    return np.where(mask == 0, 0.0, smooth)


def _speech_like(n: int, sample_rate: int, rng: np.random.Generator) -> np.ndarray:
    t = np.arange(n) / sample_rate
    # fundamental drifting inside 90-250 Hz
    base = rng.uniform(100.0, 220.0)
    n_knots = max(2, int(n / sample_rate * 4) + 2)
    knots = base * np.exp(rng.normal(0.0, 0.12, size=n_knots))
    f0 = np.interp(np.linspace(0, n_knots - 1, n), np.arange(n_knots), knots)
    f0 = np.clip(f0, 90.0, 250.0)
    phase = 2 * np.pi * np.cumsum(f0) / sample_rate

    # slowly moving formant envelope
    n_form_knots = max(2, int(n / sample_rate * 5) + 2)
    formants = [
        np.interp(np.linspace(0, n_form_knots - 1, n), np.arange(n_form_knots),
                  rng.uniform(lo, hi, size=n_form_knots))
        for lo, hi in ((300.0, 900.0), (900.0, 2300.0), (2300.0, 3400.0))
    ]
    bandwidths = (120.0, 180.0, 250.0)
    fmax = min(4500.0, 0.45 * sample_rate)
    n_harm = int(fmax // 90.0)
    x = np.zeros(n)
    for h in range(1, n_harm + 1):
        fh = h * f0
        if np.min(fh) >= fmax:
            break
        env = np.full(n, 0.05)
        for fc, bw, g in zip(formants, bandwidths, (1.0, 0.6, 0.3)):
            env += g * np.exp(-0.5 * ((fh - fc) / bw) ** 2)
        amp = env / h ** 0.5 * (fh < fmax)
        x += amp * np.sin(h * phase + rng.uniform(0, 2 * np.pi))

    syl_rate = rng.uniform(3.0, 6.0)
    am = 0.55 - 0.45 * np.cos(2 * np.pi * syl_rate * t + rng.uniform(0, 2 * np.pi))
    return x * am * _gap_mask(n, sample_rate, rng)


def synth(spec: SynthSpec, sample_rate: int = DEFAULT_SAMPLE_RATE) -> Waveform:
    """Deterministic synthetic signal, peak-normalized to 0.5."""
    spec.validate(sample_rate)
    n = int(round(spec.duration_s * sample_rate))
    if n < 1:
        raise SignalError("duration too short for one sample")
    rng = np.random.default_rng(derive_seed(spec.seed, spec.kind))

    if spec.kind == "speech_like":
        x = _speech_like(n, sample_rate, rng)
    elif spec.kind == "white_noise":
        x = rng.uniform(-1.0, 1.0, size=n)
    elif spec.kind == "pink_noise":
        warm = 4096
        white = rng.uniform(-1.0, 1.0, size=n + warm)
        x = lfilter(_PINK_B, _PINK_A, white)[warm:]
    elif spec.kind == "band_noise":
        spec_x = np.fft.rfft(rng.uniform(-1.0, 1.0, size=n))
        freqs = np.fft.rfftfreq(n, d=1.0 / sample_rate)
        spec_x[(freqs < spec.lo_hz) | (freqs > spec.hi_hz)] = 0.0
        x = np.fft.irfft(spec_x, n)
    else:
        talkers = 6
        x = np.zeros(n)
        for i in range(talkers):
            sub = _speech_like(n, sample_rate, np.random.default_rng(derive_seed(spec.seed, "babble", i)))
            x += sub / max(np.max(np.abs(sub)), 1e-12)
    return Waveform(_peak_normalize(x), sample_rate)


def band_energy_fraction(w: Waveform, lo_hz: float, hi_hz: float) -> float:
    """Fraction of DFT energy inside [lo_hz, hi_hz]."""
    power = np.abs(np.fft.rfft(w.samples)) ** 2
    freqs = np.fft.rfftfreq(len(w), d=1.0 / w.sample_rate)
    total = power.sum()
    if total == 0:
        return 0.0
    return float(power[(freqs >= lo_hz) & (freqs <= hi_hz)].sum() / total)


def write_wav(path, w: Waveform, encoding: str = "pcm16") -> None:
    """Write a mono WAV. encoding is 'pcm16' or 'float32'; PCM output is clamped."""
    path = Path(path)
    if encoding == "pcm16":
        data = np.round(np.clip(w.samples, -1.0, 1.0) * 32767.0).astype(np.int16)
    elif encoding == "float32":
        data = w.samples.astype(np.float32)
    else:
        raise WavFormatError(f"unsupported encoding {encoding!r}; use 'pcm16' or 'float32'")
    wavfile.write(str(path), w.sample_rate, data)


def read_wav(path) -> Waveform:
    path = Path(path)
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError:
        raise
    except Exception as exc:  # scipy raises ValueError for most malformed headers
        raise WavFormatError(f"{path}: malformed or unsupported WAV ({exc})") from exc
    if data.ndim != 1:
        raise WavFormatError(f"{path}: unsupported channel count {data.shape[1]} (mono required)")
    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32767.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise WavFormatError(
            f"{path}: unsupported sample encoding {data.dtype} (16-bit PCM or 32-bit float required)"
        )
    return Waveform(samples, rate)
