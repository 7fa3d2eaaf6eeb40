"""SNR-exact mixing and training-pair synthesis for the three target strategies.

SNR convention: 10*log10(P_signal / P_noise) with mean power over the whole
utterance, silences included. For noisy-target pairs the existing noisy
signal is the "signal".
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .signal import Waveform, child_seeds, mean_power

CLEAN = math.inf
DISCRETE_SNRS = (-5.0, 0.0, 5.0, 10.0)
NOISY_TARGET_SNR_RANGE = (-5.0, 5.0)
_SILENCE = 1e-12


class Strategy(str, Enum):
    CTT = "CTT"
    NeTT = "NeTT"
    NyTT = "NyTT"


class MixError(ValueError):
    pass


def _check_snr(snr: float) -> float:
    snr = float(snr)
    if math.isnan(snr) or snr == -math.inf:
        raise MixError(f"invalid SNR {snr}")
    return snr


def gain_for_snr(signal: Waveform, noise: Waveform, snr: float) -> float:
    """Gain g such that signal + g*noise has the requested SNR."""
    snr = _check_snr(snr)
    if math.isinf(snr):
        raise MixError("gain_for_snr needs a finite SNR; use the clean sentinel in mix_at_snr")
    ps, pn = mean_power(signal), mean_power(noise)
    if ps <= _SILENCE or pn <= _SILENCE:
        raise MixError(f"undefined SNR: silent {'signal' if ps <= _SILENCE else 'noise'}")
    return math.sqrt(ps / (pn * 10.0 ** (snr / 10.0)))


def measured_snr(signal: Waveform, noise: Waveform) -> float:
    pn = mean_power(noise)
    if pn == 0:
        return math.inf
    return 10.0 * math.log10(mean_power(signal) / pn)


def fit_length(n: Waveform, target_len: int, seed) -> Waveform:
    """Random crop (longer) or loop-then-crop (shorter) to ``target_len`` samples."""
    rng = np.random.default_rng(seed)
    x = n.samples
    if len(x) >= target_len:
        start = int(rng.integers(0, len(x) - target_len + 1))
        return n.with_samples(x[start:start + target_len])
    reps = -(-target_len // len(x)) + 1
    tiled = np.tile(x, reps)
    start = int(rng.integers(0, len(x)))
    return n.with_samples(tiled[start:start + target_len])


def mix_at_snr(x: Waveform, n: Waveform, snr: float, seed) -> tuple[Waveform, Waveform]:
    """Return (x + g*n_fitted, g*n_fitted) at the requested SNR relative to x."""
    snr = _check_snr(snr)
    if snr == math.inf:
        return x, x.with_samples(np.zeros(len(x)))
    fitted = fit_length(n, len(x), seed)
    if fitted.sample_rate != x.sample_rate:
        raise MixError(f"sample rate mismatch: {x.sample_rate} vs {fitted.sample_rate}")
    g = gain_for_snr(x, fitted, snr)
    scaled = fitted.scaled(g)
    return x + scaled, scaled


@dataclass(frozen=True, eq=False)
class TrainingPair:
    input: Waveform
    target: Waveform
    strategy: Strategy
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if len(self.input) != len(self.target):
            raise MixError(f"pair length mismatch: {len(self.input)} vs {len(self.target)}")
        if self.input.sample_rate != self.target.sample_rate:
            raise MixError("pair sample rate mismatch")


@dataclass(frozen=True)
class SnrSpec:
    """How SNRs are drawn: a fixed value, a discrete set, or a uniform range."""

    fixed: float | None = None
    choices: tuple[float, ...] | None = None
    low: float | None = None
    high: float | None = None

    def draw(self, rng: np.random.Generator) -> float:
        if self.fixed is not None:
            return float(self.fixed)
        if self.choices is not None:
            return float(self.choices[int(rng.integers(0, len(self.choices)))])
        return float(rng.uniform(self.low, self.high))

    @classmethod
    def discrete(cls, values=DISCRETE_SNRS) -> "SnrSpec":
        return cls(choices=tuple(float(v) for v in values))

    @classmethod
    def uniform(cls, low=NOISY_TARGET_SNR_RANGE[0], high=NOISY_TARGET_SNR_RANGE[1]) -> "SnrSpec":
        if not low <= high:
            raise MixError(f"invalid SNR range [{low}, {high}]")
        return cls(low=float(low), high=float(high))

    @classmethod
    def constant(cls, value: float) -> "SnrSpec":
        return cls(fixed=float(value))


def default_snr_spec(strategy: Strategy | str) -> SnrSpec:
    if Strategy(strategy) is Strategy.NyTT:
        return SnrSpec.uniform()
    return SnrSpec.discrete()


_REQUIRED = {
    Strategy.CTT: ("clean", "noise"),
    Strategy.NeTT: ("clean", "noise1", "noise2"),
    Strategy.NyTT: ("noisy", "noise"),
}


def make_pair(strategy, sources: dict, snr_spec: SnrSpec | None = None, seed=0) -> TrainingPair:
    """Synthesize one training pair.

    ``sources`` keys per strategy: CTT ``clean``, ``noise``; NeTT ``clean``,
    ``noise1``, ``noise2``; NyTT ``noisy``, ``noise``. Optional ``ids`` is
    copied into the pair metadata.
    """
    strategy = Strategy(strategy)
    missing = [k for k in _REQUIRED[strategy] if sources.get(k) is None]
    if missing:
        raise MixError(f"{strategy.value} pair requires sources {_REQUIRED[strategy]}; missing {missing}")
    snr_spec = snr_spec or default_snr_spec(strategy)
    draw_seed, crop1, crop2 = child_seeds(seed, 3)
    rng = np.random.default_rng(draw_seed)
    meta = {"ids": sources.get("ids")}

    if strategy is Strategy.CTT:
        snr = snr_spec.draw(rng)
        y, _ = mix_at_snr(sources["clean"], sources["noise"], snr, crop1)
        meta["snr"] = snr
        return TrainingPair(y, sources["clean"], strategy, meta)
    if strategy is Strategy.NeTT:
        snr1, snr2 = snr_spec.draw(rng), snr_spec.draw(rng)
        x1, _ = mix_at_snr(sources["clean"], sources["noise1"], snr1, crop1)
        x2, _ = mix_at_snr(sources["clean"], sources["noise2"], snr2, crop2)
        meta["snr"] = (snr1, snr2)
        return TrainingPair(x1, x2, strategy, meta)
    snr = snr_spec.draw(rng)
    y, _ = mix_at_snr(sources["noisy"], sources["noise"], snr, crop1)
    meta["snr"] = snr
    return TrainingPair(y, sources["noisy"], strategy, meta)


def swap_noise_augment(clean: Sequence[Waveform], noise_pool: Sequence[Waveform], seed,
                       snr_spec: SnrSpec | None = None, ids: Sequence | None = None,
                       noise_ids: Sequence | None = None) -> list[TrainingPair]:
    """Re-mix every clean signal with a noise drawn uniformly from the pool.

    The clean components of a noisy corpus are paired with fresh noises so the
    clean-target model sees the same noise variety as the noisy-target model.
    """
    if len(noise_pool) == 0:
        raise MixError("noise pool is empty")
    snr_spec = snr_spec or SnrSpec.discrete()
    pick_seed, pair_seed = child_seeds(seed, 2)
    rng = np.random.default_rng(pick_seed)
    item_seeds = child_seeds(pair_seed, len(clean))
    pairs = []
    for i, s in enumerate(clean):
        j = int(rng.integers(0, len(noise_pool)))
        pair = make_pair(Strategy.CTT, {"clean": s, "noise": noise_pool[j]}, snr_spec, item_seeds[i])
        pair.meta["noise_index"] = j
        if ids is not None:
            pair.meta["ids"] = (ids[i], noise_ids[j] if noise_ids is not None else j)
        pairs.append(pair)
    return pairs
