"""Minibatch training for clean-, noise- and noisy-target strategies.

Corpora are typed by what they expose. ``CleanCorpus`` holds clean speech and
feeds CTT/NeTT. ``NoisyCorpus`` holds only noisy recordings and feeds NyTT;
it has no attribute through which a clean signal could reach the gradient.
Clean references appear only in ``ValItem`` objects used by ``validate``.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .metrics import si_sdr
from .mixer import SnrSpec, Strategy, TrainingPair, default_snr_spec, make_pair, swap_noise_augment
from .model import AdamState, MaskNet, MaskNetConfig, adam_step, backward, enhance, init, loss
from .signal import Waveform, child_seeds, derive_seed
from .stft import StftParams

log = logging.getLogger(__name__)


class TrainingError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class NoisePool:
    clips: tuple[Waveform, ...]
    ids: tuple[str, ...]

    def __post_init__(self):
        if len(self.clips) != len(self.ids):
            raise ValueError("noise pool clips and ids differ in length")

    def __len__(self) -> int:
        return len(self.clips)


@dataclass(frozen=True, eq=False)
class CleanCorpus:
    """Clean speech plus a noise pool (CTT, NeTT)."""

    clean: tuple[Waveform, ...]
    ids: tuple[str, ...]
    noise: NoisePool

    def __len__(self) -> int:
        return len(self.clean)


@dataclass(frozen=True, eq=False)
class NoisyCorpus:
    """Noisy recordings plus a noise pool (NyTT). Carries no clean signals."""

    noisy: tuple[Waveform, ...]
    ids: tuple[str, ...]
    noise: NoisePool

    def __len__(self) -> int:
        return len(self.noisy)


@dataclass(frozen=True, eq=False)
class ValItem:
    utt_id: str
    input: Waveform
    reference: Waveform


@dataclass
class TrainConfig:
    strategy: Strategy = Strategy.NyTT
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 1e-4
    val_count: int = 10
    seed: int = 0
    snr_spec: SnrSpec | None = None
    model: MaskNetConfig = field(default_factory=MaskNetConfig)
    stft: StftParams = field(default_factory=StftParams)
    validation: str = "si_sdr"

    def __post_init__(self):
        self.strategy = Strategy(self.strategy)
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.val_count < 1:
            raise ValueError("batch_size and val_count must be >= 1")
        if self.validation not in ("si_sdr", "loss"):
            raise ValueError(f"validation must be 'si_sdr' or 'loss', got {self.validation!r}")

    @property
    def pair_snr_spec(self) -> SnrSpec:
        return self.snr_spec or default_snr_spec(self.strategy)


@dataclass
class TrainHistory:
    losses: list[float] = field(default_factory=list)
    val_scores: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    initial_val_score: float | None = None

    def record(self, mean_loss: float, val_score: float) -> bool:
        self.losses.append(mean_loss)
        self.val_scores.append(val_score)
        if self.best_epoch is None or val_score > self.val_scores[self.best_epoch]:
            self.best_epoch = len(self.val_scores) - 1
            return True
        return False

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", "mean_loss", "val_si_sdr", "is_best"])
        for i, (l, v) in enumerate(zip(self.losses, self.val_scores)):
            w.writerow([i, repr(l), repr(v), int(i == self.best_epoch)])
        return buf.getvalue()


def _check_corpus(strategy: Strategy, corpus) -> None:
    if strategy is Strategy.NyTT and not isinstance(corpus, NoisyCorpus):
        raise TrainingError("NyTT trains on a NoisyCorpus (noisy signals + noise pool); "
                            f"got {type(corpus).__name__}")
    if strategy in (Strategy.CTT, Strategy.NeTT) and not isinstance(corpus, CleanCorpus):
        raise TrainingError(f"{strategy.value} needs a CleanCorpus (clean speech + noise pool); "
                            f"got {type(corpus).__name__}")
    if len(corpus.noise) == 0:
        raise TrainingError("corpus noise pool is empty")


def build_batch(strategy, corpus, batch_size: int, seed, indices: Sequence[int] | None = None,
                snr_spec: SnrSpec | None = None) -> list[TrainingPair]:
    """Fresh training pairs for ``indices`` (or ``batch_size`` random items)."""
    strategy = Strategy(strategy)
    _check_corpus(strategy, corpus)
    snr_spec = snr_spec or default_snr_spec(strategy)
    pick_seed, pair_seed = child_seeds(seed, 2)
    rng = np.random.default_rng(pick_seed)
    if indices is None:
        indices = rng.integers(0, len(corpus), size=batch_size)
    indices = [int(i) for i in indices]
    pool = corpus.noise

    if strategy is Strategy.CTT:
        return swap_noise_augment([corpus.clean[i] for i in indices], pool.clips, pair_seed, snr_spec,
                                  ids=[corpus.ids[i] for i in indices], noise_ids=pool.ids)
    item_seeds = child_seeds(pair_seed, len(indices))
    pairs = []
    for k, i in enumerate(indices):
        if strategy is Strategy.NeTT:
            j1, j2 = (int(j) for j in rng.integers(0, len(pool), size=2))
            sources = {"clean": corpus.clean[i], "noise1": pool.clips[j1], "noise2": pool.clips[j2],
                       "ids": (corpus.ids[i], pool.ids[j1], pool.ids[j2])}
        else:
            j = int(rng.integers(0, len(pool)))
            sources = {"noisy": corpus.noisy[i], "noise": pool.clips[j],
                       "ids": (corpus.ids[i], pool.ids[j])}
        pairs.append(make_pair(strategy, sources, snr_spec, item_seeds[k]))
    return pairs


def batch_gradient(net: MaskNet, pairs: Sequence[TrainingPair], p: StftParams):
    """Mean loss and mean gradient over a batch, accumulated in list order."""
    total = None
    losses = []
    for pair in pairs:
        value, grads = backward(net, pair.input, pair.target, p)
        losses.append(value)
        if total is None:
            total = [g.copy() for g in grads]
        else:
            for acc, g in zip(total, grads):
                acc += g
    M = len(pairs)
    return losses, [g / M for g in total]


def epoch_seed(config: TrainConfig, epoch_index: int) -> int:
    return derive_seed(config.seed, "epoch", epoch_index)


def train_epoch(net: MaskNet, state: AdamState, corpus, config: TrainConfig, epoch_index: int) -> float:
    """One pass over the corpus in shuffled order; returns the mean per-pair loss."""
    _check_corpus(config.strategy, corpus)
    seed = epoch_seed(config, epoch_index)
    order_seed, batch_seed = child_seeds(seed, 2)
    order = np.random.default_rng(order_seed).permutation(len(corpus))
    n_batches = -(-len(order) // config.batch_size)
    seeds = child_seeds(batch_seed, n_batches)
    all_losses = []
    for b in range(n_batches):
        idx = order[b * config.batch_size:(b + 1) * config.batch_size]
        pairs = build_batch(config.strategy, corpus, len(idx), seeds[b], indices=idx,
                            snr_spec=config.pair_snr_spec)
        losses, grads = batch_gradient(net, pairs, config.stft)
        batch_loss = float(np.mean(losses))
        if not math.isfinite(batch_loss):
            raise TrainingError(f"non-finite loss at epoch {epoch_index}, batch {b}")
        adam_step(net, grads, state)
        all_losses.extend(losses)
    return float(np.mean(all_losses))


def validate(net: MaskNet, val_set: Sequence[ValItem], p: StftParams = StftParams()) -> float:
    """Mean SI-SDR of enhanced inputs against their references."""
    if len(val_set) == 0:
        raise TrainingError("validation set is empty")
    return float(np.mean([si_sdr(enhance(net, v.input, p), v.reference) for v in val_set]))


def validate_loss(net: MaskNet, val_set: Sequence[ValItem], p: StftParams = StftParams()) -> float:
    """Negative mean MSE; usable when references are noisy targets rather than clean speech."""
    if len(val_set) == 0:
        raise TrainingError("validation set is empty")
    return -float(np.mean([loss(enhance(net, v.input, p), v.reference) for v in val_set]))


def train(config: TrainConfig, corpus, val_set: Sequence[ValItem], net: MaskNet | None = None,
          progress=None) -> tuple[MaskNet, TrainHistory]:
    """Train for ``config.epochs`` and return the best-validation snapshot."""
    _check_corpus(config.strategy, corpus)
    scorer = validate if config.validation == "si_sdr" else validate_loss
    if net is None:
        net = init(config.model, derive_seed(config.seed, "init"))
    state = AdamState.for_net(net, lr=config.learning_rate)
    history = TrainHistory()
    best = net.copy()
    if config.epochs == 0:
        return best, history
    history.initial_val_score = scorer(net, val_set, config.stft)
    for epoch in range(config.epochs):
        mean_loss = train_epoch(net, state, corpus, config, epoch)
        score = scorer(net, val_set, config.stft)
        if history.record(mean_loss, score):
            best = net.copy()
        log.debug("%s epoch %d loss %.6g val %.3f", config.strategy.value, epoch, mean_loss, score)
        if progress is not None:
            progress(epoch, mean_loss, score)
    return best, history
