"""Experiment configuration: INI files with [corpus], [train] and [experiment] sections.

Every key has a default; unknown sections or keys are rejected. ``to_dict`` /
``from_dict`` give a JSON-safe form that parses back to an equal config.
"""

from __future__ import annotations

import configparser
import math
import typing
from dataclasses import dataclass, field, fields
from pathlib import Path

from ..mixer import Strategy
from ..model import MaskNetConfig
from ..stft import StftParams
from ..trainer import TrainConfig

EXPERIMENTS = ("proof_of_concept", "snr_sweep", "noise_sweep")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class CorpusSettings:
    sample_rate: int = 16000
    duration_s: float = 2.0
    train_count: int = 200
    val_count: int = 10
    test_count: int = 50
    noise_clips: int = 8
    noise_duration_s: float = 4.0
    # observation-noise SNR of the noisy (NyTT) corpus, uniform in [low, high] dB
    obs_snr_low: float = 5.0
    obs_snr_high: float = 15.0
    obs_family: str = "pink"
    training_families: tuple[str, ...] = ("pink", "babble", "white")
    heldout_family: str = "mobile"
    matched_test_snrs: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)
    mismatched_test_snrs: tuple[float, ...] = (-5.0, 0.0, 5.0, 10.0)


@dataclass(frozen=True)
class TrainSettings:
    strategy: str = "NyTT"
    epochs: int = 60
    batch_size: int = 16
    learning_rate: float = 1e-4
    hidden_sizes: tuple[int, ...] = (256, 256)
    context_frames: int = 5
    mask_bound: float = 2.0
    activation: str = "relu"
    win_len: int = 512
    hop: int = 128
    validation: str = "si_sdr"

    def train_config(self, strategy=None, seed: int = 0, n_bins: int | None = None, **overrides) -> TrainConfig:
        stft = StftParams(self.win_len, self.hop)
        model = MaskNetConfig(
            input_bins=n_bins or stft.n_bins,
            context_frames=self.context_frames,
            hidden_sizes=self.hidden_sizes,
            mask_bound=self.mask_bound,
            activation=self.activation,
        )
        return TrainConfig(
            strategy=Strategy(strategy or self.strategy),
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=seed,
            model=model,
            stft=stft,
            validation=self.validation,
            **overrides,
        )


@dataclass(frozen=True)
class ExperimentSettings:
    experiment: str = "proof_of_concept"
    methods: tuple[str, ...] = ("CTT", "NeTT", "NyTT")
    # NyTT (L): extra NyTT run on a noisy corpus this many times larger; 0 disables
    large_multiplier: int = 0
    sweep_snrs: tuple[float, ...] = (-5.0, 0.0, 5.0, 10.0, 15.0, 20.0, math.inf)
    sweep_families: tuple[str, ...] = ("pink", "babble", "white", "band")
    noise_sweep_test_snrs: tuple[float, ...] = (0.0, 5.0, 10.0, 15.0)


SECTIONS = {"corpus": CorpusSettings, "train": TrainSettings, "experiment": ExperimentSettings}


@dataclass(frozen=True)
class ExperimentConfig:
    corpus: CorpusSettings = field(default_factory=CorpusSettings)
    train: TrainSettings = field(default_factory=TrainSettings)
    experiment: ExperimentSettings = field(default_factory=ExperimentSettings)
    seed: int = 0

    def __post_init__(self):
        if self.experiment.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}, got {self.experiment.experiment!r}")
        for m in self.experiment.methods:
            Strategy(m)
        Strategy(self.train.strategy)

    def to_dict(self) -> dict:
        out = {"seed": self.seed}
        for name in SECTIONS:
            section = getattr(self, name)
            out[name] = {f.name: _to_plain(getattr(section, f.name)) for f in fields(section)}
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        unknown = set(d) - set(SECTIONS) - {"seed"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {name: _build_section(kind, d.get(name, {}), name) for name, kind in SECTIONS.items()}
        return cls(seed=int(d.get("seed", 0)), **parts)

    def with_seed(self, seed: int | None) -> "ExperimentConfig":
        if seed is None:
            return self
        return ExperimentConfig(self.corpus, self.train, self.experiment, int(seed))

    def with_experiment(self, name: str) -> "ExperimentConfig":
        exp = ExperimentSettings(**{**self.experiment.__dict__, "experiment": name})
        return ExperimentConfig(self.corpus, self.train, exp, self.seed)


def _to_plain(v):
    if isinstance(v, tuple):
        return [_to_plain(x) for x in v]
    if isinstance(v, float) and math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _coerce(value, annotation, key: str):
    origin = typing.get_origin(annotation)
    if origin is tuple:
        (inner, _) = typing.get_args(annotation)
        if isinstance(value, str):
            items = [x.strip() for x in value.split(",") if x.strip()]
        else:
            items = list(value)
        return tuple(_coerce(x, inner, key) for x in items)
    try:
        if annotation is bool:
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        if annotation is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if annotation is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"bad value for {key!r}: {value!r}") from None


def _build_section(kind, values: dict, section: str):
    hints = typing.get_type_hints(kind)
    known = {f.name for f in fields(kind)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    kwargs = {k: _coerce(v, hints[k], f"{section}.{k}") for k, v in values.items()}
    return kind(**kwargs)


def load_config(path=None, seed: int | None = None) -> ExperimentConfig:
    """Parse an INI config file; ``None`` gives the defaults."""
    if path is None:
        return ExperimentConfig().with_seed(seed)
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    parser.optionxform = str
    path = Path(path)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    data: dict = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        data[section] = dict(parser.items(section))
    if "seed" in data.get("experiment", {}):
        data["seed"] = data["experiment"].pop("seed")
    return ExperimentConfig.from_dict(data).with_seed(seed)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that ``load_config`` parses back to ``cfg``."""
    lines = []
    d = cfg.to_dict()
    for name in SECTIONS:
        lines.append(f"[{name}]")
        if name == "experiment":
            lines.append(f"seed = {cfg.seed}")
        for k, v in d[name].items():
            text = ", ".join(str(x) for x in v) if isinstance(v, list) else str(v)
            lines.append(f"{k} = {text}")
        lines.append("")
    return "\n".join(lines)
