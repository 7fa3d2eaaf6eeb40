"""Synthetic corpora: manifest construction, materialization and WAV export.

A manifest lists every signal an experiment touches. Sources (clean speech,
noise clips) carry a synth spec or a WAV path; noisy entries carry a mixing
recipe or a path. The clean component of a noisy entry is recorded only as an
``eval_only`` reference and is never handed to noisy-target training.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..mixer import mix_at_snr
from ..signal import SynthSpec, Waveform, derive_seed, read_wav, synth, write_wav
from ..trainer import CleanCorpus, NoisePool, NoisyCorpus, ValItem
from .config import CorpusSettings

MANIFEST_NAME = "manifest.json"

# name -> synth parameters and the real corpus each one stands in for
FAMILIES = {
    "pink": {"kind": "pink_noise", "analog": "DEMAND"},
    "babble": {"kind": "babble_like", "analog": "TAU-2020"},
    "white": {"kind": "white_noise", "analog": "CHiME3"},
    "band": {"kind": "band_noise", "lo_hz": 6000.0, "hi_hz": 8000.0, "analog": "Task2"},
    "mobile": {"kind": "band_noise", "lo_hz": 100.0, "hi_hz": 7000.0, "analog": "TAU-2019 Mobile"},
}


class CorpusError(RuntimeError):
    pass


@dataclass
class ManifestEntry:
    id: str
    role: str  # clean | noise | noisy
    split: str
    duration_s: float
    seed: int
    synth: dict | None = None
    path: str | None = None
    family: str | None = None
    recipe: dict | None = None
    reference: str | None = None
    eval_only: bool = False

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


@dataclass
class CorpusManifest:
    sample_rate: int
    entries: list[ManifestEntry] = field(default_factory=list)
    master_seed: int = 0

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(ids) != len(set(ids)):
            raise CorpusError("manifest ids must be unique")
        self._by_id = {e.id: e for e in self.entries}

    def __getitem__(self, entry_id: str) -> ManifestEntry:
        return self._by_id[entry_id]

    def select(self, role: str | None = None, split: str | None = None, family: str | None = None):
        return [e for e in self.entries
                if (role is None or e.role == role) and (split is None or e.split == split)
                and (family is None or e.family == family)]

    def to_json(self) -> str:
        return json.dumps({
            "sample_rate": self.sample_rate,
            "master_seed": self.master_seed,
            "entries": [e.to_dict() for e in self.entries],
        }, indent=1, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "CorpusManifest":
        d = json.loads(text)
        return cls(d["sample_rate"], [ManifestEntry(**e) for e in d["entries"]], d.get("master_seed", 0))


def family_spec(family: str, duration_s: float, seed: int) -> SynthSpec:
    if family not in FAMILIES:
        raise CorpusError(f"unknown noise family {family!r}; known: {sorted(FAMILIES)}")
    f = FAMILIES[family]
    return SynthSpec(f["kind"], duration_s, seed, f.get("lo_hz"), f.get("hi_hz"))


def _speech(split: str, i: int, cfg: CorpusSettings, master: int) -> ManifestEntry:
    seed = derive_seed(master, "speech", split, i)
    return ManifestEntry(f"speech_{split}_{i:04d}", "clean", split, cfg.duration_s, seed,
                         synth=SynthSpec("speech_like", cfg.duration_s, seed).to_dict())


def _noise(family: str, split: str, j: int, cfg: CorpusSettings, master: int) -> ManifestEntry:
    seed = derive_seed(master, "noise", family, split, j)
    spec = family_spec(family, cfg.noise_duration_s, seed)
    return ManifestEntry(f"noise_{family}_{split}_{j:02d}", "noise", split, cfg.noise_duration_s, seed,
                         synth=spec.to_dict(), family=family)


def _mixtures(split: str, speech: list[ManifestEntry], noises: list[ManifestEntry], snr_draw,
              master: int, eval_only_ref: bool = True) -> list[ManifestEntry]:
    rng = np.random.default_rng(derive_seed(master, "mix", split))
    out = []
    for i, s in enumerate(speech):
        n = noises[int(rng.integers(0, len(noises)))]
        snr = float(snr_draw(rng))
        mix_seed = derive_seed(master, "mixcrop", split, i)
        out.append(ManifestEntry(
            f"noisy_{split}_{i:04d}", "noisy", split, s.duration_s, mix_seed,
            recipe={"clean": s.id, "noise": n.id, "snr_db": snr},
            reference=s.id, eval_only=eval_only_ref, family=n.family,
        ))
    return out


def _choice(values):
    values = tuple(values)
    return lambda rng: values[int(rng.integers(0, len(values)))]


def build_manifest(cfg: CorpusSettings, master_seed: int = 0) -> CorpusManifest:
    """Deterministic manifest for the desk corpus."""
    m = int(master_seed)
    for fam in (*cfg.training_families, cfg.obs_family, cfg.heldout_family):
        if fam not in FAMILIES:
            raise CorpusError(f"unknown noise family {fam!r}")
    entries: list[ManifestEntry] = []
    speech = {split: [_speech(split, i, cfg, m) for i in range(n)]
              for split, n in (("train", cfg.train_count), ("val", cfg.val_count), ("test", cfg.test_count))}
    for split in ("train", "val", "test"):
        entries += speech[split]

    train_families = [f for f in FAMILIES if f != cfg.heldout_family]
    pools = {f: [_noise(f, "train", j, cfg, m) for j in range(cfg.noise_clips)] for f in train_families}
    obs = [_noise(cfg.obs_family, "obs", j, cfg, m) for j in range(cfg.noise_clips)]
    test_obs = [_noise(cfg.obs_family, "test", j, cfg, m) for j in range(cfg.noise_clips)]
    heldout = [_noise(cfg.heldout_family, "test", j, cfg, m) for j in range(cfg.noise_clips)]
    for f in train_families:
        entries += pools[f]
    entries += obs + test_obs + heldout

    lo, hi = cfg.obs_snr_low, cfg.obs_snr_high
    entries += _mixtures("train", speech["train"], obs, lambda rng: rng.uniform(lo, hi), m)
    entries += _mixtures("val", speech["val"], obs, _choice(cfg.matched_test_snrs), m)
    entries += _mixtures("test_matched", speech["test"], test_obs, _choice(cfg.matched_test_snrs), m)
    entries += _mixtures("test_mismatched", speech["test"], heldout, _choice(cfg.mismatched_test_snrs), m)
    return CorpusManifest(cfg.sample_rate, entries, m)


class CorpusStore:
    """Materializes manifest entries on demand and caches them."""

    def __init__(self, manifest: CorpusManifest, root: Path | None = None):
        self.manifest = manifest
        self.root = Path(root) if root is not None else None
        self._cache: dict[str, Waveform] = {}

    def get(self, entry_id: str) -> Waveform:
        if entry_id not in self._cache:
            self._cache[entry_id] = self._load(self.manifest[entry_id])
        return self._cache[entry_id]

    def _load(self, e: ManifestEntry) -> Waveform:
        if e.synth is not None:
            return synth(SynthSpec.from_dict(e.synth), self.manifest.sample_rate)
        if e.recipe is not None:
            return self.mix(e.recipe["clean"], e.recipe["noise"], e.recipe["snr_db"], e.seed)
        if e.path is not None:
            path = Path(e.path)
            if not path.is_absolute() and self.root is not None:
                path = self.root / path
            return read_wav(path)
        raise CorpusError(f"entry {e.id} has no synth spec, recipe or path")

    def mix(self, clean_id: str, noise_id: str, snr_db: float, seed: int) -> Waveform:
        y, _ = mix_at_snr(self.get(clean_id), self.get(noise_id), snr_db, seed)
        return y

    def noise_pool(self, families, split: str = "train") -> NoisePool:
        entries = [e for f in families for e in self.manifest.select("noise", split, f)]
        if not entries:
            raise CorpusError(f"no {split} noise clips for families {list(families)}")
        return NoisePool(tuple(self.get(e.id) for e in entries), tuple(e.id for e in entries))

    def clean_corpus(self, pool: NoisePool) -> CleanCorpus:
        entries = self.manifest.select("clean", "train")
        return CleanCorpus(tuple(self.get(e.id) for e in entries), tuple(e.id for e in entries), pool)

    def noisy_corpus(self, pool: NoisePool, fixed_snr: float | None = None) -> NoisyCorpus:
        """Training corpus of noisy signals only; ``fixed_snr`` re-mixes every
        utterance at that observation SNR instead of the manifest's draw."""
        entries = self.manifest.select("noisy", "train")
        signals = []
        for e in entries:
            if fixed_snr is None:
                signals.append(self.get(e.id))
            else:
                signals.append(self.mix(e.recipe["clean"], e.recipe["noise"], fixed_snr, e.seed))
        return NoisyCorpus(tuple(signals), tuple(e.id for e in entries), pool)

    def large_noisy_corpus(self, pool: NoisePool, multiplier: int, cfg: CorpusSettings) -> NoisyCorpus:
        """Noisy corpus ``multiplier`` times the training size (extra speech seeds)."""
        base = self.noisy_corpus(pool)
        extra_n = (multiplier - 1) * len(base)
        m = self.manifest.master_seed
        speech = [_speech("large", i, cfg, m) for i in range(extra_n)]
        obs = self.manifest.select("noise", "obs", cfg.obs_family)
        mixes = _mixtures("large", speech, obs, lambda rng: rng.uniform(cfg.obs_snr_low, cfg.obs_snr_high), m)
        signals = list(base.noisy)
        for s, e in zip(speech, mixes):
            clean = synth(SynthSpec.from_dict(s.synth), self.manifest.sample_rate)
            y, _ = mix_at_snr(clean, self.get(e.recipe["noise"]), e.recipe["snr_db"], e.seed)
            signals.append(y)
        return NoisyCorpus(tuple(signals), base.ids + tuple(e.id for e in mixes), pool)

    def eval_set(self, split: str) -> list[ValItem]:
        """(noisy input, clean reference) items; references are evaluation-only."""
        items = []
        for e in self.manifest.select("noisy", split):
            if e.reference is None:
                raise CorpusError(f"{e.id} has no clean reference for evaluation")
            items.append(ValItem(e.id, self.get(e.id), self.get(e.reference)))
        if not items:
            raise CorpusError(f"no evaluation items in split {split!r}")
        return items

    def remixed_eval_set(self, split: str, noise_family: str, snrs, tag: str) -> list[ValItem]:
        """Same speech as ``split`` re-mixed with held-out-split noise of ``noise_family``."""
        noises = self.manifest.select("noise", "test", noise_family)
        if not noises:
            raise CorpusError(f"no test clips for family {noise_family!r}")
        speech = [self.manifest[e.reference] for e in self.manifest.select("noisy", split)]
        mixes = _mixtures(tag, speech, noises, _choice(snrs), self.manifest.master_seed)
        return [ValItem(e.id, self.mix(e.recipe["clean"], e.recipe["noise"], e.recipe["snr_db"], e.seed),
                        self.get(e.reference)) for e in mixes]


def write_corpus(manifest: CorpusManifest, out_dir, encoding: str = "float32") -> Path:
    """Write every entry as a WAV under ``out_dir`` plus ``manifest.json``."""
    out = Path(out_dir)
    store = CorpusStore(manifest)
    written = []
    for e in manifest.entries:
        rel = Path(e.role) / e.split / f"{e.id}.wav"
        path = out / rel
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            write_wav(path, store.get(e.id), encoding=encoding)
        except OSError as exc:
            raise CorpusError(f"failed to write {path}: {exc}") from exc
        written.append(ManifestEntry(**{**asdict(e), "path": rel.as_posix()}))
    final = CorpusManifest(manifest.sample_rate, written, manifest.master_seed)
    mpath = out / MANIFEST_NAME
    try:
        mpath.write_text(final.to_json())
    except OSError as exc:
        raise CorpusError(f"failed to write {mpath}: {exc}") from exc
    return mpath


def read_manifest(path) -> CorpusManifest:
    return CorpusManifest.from_json(Path(path).read_text())


def count_roles(manifest: CorpusManifest) -> dict[str, int]:
    out: dict[str, int] = {}
    for e in manifest.entries:
        out[e.role] = out.get(e.role, 0) + 1
    return out


