import numpy as np
import pytest

from noisy_target.harness.config import CorpusSettings
from noisy_target.harness.corpus import (
    FAMILIES,
    CorpusError,
    CorpusManifest,
    CorpusStore,
    build_manifest,
    count_roles,
    read_manifest,
    write_corpus,
)
from noisy_target.mixer import measured_snr
from noisy_target.signal import band_energy_fraction, read_wav
from noisy_target.trainer import NoisyCorpus

SMALL = CorpusSettings(duration_s=0.25, train_count=4, val_count=2, test_count=3, noise_clips=8,
                       noise_duration_s=0.5)


def test_default_counts():
    m = build_manifest(CorpusSettings(), 0)
    assert len(m.select("clean")) == 260
    assert count_roles(m)["noisy"] == 200 + 10 + 50 + 50
    for fam in ("pink", "babble", "white", "band"):
        assert len(m.select("noise", "train", fam)) == 8
    assert m.select("noise", "train", "mobile") == []


def test_manifest_deterministic_and_seeded():
    a, b = build_manifest(SMALL, 3), build_manifest(SMALL, 3)
    assert a.to_json() == b.to_json()
    assert a.to_json() != build_manifest(SMALL, 4).to_json()
    assert CorpusManifest.from_json(a.to_json()).to_json() == a.to_json()


def test_unknown_family():
    with pytest.raises(CorpusError):
        build_manifest(CorpusSettings(training_families=("pink", "jazz")), 0)


def test_train_mixture_snrs_and_references():
    m = build_manifest(SMALL, 1)
    store = CorpusStore(m)
    for e in m.select("noisy", "train"):
        assert 5.0 <= e.recipe["snr_db"] <= 15.0
        assert e.eval_only and e.family == "pink"
        y = store.get(e.id)
        s = store.get(e.recipe["clean"])
        assert abs(measured_snr(s, y - s) - e.recipe["snr_db"]) < 1e-9
    assert {e.family for e in m.select("noisy", "test_mismatched")} == {"mobile"}


def test_task2_analog_is_in_band():
    m = build_manifest(SMALL, 2)
    store = CorpusStore(m)
    for e in m.select("noise", "train", "band"):
        assert band_energy_fraction(store.get(e.id), 6000, 8000) >= 0.99
    assert FAMILIES["band"]["analog"] == "Task2"


def test_noisy_corpus_is_typed():
    store = CorpusStore(build_manifest(SMALL, 0))
    c = store.noisy_corpus(store.noise_pool(["pink"]))
    assert isinstance(c, NoisyCorpus) and len(c) == 4
    assert all(i.startswith("noisy_train") for i in c.ids)
    fixed = store.noisy_corpus(store.noise_pool(["pink"]), fixed_snr=0.0)
    big = store.large_noisy_corpus(store.noise_pool(["pink"]), 3, SMALL)
    assert len(fixed) == 4 and len(big) == 12 and len(set(big.ids)) == 12


def test_eval_sets():
    store = CorpusStore(build_manifest(SMALL, 0))
    items = store.eval_set("test_matched")
    assert len(items) == 3
    assert all(v.reference is store.get(v.utt_id.replace("noisy_test_matched", "speech_test")) for v in items)
    remixed = store.remixed_eval_set("test_matched", "mobile", (0.0,), "probe")
    for v in remixed:
        assert abs(measured_snr(v.reference, v.input - v.reference)) < 1e-9
    with pytest.raises(CorpusError):
        store.eval_set("nope")


def test_write_and_reload(tmp_path):
    m = build_manifest(SMALL, 6)
    path = write_corpus(m, tmp_path)
    back = read_manifest(path)
    assert len(back.entries) == len(m.entries)
    store, disk = CorpusStore(m), CorpusStore(back, root=tmp_path)
    e = back.select("noisy", "val")[0]
    assert read_wav(tmp_path / e.path).sample_rate == 16000
    # float32 files: equal to the synthesized signal up to single precision
    assert np.allclose(disk.get(e.id).samples, store.get(e.id).samples, atol=1e-7)
    assert (write_corpus(m, tmp_path).read_text() == path.read_text())
