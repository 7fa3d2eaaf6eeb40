import json
import math

import pytest
from hypothesis import given, settings, strategies as st

from noisy_target.harness.config import (
    ConfigError,
    CorpusSettings,
    ExperimentConfig,
    ExperimentSettings,
    TrainSettings,
    dump_config,
    load_config,
)


def test_defaults():
    cfg = load_config(None)
    assert cfg.corpus.sample_rate == 16000 and cfg.corpus.train_count == 200
    assert cfg.train.learning_rate == 1e-4 and cfg.train.batch_size == 16
    assert cfg.experiment.sweep_snrs[-1] == math.inf
    assert load_config(None, seed=9).seed == 9


def test_ini_parsing(tiny_cfg):
    assert tiny_cfg.seed == 5
    assert tiny_cfg.corpus.duration_s == 0.25
    assert tiny_cfg.train.hidden_sizes == (8,)
    assert tiny_cfg.experiment.sweep_snrs == (0.0, math.inf)
    assert tiny_cfg.experiment.sweep_families == ("pink", "band")


def test_seed_override(tiny_ini):
    assert load_config(tiny_ini, seed=77).seed == 77


@pytest.mark.parametrize("text,match", [
    ("[corpus]\nbogus = 1\n", "unknown keys"),
    ("[extra]\na = 1\n", "unknown section"),
    ("[train]\nepochs = many\n", "bad value"),
    ("[train]\nepochs = 1.5\n", "bad value"),
    ("[experiment]\nexperiment = opera\n", "experiment must be"),
    ("no section header\n", "no section headers"),
])
def test_rejections(tmp_path, text, match):
    path = tmp_path / "bad.ini"
    path.write_text(text)
    with pytest.raises(ConfigError, match=match):
        load_config(path)


def test_bad_strategy(tmp_path):
    path = tmp_path / "bad.ini"
    path.write_text("[train]\nstrategy = XTT\n")
    with pytest.raises(ValueError):
        load_config(path)


def test_missing_file(tmp_path):
    with pytest.raises(OSError):
        load_config(tmp_path / "absent.ini")


def test_dict_and_ini_round_trip(tiny_cfg, tmp_path):
    d = json.loads(json.dumps(tiny_cfg.to_dict()))
    assert ExperimentConfig.from_dict(d) == tiny_cfg
    path = tmp_path / "again.ini"
    path.write_text(dump_config(tiny_cfg))
    assert load_config(path) == tiny_cfg


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), lr=st.floats(1e-6, 1.0), epochs=st.integers(0, 500),
       snrs=st.lists(st.sampled_from([-5.0, 0.0, 2.5, 20.0, math.inf]), min_size=1, max_size=5),
       hidden=st.lists(st.integers(1, 512), min_size=1, max_size=3))
def test_round_trip_property(tmp_path_factory, seed, lr, epochs, snrs, hidden):
    cfg = ExperimentConfig(
        CorpusSettings(train_count=3),
        TrainSettings(learning_rate=lr, epochs=epochs, hidden_sizes=tuple(hidden)),
        ExperimentSettings(sweep_snrs=tuple(snrs)),
        seed,
    )
    path = tmp_path_factory.mktemp("cfg") / "c.ini"
    path.write_text(dump_config(cfg))
    assert load_config(path) == cfg
    assert ExperimentConfig.from_dict(json.loads(json.dumps(cfg.to_dict()))) == cfg


def test_train_config_bridge(tiny_cfg):
    tc = tiny_cfg.train.train_config("CTT", seed=4)
    assert tc.model.input_bins == 257 and tc.model.hidden_sizes == (8,)
    assert tc.epochs == 1 and tc.seed == 4 and tc.strategy.value == "CTT"
