import json
import subprocess
import sys

import pytest

from noisy_target.cli import build_parser, main


def test_every_subcommand_registered():
    sub = build_parser()._subparsers._group_actions[0].choices
    assert set(sub) == {"synth-corpus", "train", "evaluate", "poc", "snr-sweep", "noise-sweep", "overlap"}


def test_synth_corpus(tiny_ini, tmp_path, capsys):
    assert main(["synth-corpus", "--config", str(tiny_ini), "--out", str(tmp_path / "c")]) == 0
    manifest = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert manifest["master_seed"] == 5
    assert len(list((tmp_path / "c").rglob("*.wav"))) == len(manifest["entries"])
    assert "wrote" in capsys.readouterr().out


def test_train_then_evaluate(tiny_ini, tmp_path):
    out = tmp_path / "run"
    assert main(["train", "--config", str(tiny_ini), "--strategy", "CTT", "--seed", "3", "--out", str(out)]) == 0
    assert (out / "checkpoint.npz").exists() and (out / "history.csv").exists()
    ev = tmp_path / "eval"
    assert main(["evaluate", "--config", str(tiny_ini), "--checkpoint", str(out / "checkpoint.npz"),
                 "--seed", "3", "--out", str(ev)]) == 0
    head = (ev / "metrics_matched.csv").read_text().splitlines()[:2]
    assert head[0] == "utt_id,method,si_sdr_in,si_sdr_out,si_sdri,lsd"
    assert ",CTT," in head[1]
    assert json.loads((ev / "results.json").read_text())["seed"] == 3


@pytest.mark.parametrize("cmd,table", [("poc", "summary.csv"), ("snr-sweep", "sweep.csv"),
                                       ("noise-sweep", "overlap.csv"), ("overlap", "overlap.csv")])
def test_experiment_commands(tiny_ini, tmp_path, cmd, table):
    out = tmp_path / cmd
    assert main([cmd, "--config", str(tiny_ini), "--out", str(out)]) == 0
    assert (out / table).exists() and (out / "results.json").exists()


def test_poc_train_count_adds_large_variant(tiny_ini, tmp_path):
    assert main(["poc", "--config", str(tiny_ini), "--train-count", "2", "--out", str(tmp_path)]) == 0
    assert "NyTT_L" in (tmp_path / "summary.csv").read_text()


def test_errors_exit_2(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text("[train]\nnope = 1\n")
    assert main(["poc", "--config", str(bad), "--out", str(tmp_path)]) == 2
    assert "unknown keys" in capsys.readouterr().err
    assert main(["evaluate", "--checkpoint", str(tmp_path / "missing.npz"), "--out", str(tmp_path)]) == 2


def test_module_entry_point():
    r = subprocess.run([sys.executable, "-m", "noisy_target", "--help"], capture_output=True, text=True)
    assert r.returncode == 0 and "snr-sweep" in r.stdout
