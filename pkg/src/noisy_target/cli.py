"""Command line entry point: ``noisy-target <subcommand> --config --seed --out``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .harness.config import ConfigError, dump_config, load_config
from .harness.corpus import CorpusStore, build_manifest, count_roles, write_corpus
from .harness.experiments import (
    ExperimentResult,
    emit_report,
    evaluate_net,
    overlap_tables,
    run_noise_sweep,
    run_proof_of_concept,
    run_snr_sweep,
)
from .metrics import reports_to_csv
from .model import load_checkpoint, save_checkpoint
from .mixer import Strategy
from .signal import derive_seed
from .stft import StftParams
from .trainer import train

log = logging.getLogger("noisy_target")


def _progress(tag, epoch, loss, score):
    log.info("%s epoch %d  loss %.6g  val %.3f dB", tag, epoch, loss, score)


def cmd_synth_corpus(cfg, args):
    manifest = build_manifest(cfg.corpus, cfg.seed)
    path = write_corpus(manifest, args.out)
    counts = count_roles(manifest)
    print(f"wrote {len(manifest.entries)} files ({counts}) and {path}")


def _train_corpus(store, cfg, strategy):
    pool = store.noise_pool(cfg.corpus.training_families)
    if strategy is Strategy.NyTT:
        return store.noisy_corpus(pool)
    return store.clean_corpus(pool)


def cmd_train(cfg, args):
    strategy = Strategy(args.strategy or cfg.train.strategy)
    store = CorpusStore(build_manifest(cfg.corpus, cfg.seed))
    corpus = _train_corpus(store, cfg, strategy)
    tc = cfg.train.train_config(strategy, seed=derive_seed(cfg.seed, "train", strategy.value))
    net, history = train(tc, corpus, store.eval_set("val"),
                         progress=lambda e, l, v: _progress(strategy.value, e, l, v))
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(out / "checkpoint.npz", net, extra={"strategy": strategy.value, "seed": cfg.seed,
                                                       "best_epoch": history.best_epoch})
    (out / "history.csv").write_text(history.to_csv())
    (out / "config.ini").write_text(dump_config(cfg))
    print(f"best epoch {history.best_epoch}; checkpoint written to {out / 'checkpoint.npz'}")


def cmd_evaluate(cfg, args):
    net, _, extra = load_checkpoint(args.checkpoint)
    store = CorpusStore(build_manifest(cfg.corpus, cfg.seed))
    p = StftParams(cfg.train.win_len, cfg.train.hop)
    method = extra.get("strategy", "model")
    result = ExperimentResult("evaluate", cfg)
    for split in ("test_matched", "test_mismatched"):
        rep = evaluate_net(net, store.eval_set(split), method, p)
        result.tables[f"metrics_{split.removeprefix('test_')}.csv"] = reports_to_csv([rep])
        result.summary[split] = rep.aggregates
    emit_report(result, args.out)
    for split, agg in result.summary.items():
        print(f"{split}: SI-SDR in {agg['si_sdr_in']['mean']:.2f} dB, out {agg['si_sdr_out']['mean']:.2f} dB")


def _run(runner):
    def cmd(cfg, args):
        result = runner(cfg, progress=_progress)
        emit_report(result, args.out)
        for name in ("summary.csv", "sweep.csv", "overlap.csv"):
            if name in result.tables:
                print(f"--- {name}")
                print(result.tables[name], end="")
    return cmd


def cmd_overlap(cfg, args):
    store = CorpusStore(build_manifest(cfg.corpus, cfg.seed))
    result = ExperimentResult("overlap", cfg)
    scores, overlap_csv, emb_csv = overlap_tables(store, cfg, cfg.experiment.sweep_families)
    result.tables["overlap.csv"] = overlap_csv
    result.tables["embeddings.csv"] = emb_csv
    result.summary = {"overlap": scores}
    emit_report(result, args.out)
    print(overlap_csv, end="")


COMMANDS = {
    "synth-corpus": (cmd_synth_corpus, "write the synthetic corpus WAVs and manifest"),
    "train": (cmd_train, "train one strategy and save the best checkpoint"),
    "evaluate": (cmd_evaluate, "score a checkpoint on the matched and mismatched test sets"),
    "poc": (_run(run_proof_of_concept), "proof of concept: CTT vs NeTT vs NyTT"),
    "snr-sweep": (_run(run_snr_sweep), "NyTT performance versus noisy-target SNR"),
    "noise-sweep": (_run(run_noise_sweep), "NyTT performance versus additional-noise family"),
    "overlap": (cmd_overlap, "noise-pool overlap diagnostic"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="noisy-target", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log training progress")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", type=Path, default=None, help="INI config file (defaults if omitted)")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides the config)")
        p.add_argument("--out", type=Path, required=True, help="output directory")
        if name == "train":
            p.add_argument("--strategy", choices=[s.value for s in Strategy], default=None)
        if name == "evaluate":
            p.add_argument("--checkpoint", type=Path, required=True)
        if name == "poc":
            p.add_argument("--train-count", type=int, default=None,
                           help="NyTT (L) corpus size as a multiple of the training set")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        cfg = load_config(args.config, seed=args.seed)
        if args.seed is not None and not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        experiment = {"poc": "proof_of_concept", "snr-sweep": "snr_sweep", "noise-sweep": "noise_sweep"}
        if args.command in experiment:
            cfg = cfg.with_experiment(experiment[args.command])
        if getattr(args, "train_count", None):
            exp = dict(cfg.experiment.__dict__, large_multiplier=args.train_count)
            cfg = type(cfg)(cfg.corpus, cfg.train, type(cfg.experiment)(**exp), cfg.seed)
        COMMANDS[args.command][0](cfg, args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
