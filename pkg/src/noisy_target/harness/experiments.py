"""The three desk-scale experiments and report emission."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..metrics import MetricsReport, reports_to_csv, score_utterance
from ..mixer import Strategy
from ..model import MaskNet, enhance
from ..signal import derive_seed
from ..stft import StftParams
from ..trainer import TrainHistory, ValItem, train
from .config import ExperimentConfig
from .corpus import FAMILIES, CorpusStore, build_manifest
from .overlap import embed, overlap_from_embeddings

log = logging.getLogger(__name__)

SWEEP_COLUMNS = ("point_label", "si_sdri_mean", "si_sdri_median", "si_sdri_var")


@dataclass
class ExperimentResult:
    experiment: str
    config: ExperimentConfig
    tables: dict[str, str] = field(default_factory=dict)
    summary: dict = field(default_factory=dict)
    nets: dict[str, MaskNet] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({
            "experiment": self.experiment,
            "seed": self.config.seed,
            "config": self.config.to_dict(),
            "summary": self.summary,
            "tables": {name: _csv_rows(text) for name, text in sorted(self.tables.items())},
        }, indent=2, sort_keys=True, allow_nan=False, default=_json_default)


def _json_default(o):
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv_rows(text: str) -> list[dict]:
    return [{k: _number(v) for k, v in row.items()} for row in csv.DictReader(io.StringIO(text))]


def _number(v: str):
    for conv in (int, float):
        try:
            out = conv(v)
        except ValueError:
            continue
        if isinstance(out, float) and not math.isfinite(out):
            return v
        return out
    return v


def _csv(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(x) if isinstance(x, float) else x for x in r])
    return buf.getvalue()


def point_label(snr: float) -> str:
    return "inf" if math.isinf(snr) else f"{snr:g}"


def evaluate_net(net: MaskNet, items: Sequence[ValItem], method: str, p: StftParams) -> MetricsReport:
    records = [score_utterance(v.utt_id, method, enhance(net, v.input, p), v.input, v.reference, p)
               for v in items]
    return MetricsReport(records, method)


def sweep_row(label: str, report: MetricsReport) -> tuple:
    a = report.aggregates["si_sdri"]
    return (label, a["mean"], a["median"], a["variance"])


def _summary(report: MetricsReport) -> dict:
    return {col: dict(stats) for col, stats in report.aggregates.items()}


def _history_csv(history: TrainHistory) -> str:
    return history.to_csv()


class _Context:
    def __init__(self, cfg: ExperimentConfig, progress=None):
        self.cfg = cfg
        self.manifest = build_manifest(cfg.corpus, cfg.seed)
        self.store = CorpusStore(self.manifest)
        self.progress = progress
        self.val = self.store.eval_set("val")

    def train(self, strategy, corpus, tag: str) -> tuple[MaskNet, TrainHistory]:
        tc = self.cfg.train.train_config(strategy, seed=derive_seed(self.cfg.seed, tag))
        cb = None
        if self.progress is not None:
            cb = lambda e, l, v: self.progress(tag, e, l, v)  # noqa: E731
        log.info("training %s (%s) on %d items", tag, Strategy(strategy).value, len(corpus))
        return train(tc, corpus, self.val, progress=cb)

    @property
    def stft(self) -> StftParams:
        return StftParams(self.cfg.train.win_len, self.cfg.train.hop)


def run_proof_of_concept(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """CTT / NeTT / NyTT under matched noise variety, scored on matched and mismatched tests."""
    ctx = _Context(cfg, progress)
    store = ctx.store
    pool = store.noise_pool(cfg.corpus.training_families)
    tests = {"matched": store.eval_set("test_matched"), "mismatched": store.eval_set("test_mismatched")}
    methods = [(m, Strategy(m)) for m in cfg.experiment.methods]
    if cfg.experiment.large_multiplier > 1:
        methods.append(("NyTT_L", Strategy.NyTT))

    result = ExperimentResult("proof_of_concept", cfg)
    reports: dict[str, list[MetricsReport]] = {t: [] for t in tests}
    summary: dict = {"methods": {}, "input": {}}
    for name, strategy in methods:
        if name == "NyTT_L":
            corpus = store.large_noisy_corpus(pool, cfg.experiment.large_multiplier, cfg.corpus)
        elif strategy is Strategy.NyTT:
            corpus = store.noisy_corpus(pool)
        else:
            corpus = store.clean_corpus(pool)
        net, history = ctx.train(strategy, corpus, f"poc/{name}")
        result.nets[name] = net
        result.tables[f"history_{name}.csv"] = _history_csv(history)
        entry = {"strategy": strategy.value, "best_epoch": history.best_epoch,
                 "training_noise_ids": list(corpus.noise.ids), "train_items": len(corpus), "tests": {}}
        for tname, items in tests.items():
            rep = evaluate_net(net, items, name, ctx.stft)
            reports[tname].append(rep)
            entry["tests"][tname] = _summary(rep)
            summary["input"][tname] = rep.aggregates["si_sdr_in"]
        summary["methods"][name] = entry

    for tname, reps in reports.items():
        result.tables[f"metrics_{tname}.csv"] = reports_to_csv(reps)
    rows = []
    for tname, reps in reports.items():
        for rep in reps:
            a = rep.aggregates
            rows.append((tname, rep.method, a["si_sdr_in"]["mean"], a["si_sdr_out"]["mean"],
                         a["si_sdri"]["mean"], a["si_sdri"]["median"], a["si_sdri"]["variance"],
                         a["lsd"]["mean"]))
    result.tables["summary.csv"] = _csv(
        ("test_set", "method", "si_sdr_in", "si_sdr_out", "si_sdri", "si_sdri_median", "si_sdri_var", "lsd"),
        rows)
    result.summary = summary
    return result


def run_snr_sweep(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """NyTT at fixed noisy-target SNRs; the +inf point is clean-target training."""
    ctx = _Context(cfg, progress)
    store = ctx.store
    pool = store.noise_pool(cfg.corpus.training_families)
    test = store.eval_set("test_matched")
    result = ExperimentResult("snr_sweep", cfg)
    reports, rows, points = [], [], {}
    for snr in cfg.experiment.sweep_snrs:
        label = point_label(snr)
        if math.isinf(snr):
            strategy, corpus = Strategy.CTT, store.clean_corpus(pool)
        else:
            strategy, corpus = Strategy.NyTT, store.noisy_corpus(pool, fixed_snr=snr)
        net, history = ctx.train(strategy, corpus, f"snr_sweep/{label}")
        result.nets[label] = net
        result.tables[f"history_snr_{label}.csv"] = _history_csv(history)
        rep = evaluate_net(net, test, f"snr_{label}", ctx.stft)
        reports.append(rep)
        rows.append(sweep_row(label, rep))
        points[label] = {"strategy": strategy.value, "best_epoch": history.best_epoch, **_summary(rep)}
    result.tables["metrics_snr_sweep.csv"] = reports_to_csv(reports)
    result.tables["sweep.csv"] = _csv(SWEEP_COLUMNS, rows)
    result.summary = {"points": points}
    return result


def overlap_tables(store: CorpusStore, cfg: ExperimentConfig, families: Sequence[str]):
    """Overlap score of each family's training pool against the observation-noise pool."""
    p = StftParams(cfg.train.win_len, cfg.train.hop)
    obs = store.manifest.select("noise", "obs", cfg.corpus.obs_family)
    obs_emb = [embed(store.get(e.id), p) for e in obs]
    emb_rows = [("observation", e.id, *vec) for e, vec in zip(obs, obs_emb)]
    scores = {}
    for fam in families:
        entries = store.manifest.select("noise", "train", fam)
        fam_emb = [embed(store.get(e.id), p) for e in entries]
        emb_rows += [(fam, e.id, *vec) for e, vec in zip(entries, fam_emb)]
        scores[fam] = overlap_from_embeddings(np.stack(obs_emb), np.stack(fam_emb))
    overlap_csv = _csv(("family", "analog", "overlap_score"),
                       [(f, FAMILIES[f]["analog"], s) for f, s in scores.items()])
    emb_csv = _csv(("pool", "clip_id", *[f"band_{i:02d}" for i in range(len(obs_emb[0]))]),
                   [tuple(float(x) if not isinstance(x, str) else x for x in r) for r in emb_rows])
    return scores, overlap_csv, emb_csv


def run_noise_sweep(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    """NyTT once per additional-noise family against a fixed observation-noise corpus."""
    ctx = _Context(cfg, progress)
    store = ctx.store
    test = store.remixed_eval_set("test_matched", cfg.corpus.heldout_family,
                                  cfg.experiment.noise_sweep_test_snrs, "test_noise_sweep")
    result = ExperimentResult("noise_sweep", cfg)
    reports, rows, fams = [], [], {}
    for fam in cfg.experiment.sweep_families:
        pool = store.noise_pool([fam])
        corpus = store.noisy_corpus(pool)
        net, history = ctx.train(Strategy.NyTT, corpus, f"noise_sweep/{fam}")
        result.nets[fam] = net
        result.tables[f"history_noise_{fam}.csv"] = _history_csv(history)
        rep = evaluate_net(net, test, fam, ctx.stft)
        reports.append(rep)
        rows.append(sweep_row(fam, rep))
        fams[fam] = {"analog": FAMILIES[fam]["analog"], "best_epoch": history.best_epoch, **_summary(rep)}
    scores, overlap_csv, emb_csv = overlap_tables(store, cfg, cfg.experiment.sweep_families)
    for fam, s in scores.items():
        fams[fam]["overlap_score"] = s
    result.tables["metrics_noise_sweep.csv"] = reports_to_csv(reports)
    result.tables["sweep.csv"] = _csv(SWEEP_COLUMNS, rows)
    result.tables["overlap.csv"] = overlap_csv
    result.tables["embeddings.csv"] = emb_csv
    result.summary = {"families": fams, "test_noise": cfg.corpus.heldout_family}
    return result


RUNNERS = {
    "proof_of_concept": run_proof_of_concept,
    "snr_sweep": run_snr_sweep,
    "noise_sweep": run_noise_sweep,
}


def run_experiment(cfg: ExperimentConfig, progress=None) -> ExperimentResult:
    return RUNNERS[cfg.experiment.experiment](cfg, progress)


def emit_report(result: ExperimentResult, out_dir) -> list[Path]:
    """Write every table plus ``results.json``; overwrites previous output."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for name, text in sorted(result.tables.items()):
        path = out / name
        path.write_text(text)
        written.append(path)
    path = out / "results.json"
    path.write_text(result.to_json() + "\n")
    written.append(path)
    return written
