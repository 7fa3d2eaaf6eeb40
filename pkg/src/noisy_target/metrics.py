"""SI-SDR, SI-SDR improvement, log-spectral distance and report aggregation."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .signal import Waveform
from .stft import StftParams, stft

SI_SDR_CAP = 60.0
METRIC_COLUMNS = ("si_sdr_in", "si_sdr_out", "si_sdri", "lsd")
CSV_COLUMNS = ("utt_id", "method", *METRIC_COLUMNS)
AGGREGATES = ("mean", "median", "variance")


class MetricsError(ValueError):
    pass


def _samples(w) -> np.ndarray:
    return w.samples if isinstance(w, Waveform) else np.asarray(w, dtype=np.float64)


def si_sdr(est, ref) -> float:
    """Scale-invariant SDR in dB, clamped to [-60, 60].

    alpha = <est, ref> / ||ref||^2 ; 10*log10(||alpha*ref||^2 / ||alpha*ref - est||^2)
    """
    e, r = _samples(est), _samples(ref)
    if e.shape != r.shape:
        raise MetricsError(f"length mismatch: {e.size} vs {r.size}")
    ref_energy = float(np.dot(r, r))
    if ref_energy == 0.0:
        raise MetricsError("SI-SDR undefined for a silent reference")
    alpha = float(np.dot(e, r)) / ref_energy
    proj = alpha * r
    target_energy = float(np.dot(proj, proj))
    resid = proj - e
    err_energy = float(np.dot(resid, resid))
    if target_energy == 0.0:
        return -SI_SDR_CAP
    if err_energy == 0.0:
        return SI_SDR_CAP
    return float(np.clip(10.0 * math.log10(target_energy / err_energy), -SI_SDR_CAP, SI_SDR_CAP))


def si_sdr_improvement(est, noisy_input, ref) -> float:
    return si_sdr(est, ref) - si_sdr(noisy_input, ref)


def log_spectral_distance(est, ref, p: StftParams = StftParams(), eps: float = 1e-8) -> float:
    """Mean over frames of the RMS (over bins) of 20*log10 magnitude ratios."""
    e = est if isinstance(est, Waveform) else Waveform(est)
    r = ref if isinstance(ref, Waveform) else Waveform(ref)
    if len(e) != len(r):
        raise MetricsError(f"length mismatch: {len(e)} vs {len(r)}")
    E = np.abs(stft(e, p).bins)
    R = np.abs(stft(r, p).bins)
    d = 20.0 * np.log10((E + eps) / (R + eps))
    return float(np.mean(np.sqrt(np.mean(d ** 2, axis=0))))


@dataclass
class UtteranceRecord:
    utt_id: str
    method: str
    si_sdr_in: float
    si_sdr_out: float
    si_sdri: float
    lsd: float


def score_utterance(utt_id: str, method: str, est: Waveform, noisy_input: Waveform, ref: Waveform,
                    p: StftParams = StftParams()) -> UtteranceRecord:
    s_in = si_sdr(noisy_input, ref)
    s_out = si_sdr(est, ref)
    return UtteranceRecord(utt_id, method, s_in, s_out, s_out - s_in, log_spectral_distance(est, ref, p))


def lower_median(values: Sequence[float]) -> float:
    v = sorted(values)
    return float(v[(len(v) - 1) // 2])


def aggregate(records: Sequence[UtteranceRecord]) -> dict[str, dict[str, float]]:
    """Mean, lower-middle median and population variance per metric column."""
    if len(records) == 0:
        raise MetricsError("cannot aggregate an empty record set")
    out = {}
    for col in METRIC_COLUMNS:
        vals = np.array(sorted(getattr(r, col) for r in records))
        mean = float(np.mean(vals))
        out[col] = {
            "mean": mean,
            "median": lower_median(vals),
            "variance": float(np.mean((vals - mean) ** 2)),
        }
    return out


@dataclass
class MetricsReport:
    records: list[UtteranceRecord]
    method: str = ""
    aggregates: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.aggregates and self.records:
            self.aggregates = aggregate(self.records)

    def mean(self, col: str) -> float:
        return self.aggregates[col]["mean"]

    def to_rows(self) -> list[dict]:
        rows = [asdict(r) for r in self.records]
        for stat in AGGREGATES:
            row = {"utt_id": f"__{stat}__", "method": self.method}
            row.update({c: self.aggregates[c][stat] for c in METRIC_COLUMNS})
            rows.append(row)
        return rows

    def to_dict(self) -> dict:
        return {
            "method": self.method,
            "si_sdr_cap_db": SI_SDR_CAP,
            "records": [asdict(r) for r in self.records],
            "aggregates": self.aggregates,
        }


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def reports_to_csv(reports: Sequence[MetricsReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        for row in rep.to_rows():
            writer.writerow([format_value(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


def reports_to_json(reports: Sequence[MetricsReport]) -> str:
    return json.dumps([r.to_dict() for r in reports], indent=2, sort_keys=True)
