"""Accuracy records, trial summaries, and JSONL/CSV serialization.

A run produces a sequence of records (one per evaluation tick plus a final
one) and a summary line with run counters. Across trials, final records are
summarized per metric by the median and a [5th, 95th] percentile band using
linear interpolation.
"""

from __future__ import annotations

import csv
import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import model
from .data import FederatedDataset
from .model import ModelLayout

BAND_PERCENTILES = (5.0, 50.0, 95.0)


@dataclass(frozen=True)
class MetricsRecord:
    """One evaluation of the served model during a run."""

    virtual_time_s: float
    server_step: int
    aggregated_updates: int
    total_acc: float
    straggler_acc: float
    which_model: str

    def to_dict(self) -> dict:
        return {"type": "record", **asdict(self)}


def evaluate_accuracy(
    w: np.ndarray,
    layout: ModelLayout,
    dataset: FederatedDataset,
    cap: int | None = None,
) -> tuple[float, float]:
    """Accuracy on the total and straggler-class eval splits, capped to
    the first `cap` examples of each split."""
    total, straggler = dataset.eval_total, dataset.eval_straggler
    if cap is not None:
        if cap < 1:
            raise ValueError(f"cap must be >= 1, got {cap}")
        total_x, total_y = total.features[:cap], total.labels[:cap]
        strag_x, strag_y = straggler.features[:cap], straggler.labels[:cap]
    else:
        total_x, total_y = total.features, total.labels
        strag_x, strag_y = straggler.features, straggler.labels
    return (
        model.accuracy(w, layout, total_x, total_y),
        model.accuracy(w, layout, strag_x, strag_y),
    )


@dataclass(frozen=True)
class MetricSummary:
    lo: float
    median: float
    hi: float


def percentile_band(values: list[float] | np.ndarray) -> MetricSummary:
    """Median with a [5, 95] percentile band (linear interpolation)."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.size == 0:
        raise ValueError("cannot summarize an empty value list")
    lo, med, hi = np.percentile(arr, BAND_PERCENTILES)
    return MetricSummary(lo=float(lo), median=float(med), hi=float(hi))


def summarize_trials(final_records: list[dict]) -> dict[str, MetricSummary]:
    """Summarize the final records of several trials, metric by metric."""
    if not final_records:
        raise ValueError("no trial records to summarize")
    out: dict[str, MetricSummary] = {}
    for key in ("total_acc", "straggler_acc", "virtual_time_s", "aggregated_updates"):
        out[key] = percentile_band([float(r[key]) for r in final_records])
    return out


# ---- JSONL run logs ---- #


def write_run_jsonl(
    path: str | Path,
    *,
    header: dict,
    records: list[MetricsRecord],
    summary: dict,
) -> None:
    """Write one run log: a header line, record lines, and a summary line."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"type": "header", **header}) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")
        fh.write(json.dumps({"type": "summary", **summary}) + "\n")


def read_run_jsonl(path: str | Path) -> tuple[dict, list[dict], dict]:
    """Read a run log back into (header, records, summary)."""
    header: dict | None = None
    summary: dict | None = None
    records: list[dict] = []
    with Path(path).open("r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            row = json.loads(line)
            kind = row.pop("type", None)
            if kind == "header":
                header = row
            elif kind == "record":
                records.append(row)
            elif kind == "summary":
                summary = row
            else:
                raise ValueError(f"{path}:{line_no}: unknown row type {kind!r}")
    if header is None or summary is None:
        raise ValueError(f"{path}: missing header or summary line")
    return header, records, summary


def write_csv(path: str | Path, rows: list[dict], fieldnames: list[str]) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
