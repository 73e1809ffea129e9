"""Metrics CSV and JSON summary for a finished run."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from ..trainer import METRIC_COLUMNS, RunResult
from .config import config_hash


class MetricsIOError(OSError):
    pass


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    value = float(value)
    return "nan" if math.isnan(value) else repr(value)


def summary_path(csv_path) -> Path:
    return Path(csv_path).with_suffix(".json")


def summarize(result: RunResult) -> dict:
    def clean(x):
        return None if x is None or math.isnan(x) else float(x)

    return {
        "config_hash": config_hash(result.config),
        "seed": result.config.seed,
        "final_teacher_acc": clean(result.final_teacher_acc),
        "final_student_acc": clean(result.final_student_acc),
        "steps": result.config.total_steps,
        "wallclock_s": result.wallclock_s,
    }


def write_metrics(result: RunResult, path) -> Path:
    """Write one CSV row per evaluation plus ``<stem>.json`` next to it.

    Floats use ``repr`` so the file is byte-identical across reruns of the
    same config; columns a teacher-only run cannot fill are ``nan``.
    """
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(METRIC_COLUMNS)
            for row in result.history:
                w.writerow([_fmt(row[c]) for c in METRIC_COLUMNS])
        summary_path(path).write_text(json.dumps(summarize(result), indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise MetricsIOError(f"cannot write metrics to {path}: {exc}") from None
    return path


def read_metrics(path) -> dict[str, np.ndarray]:
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise MetricsIOError(f"cannot read metrics from {path}: {exc}") from None
    if not rows or tuple(rows[0]) != METRIC_COLUMNS:
        raise ValueError(f"{path}: unexpected header {rows[0] if rows else None}")
    body = np.array([[float(v) for v in r] for r in rows[1:]], dtype=np.float64).reshape(-1, len(METRIC_COLUMNS))
    return {c: body[:, i] for i, c in enumerate(METRIC_COLUMNS)}
