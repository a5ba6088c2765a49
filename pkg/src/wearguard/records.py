"""Flat record schemas and round-trip CSV formatting."""

from __future__ import annotations

import csv
import io
import math
import os
from pathlib import Path
from typing import Iterable, Mapping, Sequence

VERDICT_FIELDS = (
    "run", "second", "channel", "gate", "verdict",
    "stat1", "stat2", "stat3", "stat4", "n", "mean_abs", "var",
)
WARNING_FIELDS = ("run", "t_hat", "channel", "method", "omega")
SWEEP_FIELDS = ("method", "scheme", "diff", "mode", "omega", "mean_train", "mean_test", "mean_broken")
RUN_SCORE_FIELDS = ("run", "v", "t0", "t_hat", "delta_m", "score", "split")


def fmt(value) -> str:
    """Stable text form: ``repr`` for floats (shortest round-trip), blank for None/NaN."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return "" if math.isnan(value) else repr(value)
    return str(value)


def csv_text(fields: Sequence[str], rows: Iterable[Mapping]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(fields)
    for row in rows:
        w.writerow([fmt(row.get(f)) for f in fields])
    return buf.getvalue()


def write_atomic(path: str | Path, text: str) -> None:
    """Write via a temporary sibling so readers never see partial files."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
    os.replace(tmp, path)


def write_csv(path: str | Path, fields: Sequence[str], rows: Iterable[Mapping]) -> None:
    write_atomic(path, csv_text(fields, rows))
