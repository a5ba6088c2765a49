"""Reading recorded force runs and replaying them as a timed stream.

Force files are CSV with an optional header and the columns
``t_s,f_tangential_v,f_feed_v,f_thrust_v`` (the time column may be absent).
Files are read forward in bounded-size blocks; every block is a float array
of shape ``(rows, 4)`` holding ``t, tangential, feed, thrust`` at the working
rate.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Callable, Iterable, Iterator, NamedTuple

import numpy as np
import pandas as pd

from wearguard.errors import ConfigError, DecodeError, StreamIntegrityError

TIME_COLUMN = "t_s"
FORCE_COLUMNS = ("f_tangential_v", "f_feed_v", "f_thrust_v")
CHANNELS = ("tangential", "feed", "thrust")

RUN_TABLE_COLUMNS = (
    "run",
    "v_m_per_min",
    "feed_um_per_rev",
    "t0_s",
    "end_s",
    "flank_wear_um",
    "split",
)
SPLITS = ("train", "test", "broken")


class ForceSample(NamedTuple):
    t: float
    f_tangential: float
    f_feed: float
    f_thrust: float


@dataclass(frozen=True)
class StreamConfig:
    """Sampling geometry of one run.

    ``columns`` names the file columns in order (``t_s`` and the three
    ``FORCE_COLUMNS``; any other name marks a column to ignore). Leave it
    unset to use the header, or the positional default when there is none.
    """

    input_rate: int | None = None
    working_rate: int = 3500
    window_len: int = 350
    feature_rate: int = 10
    batch_len: int = 10
    columns: tuple[str, ...] | None = None

    def __post_init__(self):
        if min(self.working_rate, self.window_len, self.feature_rate, self.batch_len) <= 0:
            raise ConfigError("stream rates and lengths must be positive")
        if self.working_rate != self.feature_rate * self.window_len:
            raise ConfigError(
                f"working_rate {self.working_rate} != feature_rate {self.feature_rate}"
                f" x window_len {self.window_len}"
            )
        if self.input_rate is not None and self.input_rate <= 0:
            raise ConfigError("input_rate must be positive")

    @property
    def source_rate(self) -> int:
        return self.working_rate if self.input_rate is None else self.input_rate

    @property
    def stride(self) -> int:
        """Decimation factor from the file rate to the working rate."""
        rate = self.source_rate
        if rate % self.working_rate:
            raise ConfigError(
                f"input_rate {rate} is not an integer multiple of working_rate {self.working_rate}"
            )
        return rate // self.working_rate


@dataclass(frozen=True)
class RunRecord:
    run_id: int
    v: float
    feed: float
    t0: float
    end_time: float
    flank_wear: float | None
    split: str

    @property
    def broken(self) -> bool:
        return self.flank_wear is None


def _is_number(text: str) -> bool:
    try:
        float(text)
    except ValueError:
        return False
    return True


def _first_line(path: Path) -> str | None:
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                return line.strip()
    return None


def _column_layout(path: Path, cfg: StreamConfig) -> tuple[bool, int, int | None, list[int]]:
    """Return (has_header, n_columns, time_col, force_cols)."""
    first = _first_line(path)
    if first is None:
        raise DecodeError("empty force file", path=path)
    fields = [f.strip() for f in first.split(",")]
    has_header = not all(_is_number(f) for f in fields)
    if cfg.columns is not None:
        names = list(cfg.columns)
        if len(names) != len(fields):
            raise ConfigError(
                f"columns lists {len(names)} names but {path} has {len(fields)} columns"
            )
    elif has_header and set(FORCE_COLUMNS) <= set(fields):
        names = fields
    elif len(fields) == 4:
        names = [TIME_COLUMN, *FORCE_COLUMNS]
    elif len(fields) == 3:
        names = list(FORCE_COLUMNS)
    else:
        raise DecodeError(
            f"expected 3 or 4 columns, found {len(fields)}", line=1, path=path
        )
    missing = [c for c in FORCE_COLUMNS if c not in names]
    if missing:
        raise ConfigError(f"column mapping lacks {', '.join(missing)}")
    time_col = names.index(TIME_COLUMN) if TIME_COLUMN in names else None
    return has_header, len(fields), time_col, [names.index(c) for c in FORCE_COLUMNS]


def read_blocks(
    path: str | Path, cfg: StreamConfig | None = None, block_rows: int = 1 << 16
) -> Iterator[np.ndarray]:
    """Yield ``(rows, 4)`` arrays of ``t, tangential, feed, thrust`` in file order.

    Decimation keeps every ``stride``-th row counted from the start of the
    file, so block boundaries never shift the kept rows. Missing timestamps
    are synthesized as ``row_index / input_rate``.
    """
    cfg = cfg or StreamConfig()
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(path)
    stride = cfg.stride
    rate = cfg.source_rate
    has_header, ncols, time_col, force_cols = _column_layout(path, cfg)
    header_lines = 1 if has_header else 0

    reader = pd.read_csv(
        path,
        header=None,
        names=list(range(ncols)),
        index_col=False,
        skiprows=header_lines,
        chunksize=block_rows,
        dtype=str,
        skip_blank_lines=True,
        encoding="utf-8",
    )
    row0 = 0
    last_t = -np.inf
    try:
        for chunk in reader:
            raw = chunk.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=float)
            bad = ~np.isfinite(raw).all(axis=1)
            if bad.any():
                i = int(np.argmax(bad))
                # chunk.index is the 0-based data-row position; blank lines are not counted
                raise DecodeError(
                    f"malformed row {list(chunk.iloc[i].fillna(''))!r}",
                    line=header_lines + int(chunk.index[i]) + 1,
                    path=path,
                )
            n = raw.shape[0]
            rows = np.arange(row0, row0 + n)
            if time_col is None:
                t = rows / rate
            else:
                t = raw[:, time_col]
                steps = np.diff(np.concatenate(([last_t], t)))
                if (steps <= 0).any():
                    i = int(np.argmax(steps <= 0))
                    raise StreamIntegrityError(
                        f"{path}: timestamp {t[i]!r} at line {header_lines + row0 + i + 1}"
                        " does not increase"
                    )
                last_t = t[-1]
            keep = rows % stride == 0
            row0 += n
            if not keep.any():
                continue
            block = np.empty((int(keep.sum()), 4))
            block[:, 0] = t[keep]
            block[:, 1:] = raw[keep][:, force_cols]
            yield block
    except pd.errors.ParserError as exc:
        raise DecodeError(str(exc), path=path) from exc


def open_run(path: str | Path, cfg: StreamConfig | None = None) -> Iterator[ForceSample]:
    for block in read_blocks(path, cfg):
        for row in block.tolist():
            yield ForceSample(*row)


def samples_to_blocks(samples: Iterable[ForceSample], block_rows: int = 3500) -> Iterator[np.ndarray]:
    """Regroup a sample stream into arrays, e.g. after :func:`replay`."""
    buf: list[ForceSample] = []
    for s in samples:
        buf.append(s)
        if len(buf) == block_rows:
            yield np.asarray(buf, dtype=float)
            buf = []
    if buf:
        yield np.asarray(buf, dtype=float)


def replay(
    samples: Iterable[ForceSample],
    speedup: float,
    *,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
    min_sleep: float = 1e-3,
) -> Iterator[ForceSample]:
    """Re-emit samples paced by their timestamps divided by ``speedup``.

    ``speedup == 0`` passes samples through without waiting. Delays are
    scheduled against absolute due times, so short sleeps skipped below
    ``min_sleep`` do not accumulate drift.
    """
    if speedup < 0:
        raise ConfigError("speedup must be >= 0")
    if speedup == 0:
        yield from samples
        return
    start = t_first = None
    for s in samples:
        if start is None:
            start, t_first = clock(), s.t
        delay = start + (s.t - t_first) / speedup - clock()
        if delay > min_sleep:
            sleep(delay)
        yield s


def replay_blocks(
    blocks: Iterable[np.ndarray],
    speedup: float,
    *,
    clock: Callable[[], float] = time.monotonic,
    sleep: Callable[[float], None] = time.sleep,
) -> Iterator[np.ndarray]:
    """Block-level :func:`replay`: a block is released once its last sample is due."""
    if speedup < 0:
        raise ConfigError("speedup must be >= 0")
    if speedup == 0:
        yield from blocks
        return
    start = t_first = None
    for block in blocks:
        if len(block) == 0:
            continue
        if start is None:
            start, t_first = clock(), block[0, 0]
        delay = start + (block[-1, 0] - t_first) / speedup - clock()
        if delay > 0:
            sleep(delay)
        yield block


def default_run_table() -> Path:
    return Path(str(resources.files("wearguard") / "data" / "table1.csv"))


def load_run_table(path: str | Path | None = None) -> list[RunRecord]:
    """Parse run metadata; ``flank_wear_um == "broken"`` marks a fracture run."""
    path = Path(path) if path is not None else default_run_table()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in RUN_TABLE_COLUMNS if c not in header]
        if missing:
            raise DecodeError(f"run table lacks columns: {', '.join(missing)}", line=1, path=path)
        records = []
        for lineno, row in enumerate(reader, start=2):
            row = {k.strip(): (v or "").strip() for k, v in row.items() if k is not None}
            try:
                wear_text = row["flank_wear_um"]
                wear = None if wear_text.lower() == "broken" else float(wear_text)
                rec = RunRecord(
                    run_id=int(row["run"]),
                    v=float(row["v_m_per_min"]),
                    feed=float(row["feed_um_per_rev"]),
                    t0=float(row["t0_s"]),
                    end_time=float(row["end_s"]),
                    flank_wear=wear,
                    split=row["split"].lower(),
                )
            except ValueError as exc:
                raise DecodeError(str(exc), line=lineno, path=path) from exc
            if rec.split not in SPLITS:
                raise DecodeError(f"unknown split {rec.split!r}", line=lineno, path=path)
            if rec.v <= 0 or rec.feed <= 0 or rec.t0 > rec.end_time:
                raise DecodeError("inconsistent run record", line=lineno, path=path)
            records.append(rec)
    return records
