"""Smart resampling: working-rate forces to one summary frame per window.

Every non-overlapping window of ``window_len`` samples is reduced, per
channel, to a statistic of the absolute values (the 90% quantile by
default). Quantiles interpolate linearly between order statistics at rank
``p*(n-1) + 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from wearguard.errors import ConfigError
from wearguard.ingest import ForceSample, StreamConfig

METRICS = ("q90", "median", "mean", "q10", "bandwidth")
QUANTILE_METHODS = ("linear", "nearest_rank")

# swap to "nearest_rank" to use the ceil(p*n)-th order statistic instead
QUANTILE_METHOD = "linear"


def window_quantile(x: np.ndarray, p: float, method: str = QUANTILE_METHOD) -> np.ndarray:
    """Quantile along the last axis.

    Only the one or two order statistics needed are selected (``np.partition``),
    which keeps the per-window cost linear.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    if n == 0:
        raise ValueError("empty window")
    if method == "nearest_rank":
        k = max(int(np.ceil(p * n)) - 1, 0)
        return np.partition(x, k, axis=-1)[..., k]
    if method != "linear":
        raise ConfigError(f"unknown quantile method {method!r}")
    h = p * (n - 1)
    lo = int(np.floor(h))
    hi = min(lo + 1, n - 1)
    part = np.partition(x, (lo, hi), axis=-1)
    a = part[..., lo]
    b = part[..., hi]
    return a + (h - lo) * (b - a)


def summarize(windows: np.ndarray, metric: str = "q90") -> np.ndarray:
    """Reduce ``(..., window_len)`` raw values to one value per window."""
    a = np.abs(windows)
    if metric == "q90":
        return window_quantile(a, 0.9)
    if metric == "q10":
        return window_quantile(a, 0.1)
    if metric == "median":
        return window_quantile(a, 0.5)
    if metric == "mean":
        return a.mean(axis=-1)
    if metric == "bandwidth":
        return window_quantile(a, 0.9) - window_quantile(a, 0.1)
    raise ConfigError(f"unknown metric {metric!r}; choose from {', '.join(METRICS)}")


def summarize_window(window, metric: str = "q90", window_len: int | None = None) -> np.ndarray:
    """Per-channel summary of one window of samples.

    ``window`` is a sequence of :class:`ForceSample` or an array of shape
    ``(n, 3)`` (forces only) or ``(n, 4)`` (with the time column first).
    """
    arr = np.asarray(window, dtype=float)
    if arr.ndim != 2 or arr.shape[1] not in (3, 4):
        raise ValueError("window must have shape (n, 3) or (n, 4)")
    if arr.shape[1] == 4:
        arr = arr[:, 1:]
    if window_len is not None and arr.shape[0] != window_len:
        raise ValueError(f"window holds {arr.shape[0]} samples, expected {window_len}")
    return summarize(arr.T, metric)


@dataclass
class FeatureFrame:
    idx: int
    q90: tuple[float, float, float]
    extras: dict[str, tuple[float, float, float]] = field(default_factory=dict)


class FeatureExtractor:
    """Incremental window summarizer.

    ``push`` takes any number of new rows and returns the summaries of every
    window completed by them; leftover rows wait for the next call.
    """

    def __init__(self, window_len: int = 350, channels: int = 3, metrics: tuple[str, ...] = ("q90",)):
        self.window_len = window_len
        self.channels = channels
        self.metrics = metrics
        self.frames_emitted = 0
        self._pending = np.empty((0, channels))

    def push(self, forces: np.ndarray) -> dict[str, np.ndarray]:
        forces = np.asarray(forces, dtype=float).reshape(-1, self.channels)
        if self._pending.shape[0]:
            forces = np.concatenate((self._pending, forces))
        m = forces.shape[0] // self.window_len
        used = m * self.window_len
        self._pending = forces[used:].copy()
        # (m, channels, window_len)
        windows = forces[:used].reshape(m, self.window_len, self.channels).transpose(0, 2, 1)
        out = {metric: summarize(windows, metric) for metric in self.metrics}
        out["idx"] = np.arange(self.frames_emitted, self.frames_emitted + m)
        self.frames_emitted += m
        return out

    @property
    def pending(self) -> int:
        return self._pending.shape[0]


def feature_stream(
    samples: Iterable[ForceSample],
    cfg: StreamConfig | None = None,
    metrics: tuple[str, ...] = ("q90",),
) -> Iterator[FeatureFrame]:
    """Sample-by-sample front end over :class:`FeatureExtractor`."""
    cfg = cfg or StreamConfig()
    ext = FeatureExtractor(cfg.window_len, metrics=tuple(dict.fromkeys(("q90", *metrics))))
    buf: list[tuple[float, float, float]] = []
    for s in samples:
        buf.append((s.f_tangential, s.f_feed, s.f_thrust))
        if len(buf) == cfg.window_len:
            out = ext.push(np.asarray(buf))
            buf.clear()
            yield _frame(out, 0, metrics)
    # a trailing partial window is dropped


def _frame(out: dict[str, np.ndarray], i: int, metrics) -> FeatureFrame:
    q90 = tuple(float(v) for v in out["q90"][i])
    extras = {m: tuple(float(v) for v in out[m][i]) for m in metrics if m != "q90"}
    return FeatureFrame(int(out["idx"][i]), q90, extras)


def block_features(blocks: Iterable[np.ndarray], cfg: StreamConfig | None = None) -> Iterator[np.ndarray]:
    """Yield ``(m, 3)`` q90 arrays from ``(rows, 4)`` sample blocks."""
    cfg = cfg or StreamConfig()
    ext = FeatureExtractor(cfg.window_len)
    for block in blocks:
        out = ext.push(block[:, 1:])
        if len(out["idx"]):
            yield out["q90"]


def write_feature_dump(path, q90: np.ndarray) -> None:
    """Write the ``idx,q90_t,q90_f,q90_p`` debugging table."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["idx", "q90_t", "q90_f", "q90_p"])
        for i, row in enumerate(np.asarray(q90).tolist()):
            w.writerow([i, *(repr(v) for v in row)])
