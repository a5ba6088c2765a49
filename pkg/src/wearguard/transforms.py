"""Feature frames to difference batches.

Univariate mode differences one channel's q90 trace; multivariate mode fuses
tangential and feed into a Euclidean distance. Each difference travels with
the force magnitude it is gated on: the channel's q90, or the mean of the two
absolute q90s when fused.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator

import numpy as np

from wearguard.errors import ConfigError, InsufficientDataError

DIFF_KINDS = ("FOD", "MSD")


def fod(x) -> np.ndarray:
    """Backward differences ``x[i] - x[i-1]``."""
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 2:
        raise InsufficientDataError("first-order difference needs at least 2 values")
    return x[1:] - x[:-1]


def msd(x) -> np.ndarray:
    """Minimum successive difference for every interior point.

    Picks whichever of the backward and forward difference is smaller in
    magnitude, keeping its sign; ties go to the backward difference.
    """
    x = np.asarray(x, dtype=float)
    if x.shape[0] < 3:
        raise InsufficientDataError("minimum successive difference needs at least 3 values")
    back = x[1:-1] - x[:-2]
    fwd = x[1:-1] - x[2:]
    return np.where(np.abs(back) <= np.abs(fwd), back, fwd)


def _check_kind(kind: str) -> str:
    kind = kind.upper()
    if kind not in DIFF_KINDS:
        raise ConfigError(f"unknown difference kind {kind!r}")
    return kind


class DiffStream:
    """Streaming FOD/MSD over a univariate ``(m,)`` or fused ``(m, 2)`` frame feed.

    MSD values wait one frame for their forward neighbour, so only fully
    determined values leave ``push``.
    """

    def __init__(self, kind: str = "FOD", multivariate: bool = False):
        self.kind = _check_kind(kind)
        self.multivariate = multivariate
        self._tail = np.empty((0, 2)) if multivariate else np.empty(0)

    def push(self, frames) -> tuple[np.ndarray, np.ndarray]:
        x = np.asarray(frames, dtype=float)
        if self.multivariate:
            x = x.reshape(-1, 2)
        buf = np.concatenate((self._tail, x)) if self._tail.shape[0] else x
        need = 2 if self.kind == "FOD" else 3
        if buf.shape[0] < need:
            self._tail = buf
            return np.empty(0), np.empty(0)
        if self.kind == "FOD":
            center = buf[1:]
            d = self._norm(center - buf[:-1])
            self._tail = buf[-1:]
        else:
            center = buf[1:-1]
            back = self._norm(center - buf[:-2])
            fwd = self._norm(center - buf[2:])
            d = np.where(np.abs(back) <= np.abs(fwd), back, fwd)
            self._tail = buf[-2:]
        if self.multivariate:
            f = np.abs(center).mean(axis=1)
        else:
            f = center.copy()
        return d, f

    def _norm(self, delta: np.ndarray) -> np.ndarray:
        if self.multivariate:
            return np.hypot(delta[:, 0], delta[:, 1])
        return delta


def fuse_multivariate(frames, diff_kind: str = "FOD") -> Iterator[tuple[float, float]]:
    """Euclidean-fused ``(d, f)`` pairs over tangential and feed q90.

    ``frames`` is an iterable of :class:`~wearguard.features.FeatureFrame`
    or an array whose first two columns are tangential and feed q90. Thrust
    never takes part.
    """
    if isinstance(frames, np.ndarray):
        rows = frames[:, :2]
    else:
        rows = np.asarray([fr.q90[:2] for fr in frames], dtype=float).reshape(-1, 2)
    d, f = DiffStream(diff_kind, multivariate=True).push(rows)
    yield from zip(d.tolist(), f.tolist())


@dataclass
class DiffBatch:
    second: int
    d: np.ndarray
    f: np.ndarray
    channel: str = "fused"
    diff_kind: str = "FOD"

    def __len__(self) -> int:
        return len(self.d)


class Batcher:
    """Groups consecutive ``(d, f)`` values into fixed-size batches.

    Batch numbering starts at 1 with the first difference available; a
    partial batch is held until it fills and is dropped at end of stream.
    """

    def __init__(self, batch_len: int = 10, channel: str = "fused", diff_kind: str = "FOD"):
        self.batch_len = batch_len
        self.channel = channel
        self.diff_kind = diff_kind
        self.emitted = 0
        self._d = np.empty(0)
        self._f = np.empty(0)

    def push(self, d, f) -> list[DiffBatch]:
        self._d = np.concatenate((self._d, np.asarray(d, dtype=float)))
        self._f = np.concatenate((self._f, np.asarray(f, dtype=float)))
        m = self._d.shape[0] // self.batch_len
        out = []
        for i in range(m):
            s = slice(i * self.batch_len, (i + 1) * self.batch_len)
            self.emitted += 1
            out.append(DiffBatch(self.emitted, self._d[s].copy(), self._f[s].copy(), self.channel, self.diff_kind))
        used = m * self.batch_len
        self._d = self._d[used:]
        self._f = self._f[used:]
        return out

    @property
    def pending(self) -> int:
        return self._d.shape[0]


def batcher(diffs: Iterable, batch_len: int = 10, channel: str = "fused", diff_kind: str = "FOD") -> Iterator[DiffBatch]:
    """Batch a stream of difference values or ``(d, f)`` pairs.

    Bare values get a zero force magnitude.
    """
    b = Batcher(batch_len, channel, diff_kind)
    for item in diffs:
        d, f = item if isinstance(item, tuple) else (item, 0.0)
        yield from b.push([d], [f])


def write_diff_dump(path, batches: Iterable[DiffBatch]) -> None:
    """Write the ``second,pos,d,f`` debugging table."""
    import csv

    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["second", "pos", "d", "f"])
        for b in batches:
            for pos, (d, f) in enumerate(zip(b.d.tolist(), b.f.tolist()), start=1):
                w.writerow([b.second, pos, repr(d), repr(f)])
