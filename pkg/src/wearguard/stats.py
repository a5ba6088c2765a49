"""Incremental statistics of accumulated difference values.

Rolling origin (``capacity=None``) keeps no history. A rolling window keeps
the last ``capacity`` values in a ring buffer and adjusts count, mean, mean
absolute value and the centred sum of squares by add/remove updates.
"""

from __future__ import annotations

import math
from collections import deque
from typing import Iterable

import numpy as np

from wearguard.errors import ConfigError


class RunningStats:
    def __init__(self, capacity: int | None = None, ddof: int = 0):
        if capacity is not None and capacity <= 0:
            raise ConfigError("rolling window capacity must be positive")
        if ddof not in (0, 1):
            raise ConfigError("ddof must be 0 or 1")
        self.capacity = capacity
        self.ddof = ddof
        self.n = 0
        self.mean = 0.0
        self.mean_abs = 0.0
        self._m2 = 0.0
        self._buf: deque[float] | None = deque() if capacity else None
        self._evicted = 0

    @classmethod
    def rolling_window(cls, seconds: float, batch_len: int = 10, ddof: int = 0) -> "RunningStats":
        return cls(int(round(seconds * batch_len)), ddof)

    @property
    def scheme(self) -> str:
        return "RO" if self.capacity is None else "RW"

    @property
    def var(self) -> float:
        if self.n <= self.ddof:
            return 0.0
        return max(self._m2, 0.0) / (self.n - self.ddof)

    @property
    def sd(self) -> float:
        return math.sqrt(self.var)

    def values(self) -> list[float]:
        """Retained values (rolling window only)."""
        if self._buf is None:
            raise ValueError("rolling origin keeps no history")
        return list(self._buf)

    def add(self, x: float) -> None:
        x = float(x)
        self.n += 1
        delta = x - self.mean
        self.mean += delta / self.n
        self._m2 += delta * (x - self.mean)
        self.mean_abs += (abs(x) - self.mean_abs) / self.n
        if self._buf is not None:
            self._buf.append(x)
            if len(self._buf) > self.capacity:
                self._remove(self._buf.popleft())

    def extend(self, xs: Iterable[float]) -> "RunningStats":
        for x in np.asarray(xs, dtype=float).tolist():
            self.add(x)
        return self

    update = extend

    def _remove(self, x: float) -> None:
        self.n -= 1
        if self.n == 0:
            self.mean = self.mean_abs = self._m2 = 0.0
            return
        old = self.mean
        self.mean = old - (x - old) / self.n
        self._m2 -= (x - old) * (x - self.mean)
        self.mean_abs -= (abs(x) - self.mean_abs) / self.n
        self._evicted += 1
        # bound floating-point drift: exact refresh once per full window turnover
        if self._evicted >= self.capacity:
            self._resync()

    def _resync(self) -> None:
        self._evicted = 0
        vals = self._buf
        self.n = len(vals)
        self.mean = math.fsum(vals) / self.n
        self.mean_abs = math.fsum(abs(v) for v in vals) / self.n
        self._m2 = math.fsum((v - self.mean) ** 2 for v in vals)

    def copy(self) -> "RunningStats":
        new = RunningStats(self.capacity, self.ddof)
        new.n, new.mean, new.mean_abs, new._m2 = self.n, self.mean, self.mean_abs, self._m2
        new._evicted = self._evicted
        if self._buf is not None:
            new._buf = deque(self._buf)
        return new

    def __repr__(self) -> str:
        return (
            f"RunningStats({self.scheme}, n={self.n}, mean={self.mean!r}, "
            f"mean_abs={self.mean_abs!r}, var={self.var!r})"
        )
