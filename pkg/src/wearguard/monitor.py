"""End-to-end run monitoring: forces in, first-anomaly time out.

In multivariate mode one fused pipeline runs over tangential and feed. In
univariate mode each enabled channel has its own pipeline and statistics;
channels advance in lockstep, one batch per second, and the earliest
anomalous second wins with ties resolved in channel order.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from wearguard.detectors import ANOMALOUS, Detector, DetectorConfig, NOT_READY, BLACKOUT, Verdict
from wearguard.errors import WearguardError
from wearguard.features import FeatureExtractor
from wearguard.ingest import CHANNELS, ForceSample, StreamConfig, read_blocks, samples_to_blocks
from wearguard.transforms import Batcher, DiffBatch, DiffStream

DETECTED, NO_ANOMALY, INSUFFICIENT = "detected", "no_anomaly", "insufficient_data"


@dataclass
class DetectionResult:
    run_id: object
    t_hat: float | None
    channel: str | None
    batch_second: int | None
    fired_rule_values: tuple[float, ...]
    status: str

    def to_json(self) -> str:
        d = asdict(self)
        d["fired_rule_values"] = list(self.fired_rule_values)
        return json.dumps(d, sort_keys=True)


def pipeline_channels(cfg: DetectorConfig) -> tuple[str, ...]:
    if cfg.mode == "multivariate":
        return ("fused",)
    return tuple(c for c in CHANNELS if c in cfg.channels)


def in_blackout(cfg: DetectorConfig, second: int) -> bool:
    """Whether the batch ending at ``second`` overlaps a post-restart blackout."""
    if cfg.blackout_s <= 0:
        return False
    return any(p < second and second - 1 < p + cfg.blackout_s for p in cfg.pass_starts)


class FramePipeline:
    """Frames to per-channel difference batches."""

    def __init__(self, cfg: DetectorConfig):
        self.channels = pipeline_channels(cfg)
        multi = cfg.mode == "multivariate"
        self._cols = [[0, 1]] if multi else [[CHANNELS.index(c)] for c in self.channels]
        self._diffs = [DiffStream(cfg.diff, multivariate=multi) for _ in self.channels]
        self._batchers = [Batcher(cfg.batch_len, ch, cfg.diff) for ch in self.channels]

    def push(self, q90: np.ndarray) -> list[tuple[DiffBatch, ...]]:
        """Return the newly completed seconds, each a tuple with one batch per channel."""
        per_channel = []
        for cols, ds, b in zip(self._cols, self._diffs, self._batchers):
            x = q90[:, cols] if len(cols) > 1 else q90[:, cols[0]]
            d, f = ds.push(x)
            per_channel.append(b.push(d, f))
        return list(zip(*per_channel))


class RunMonitor:
    """Incremental monitor for one run.

    Feed force blocks with :meth:`push`; every completed second returns the
    verdicts of all channels. After the first anomaly, ``result`` holds the
    detection; with ``halt`` set, further input is ignored.
    """

    def __init__(self, cfg: DetectorConfig, stream: StreamConfig | None = None, run_id=None, halt: bool = True):
        self.cfg = cfg
        self.stream = stream or StreamConfig(batch_len=cfg.batch_len)
        if self.stream.batch_len != cfg.batch_len:
            raise WearguardError("stream and detector batch lengths differ")
        self.run_id = run_id
        self.halt = halt
        self.features = FeatureExtractor(self.stream.window_len)
        self.frames = FramePipeline(cfg)
        self.detectors = [Detector(cfg, ch) for ch in self.frames.channels]
        self.first: Verdict | None = None
        self.seconds = 0
        self.ready_seen = False

    @property
    def done(self) -> bool:
        return self.halt and self.first is not None

    def push(self, forces: np.ndarray) -> list[list[Verdict]]:
        if self.done:
            return []
        q90 = self.features.push(forces)["q90"]
        if not len(q90):
            return []
        return self.push_batches(self.frames.push(q90))

    def push_batches(self, seconds: Iterable[tuple[DiffBatch, ...]]) -> list[list[Verdict]]:
        out = []
        for group in seconds:
            if self.done:
                break
            self.seconds += 1
            suppress = in_blackout(self.cfg, group[0].second)
            verdicts = [det.evaluate(b, suppress) for det, b in zip(self.detectors, group)]
            if any(v.status not in (NOT_READY, BLACKOUT) for v in verdicts):
                self.ready_seen = True
            if self.first is None:
                # channel order breaks ties within one second
                self.first = next((v for v in verdicts if v.status == ANOMALOUS), None)
            out.append(verdicts)
        return out

    @property
    def result(self) -> DetectionResult:
        v = self.first
        if v is not None:
            return DetectionResult(self.run_id, float(v.second), v.channel, v.second, v.values, DETECTED)
        status = NO_ANOMALY if self.ready_seen else INSUFFICIENT
        return DetectionResult(self.run_id, None, None, None, (), status)


def as_blocks(source, stream: StreamConfig | None = None) -> Iterator[np.ndarray]:
    """Normalize a path, an array, a block iterable or a sample iterable to ``(n, 4)`` blocks."""
    if isinstance(source, (str, Path)):
        yield from read_blocks(source, stream)
        return
    if isinstance(source, np.ndarray):
        yield np.atleast_2d(source)
        return
    it = iter(source)
    first = next(it, None)
    if first is None:
        return
    if isinstance(first, ForceSample) or np.ndim(first) == 1:
        def samples():
            yield first
            yield from it
        yield from samples_to_blocks(samples(), (stream or StreamConfig()).working_rate)
        return
    yield np.asarray(first, dtype=float)
    for block in it:
        yield np.asarray(block, dtype=float)


def monitor_run(
    source,
    cfg: DetectorConfig,
    stream: StreamConfig | None = None,
    run_id=None,
    verdict_log: list | None = None,
) -> DetectionResult:
    """Stream one run through the detector and stop at the first anomaly.

    ``verdict_log``, when given, receives every verdict in order.
    """
    mon = RunMonitor(cfg, stream, run_id)
    try:
        for block in as_blocks(source, mon.stream):
            for verdicts in mon.push(block[:, 1:]):
                if verdict_log is not None:
                    verdict_log.extend(verdicts)
            if mon.done:
                break
    except WearguardError as exc:
        exc.args = (f"run {run_id}: {exc}",) + exc.args[1:]
        raise
    return mon.result


def prepare_batches(source, cfg: DetectorConfig, stream: StreamConfig | None = None) -> list[tuple[DiffBatch, ...]]:
    """Every second's batches for a run, independent of omega, method and scheme.

    Only ``mode``, ``diff``, ``channels`` and ``batch_len`` of ``cfg`` matter,
    so one preparation serves a whole weight sweep.
    """
    stream = stream or StreamConfig(batch_len=cfg.batch_len)
    features = FeatureExtractor(stream.window_len)
    frames = FramePipeline(cfg)
    out: list[tuple[DiffBatch, ...]] = []
    for block in as_blocks(source, stream):
        q90 = features.push(block[:, 1:])["q90"]
        if len(q90):
            out.extend(frames.push(q90))
    return out


def scan_batches(batches: list[tuple[DiffBatch, ...]], cfg: DetectorConfig, run_id=None) -> DetectionResult:
    """Run the detector over prepared batches; same verdicts as :func:`monitor_run`."""
    channels = pipeline_channels(cfg)
    if batches and tuple(b.channel for b in batches[0]) != channels:
        raise WearguardError("prepared batches were built for different channels")
    mon = RunMonitor(cfg, StreamConfig(batch_len=cfg.batch_len), run_id)
    mon.push_batches(batches)
    return mon.result


@dataclass
class VerdictEvent:
    run: object
    verdict: Verdict

    def record(self) -> dict:
        v = self.verdict
        stats = list(v.values) + [None] * (4 - len(v.values))
        row = {
            "run": self.run, "second": v.second, "channel": v.channel, "gate": v.gate,
            "verdict": v.status, "n": v.n, "mean_abs": v.mean_abs, "var": v.var,
        }
        row.update({f"stat{i}": s for i, s in enumerate(stats, start=1)})
        return row


@dataclass
class WarningEvent:
    run: object
    t_hat: float
    channel: str
    method: str
    omega: float
    values: tuple[float, ...]

    def record(self) -> dict:
        return {"run": self.run, "t_hat": self.t_hat, "channel": self.channel, "method": self.method, "omega": self.omega}


@dataclass
class TimeoutEvent:
    run: object
    waited_s: float


@dataclass
class EndEvent:
    result: DetectionResult


_DONE = object()


def _threaded(blocks: Iterator[np.ndarray], maxsize: int = 64) -> "queue.Queue":
    q: queue.Queue = queue.Queue(maxsize)

    def pump():
        try:
            for b in blocks:
                q.put(b)
        except BaseException as exc:  # surfaced in the consumer thread
            q.put(exc)
        q.put(_DONE)

    threading.Thread(target=pump, daemon=True).start()
    return q


def monitor_live(
    source,
    cfg: DetectorConfig,
    stream: StreamConfig | None = None,
    run_id=None,
    halt: bool = True,
    timeout: float | None = None,
) -> Iterator[VerdictEvent | WarningEvent | TimeoutEvent | EndEvent]:
    """Yield one verdict event per channel per second as data arrives.

    The first anomaly also yields a :class:`WarningEvent`; with ``halt`` the
    stream then ends, otherwise later anomalies keep being flagged. If
    ``timeout`` is set and the source delivers nothing for that long, a
    :class:`TimeoutEvent` is yielded and monitoring stops. The final event is
    always an :class:`EndEvent` carrying the :class:`DetectionResult`.
    """
    mon = RunMonitor(cfg, stream, run_id, halt=halt)
    blocks = as_blocks(source, mon.stream)
    q = _threaded(blocks) if timeout is not None else None
    warned = False
    while not mon.done:
        if q is None:
            block = next(blocks, _DONE)
        else:
            try:
                block = q.get(timeout=timeout)
            except queue.Empty:
                yield TimeoutEvent(run_id, timeout)
                break
        if block is _DONE:
            break
        if isinstance(block, BaseException):
            raise block
        for verdicts in mon.push(block[:, 1:]):
            for v in verdicts:
                yield VerdictEvent(run_id, v)
            fired = next((v for v in verdicts if v.status == ANOMALOUS), None)
            if fired is not None and (not warned or not halt):
                warned = True
                yield WarningEvent(run_id, float(fired.second), fired.channel, cfg.method, cfg.omega, fired.values)
    yield EndEvent(mon.result)


def verdict_rows(run_id, verdicts: Iterable[Verdict]) -> list[dict]:
    return [VerdictEvent(run_id, v).record() for v in verdicts]


__all__ = [
    "DETECTED", "NO_ANOMALY", "INSUFFICIENT", "DetectionResult", "RunMonitor", "monitor_run",
    "monitor_live", "prepare_batches", "scan_batches", "as_blocks",
]
