"""Scoring detections against reference wear times and tuning the weight.

A detection at ``t_hat`` is compared with the run's reference time ``t0`` as
a cutting distance ``delta = v * (t_hat - t0) / 60`` (metres, v in m/min).
The score is 1 within 5 m, falls quadratically and reaches 0 at 30 m.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from decimal import Decimal
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

from wearguard.detectors import METHODS, DetectorConfig
from wearguard.errors import ConfigError, ConsistencyError, DataError
from wearguard.ingest import RunRecord, StreamConfig
from wearguard.monitor import DETECTED, DetectionResult, prepare_batches, scan_batches

PLATEAU_M = 5.0
ZERO_M = 30.0
DELTA_FORMULAS = ("consistent", "printed")


def delta(t_hat: float, rec: RunRecord, formula: str = "consistent") -> float:
    """Cutting-distance error in metres; positive means the warning came late.

    ``formula="printed"`` evaluates ``60 * (t_hat - t0) / v`` instead, kept
    only for comparison since it does not yield metres.
    """
    dt = t_hat - rec.t0
    if formula == "consistent":
        return rec.v * dt / 60.0
    if formula == "printed":
        return 60.0 * dt / rec.v
    raise ConfigError(f"unknown delta formula {formula!r}")


def score(delta_m: float) -> float:
    a = abs(delta_m)
    if a <= PLATEAU_M:
        return 1.0
    return max(0.0, 1.0 - (a - PLATEAU_M) ** 2 / (ZERO_M - PLATEAU_M) ** 2)


@dataclass
class RunScore:
    run_id: int
    split: str
    v: float
    t0: float
    t_hat: float | None
    delta_m: float | None
    score: float

    def record(self) -> dict:
        return {
            "run": self.run_id, "v": self.v, "t0": self.t0, "t_hat": self.t_hat,
            "delta_m": self.delta_m, "score": self.score, "split": self.split,
        }


def _mean(xs: Sequence[float]) -> float | None:
    return sum(xs) / len(xs) if xs else None


@dataclass
class ScoreReport:
    rows: list[RunScore]
    config: dict = field(default_factory=dict)

    def mean(self, split: str) -> float | None:
        return _mean([r.score for r in self.rows if r.split == split])

    @property
    def mean_train(self):
        return self.mean("train")

    @property
    def mean_test(self):
        return self.mean("test")

    @property
    def mean_broken(self):
        return self.mean("broken")


def evaluate_config(
    cfg: DetectorConfig | None,
    runs: Iterable[RunRecord],
    detections: Mapping[int, DetectionResult],
    delta_formula: str = "consistent",
) -> ScoreReport:
    """Score one detection per run. Runs without a detection score 0."""
    runs = list(runs)
    known = {r.run_id for r in runs}
    unknown = sorted(set(detections) - known)
    if unknown:
        raise ConsistencyError(f"detections for unknown runs: {unknown}")
    rows = []
    for rec in runs:
        det = detections.get(rec.run_id)
        if det is None:
            raise ConsistencyError(f"no detection for run {rec.run_id}")
        if det.status == DETECTED:
            dm = delta(det.t_hat, rec, delta_formula)
            rows.append(RunScore(rec.run_id, rec.split, rec.v, rec.t0, det.t_hat, dm, score(dm)))
        else:
            rows.append(RunScore(rec.run_id, rec.split, rec.v, rec.t0, None, None, 0.0))
    echo = {}
    if cfg is not None:
        echo = {k: getattr(cfg, k) for k in ("method", "omega", "scheme", "diff", "mode")}
    return ScoreReport(rows, echo)


def omega_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid built in decimal arithmetic, so shared points compare equal."""
    a, b, s = (Decimal(str(x)) for x in (start, stop, step))
    if s <= 0 or b < a:
        raise ConfigError("grid needs start <= stop and a positive step")
    n = int((b - a) / s)
    return [float(a + i * s) for i in range(n + 1)]


def default_grid(mode: str) -> list[float]:
    """0.8..3.0 by 0.1 univariate; the same grid halved for fused streams."""
    grid = omega_grid(0.8, 3.0, 0.1)
    if mode == "multivariate":
        return [float(Decimal(str(w)) / 2) for w in grid]
    return grid


@dataclass(frozen=True)
class SweepRow:
    method: str
    scheme: str
    diff: str
    mode: str
    omega: float
    mean_train: float | None
    mean_test: float | None = None
    mean_broken: float | None = None

    def record(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


RunLoader = Callable[[RunRecord], object]


class DataDirLoader:
    """Resolves a run to ``data_dir / pattern.format(run=N)``."""

    def __init__(self, data_dir, pattern: str = "run{run}.csv", stream: StreamConfig | None = None):
        self.data_dir = Path(data_dir)
        self.pattern = pattern
        self.stream = stream

    def path(self, rec: RunRecord) -> Path:
        return self.data_dir / self.pattern.format(run=rec.run_id)

    def missing(self, runs: Iterable[RunRecord]) -> list[int]:
        return [r.run_id for r in runs if not self.path(r).is_file()]

    def __call__(self, rec: RunRecord):
        p = self.path(rec)
        if not p.is_file():
            raise DataError(f"run {rec.run_id}: data file {p} not found")
        return p


def _prepare(args):
    loader, rec, cfg, stream = args
    return rec.run_id, prepare_batches(loader(rec), cfg, stream)


class BatchCache:
    """Prepared batches per (run, mode, diff, channels); reused across weights and methods."""

    def __init__(self, loader: RunLoader, stream: StreamConfig | None = None, workers: int = 1):
        self.loader = loader
        self.stream = stream
        self.workers = workers
        self._store: dict = {}

    def _key(self, rec: RunRecord, cfg: DetectorConfig):
        return (rec.run_id, cfg.mode, cfg.diff, cfg.channels if cfg.mode == "univariate" else (), cfg.batch_len)

    def get(self, runs: Sequence[RunRecord], cfg: DetectorConfig) -> dict[int, list]:
        todo = [r for r in runs if self._key(r, cfg) not in self._store]
        if todo:
            jobs = [(self.loader, r, cfg, self.stream) for r in todo]
            if self.workers > 1 and len(jobs) > 1:
                with ProcessPoolExecutor(self.workers) as ex:
                    results = list(ex.map(_prepare, jobs))
            else:
                results = [_prepare(j) for j in jobs]
            by_id = dict(results)
            for r in todo:
                self._store[self._key(r, cfg)] = by_id[r.run_id]
        return {r.run_id: self._store[self._key(r, cfg)] for r in runs}


def detect_all(runs: Sequence[RunRecord], cfg: DetectorConfig, cache: BatchCache) -> dict[int, DetectionResult]:
    prepared = cache.get(runs, cfg)
    return {r.run_id: scan_batches(prepared[r.run_id], cfg, r.run_id) for r in runs}


def sweep_omega(
    method: str,
    scheme: str,
    diff: str,
    mode: str,
    grid: Sequence[float],
    runs: Sequence[RunRecord],
    loader: RunLoader | BatchCache,
    base: DetectorConfig | None = None,
    splits: Sequence[str] = ("train",),
    delta_formula: str = "consistent",
) -> list[SweepRow]:
    """Mean score per weight; one row per grid point, in grid order."""
    if not grid:
        raise ConfigError("empty weight grid")
    base = base or DetectorConfig()
    # constructing every config up front rejects GESD under RO before any run executes
    cfgs = [base.with_(method=method, scheme=scheme, diff=diff, mode=mode, omega=float(w)) for w in grid]
    cache = loader if isinstance(loader, BatchCache) else BatchCache(loader)
    chosen = [r for r in runs if r.split in splits]
    rows = []
    for cfg in cfgs:
        report = evaluate_config(cfg, chosen, detect_all(chosen, cfg, cache), delta_formula)
        rows.append(
            SweepRow(
                cfg.method, cfg.scheme, cfg.diff, cfg.mode, cfg.omega,
                report.mean("train") if "train" in splits else None,
                report.mean("test") if "test" in splits else None,
                report.mean("broken") if "broken" in splits else None,
            )
        )
    return rows


def select_best(table: Sequence[SweepRow], base: DetectorConfig | None = None) -> DetectorConfig:
    """Highest mean training score; ties prefer the smaller weight, then SPC < CHI2 < GESD.

    Only ``mean_train`` is read.
    """
    if not table:
        raise ConfigError("empty sweep table")

    def key(row: SweepRow):
        train = row.mean_train
        return (-(train if train is not None else -math.inf), row.omega, METHODS.index(row.method))

    best = min(table, key=key)
    base = base or DetectorConfig()
    return base.with_(method=best.method, scheme=best.scheme, diff=best.diff, mode=best.mode, omega=best.omega)


FAMILIES = tuple(
    (method, scheme, diff, mode)
    for mode in ("univariate", "multivariate")
    for method in METHODS
    for scheme in ("RO", "RW")
    for diff in ("FOD", "MSD")
    if not (method == "GESD" and scheme == "RO")
)
