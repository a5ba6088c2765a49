"""Per-batch decision rules and the gate that precedes them.

Every second a batch of ``batch_len`` differences is checked against the
statistics of previously accepted differences. Quiet batches (small
differences and small force) skip the tests. Batches that pass the gate are
tested with one of three rule sets:

* SPC: moving-range limits ``(1.128 + k*omega*0.8525) * mean_abs / 1.128`` for
  the 1st, 2nd, 4th and 6th largest absolute difference at k = 3, 2, 1, 0.
* CHI2: squared standardized distance of the extreme difference against
  ``(3*omega)**2`` (two further rules are available but off by default).
* GESD: a weighted generalized-ESD critical value for the 1st, 2nd and 4th
  extreme, using t quantiles at Bonferroni-style significance ``(1-P(k))/n``.

Anomalous batches never enter the statistics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from wearguard.errors import ConfigError
from wearguard.ingest import CHANNELS
from wearguard.stats import RunningStats
from wearguard.tdist import normal_coverage, t_isf
from wearguard.transforms import DIFF_KINDS, DiffBatch

METHODS = ("SPC", "CHI2", "GESD")
SCHEMES = ("RO", "RW")
MODES = ("univariate", "multivariate")

D2 = 1.128
HARTER_FACTOR = 0.8525

SPC_RULES = ((1, 3), (2, 2), (4, 1), (6, 0))  # (rank, sigma multiple)
CHI2_RULES = ((1, 3), (2, 2), (4, 1))
GESD_RULES = ((1, 3, 2), (2, 2, 3), (4, 1, 5))  # (rank, sigma multiple, df offset)

CLEAN, ANOMALOUS, NOT_READY, BLACKOUT = "clean", "anomalous", "not_ready", "blackout"


@dataclass(frozen=True)
class DetectorConfig:
    method: str = "SPC"
    omega: float = 1.0
    scheme: str = "RO"
    window_s: float = 60.0
    diff: str = "FOD"
    mode: str = "multivariate"
    gate_d: float = 0.05
    gate_f: float = 0.5
    warmup_batches: int = 5
    batch_len: int = 10
    spc_rules: tuple[bool, ...] = (True, True, True, True)
    chi2_rules: tuple[bool, ...] = (True, False, False)
    variance_denominator: str = "n"
    channels: tuple[str, ...] = CHANNELS
    blackout_s: float = 0.0
    pass_starts: tuple[float, ...] = field(default=())

    def __post_init__(self):
        norm = {
            "method": self.method.upper(),
            "scheme": self.scheme.upper(),
            "diff": self.diff.upper(),
            "mode": {"U": "univariate", "M": "multivariate"}.get(self.mode.upper(), self.mode.lower()),
            "spc_rules": tuple(bool(x) for x in self.spc_rules),
            "chi2_rules": tuple(bool(x) for x in self.chi2_rules),
            "channels": tuple(c.lower() for c in self.channels),
            "pass_starts": tuple(float(x) for x in self.pass_starts),
        }
        for k, v in norm.items():
            object.__setattr__(self, k, v)
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown scheme {self.scheme!r}")
        if self.diff not in DIFF_KINDS:
            raise ConfigError(f"unknown diff {self.diff!r}")
        if self.mode not in MODES:
            raise ConfigError(f"unknown mode {self.mode!r}")
        if self.method == "GESD" and self.scheme == "RO":
            raise ConfigError("the GESD test needs a rolling window; it does not run under RO")
        if not self.omega > 0 or not math.isfinite(self.omega):
            raise ConfigError("omega must be a positive number")
        if self.scheme == "RW" and self.window_s * self.batch_len < 1:
            raise ConfigError("rolling window must hold at least one value")
        if self.warmup_batches < 0 or self.batch_len <= 0:
            raise ConfigError("warmup_batches must be >= 0 and batch_len > 0")
        if len(self.spc_rules) != 4 or not any(self.spc_rules):
            raise ConfigError("spc_rules needs four flags, at least one enabled")
        if len(self.chi2_rules) != 3 or not any(self.chi2_rules):
            raise ConfigError("chi2_rules needs three flags, at least one enabled")
        if self.variance_denominator not in ("n", "n-1"):
            raise ConfigError("variance_denominator must be 'n' or 'n-1'")
        unknown = set(self.channels) - set(CHANNELS)
        if unknown or not self.channels:
            raise ConfigError(f"channels must be a non-empty subset of {CHANNELS}")

    def with_(self, **changes) -> "DetectorConfig":
        return replace(self, **changes)

    def new_stats(self) -> RunningStats:
        ddof = 0 if self.variance_denominator == "n" else 1
        if self.scheme == "RO":
            return RunningStats(None, ddof)
        return RunningStats.rolling_window(self.window_s, self.batch_len, ddof)

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass
class TestOutcome:
    status: str
    values: tuple[float, ...] = ()

    @property
    def anomalous(self) -> bool:
        return self.status == ANOMALOUS


@dataclass
class Verdict:
    second: int
    channel: str
    gate: bool
    status: str
    values: tuple[float, ...]
    n: int
    mean_abs: float
    var: float

    @property
    def anomalous(self) -> bool:
        return self.status == ANOMALOUS


def ranked(d, r: int) -> float:
    """Signed entry with the r-th largest absolute value (r counts from 1)."""
    d = np.asarray(d, dtype=float)
    order = np.argsort(-np.abs(d), kind="stable")
    return float(d[order[r - 1]])


def gate(batch: DiffBatch, cfg: DetectorConfig) -> bool:
    return bool(np.max(np.abs(batch.d)) > cfg.gate_d or np.max(np.abs(batch.f)) > cfg.gate_f)


def spc_limit(mean_abs: float, omega: float, k: int) -> float:
    return (D2 + k * omega * HARTER_FACTOR) * mean_abs / D2


def spc_test(batch, stats: RunningStats, omega: float, rules=(True, True, True, True)) -> TestOutcome:
    if stats.n == 0:
        return TestOutcome(NOT_READY)
    mags = np.sort(np.abs(np.asarray(getattr(batch, "d", batch), dtype=float)))[::-1]
    values = tuple(float(mags[r - 1]) for r, _ in SPC_RULES)
    hit = all(
        v > spc_limit(stats.mean_abs, omega, k)
        for v, (_, k), on in zip(values, SPC_RULES, rules) if on
    )
    return TestOutcome(ANOMALOUS if hit else CLEAN, values)


def chi2_test(batch, stats: RunningStats, omega: float, rules=(True, False, False)) -> TestOutcome:
    var = stats.var
    if stats.n == 0 or var <= 0:
        return TestOutcome(NOT_READY)
    d = getattr(batch, "d", batch)
    values = tuple((stats.mean - ranked(d, r)) ** 2 / var for r, _ in CHI2_RULES)
    hit = all(v > (k * omega) ** 2 for v, (_, k), on in zip(values, CHI2_RULES, rules) if on)
    return TestOutcome(ANOMALOUS if hit else CLEAN, values)


def gesd_critical(n: int, n_r: int, k: int, omega: float, sd: float) -> float:
    """Weighted GESD critical deviation for one rule."""
    p = (1.0 - normal_coverage(k)) / n
    t = t_isf(p, float(n_r))
    wt2 = (omega * t) ** 2
    return (n_r + 1) / math.sqrt(n_r + 2) * math.sqrt(wt2 / (n_r + wt2)) * sd


def gesd_test(batch, stats: RunningStats, omega: float) -> TestOutcome:
    n = stats.n
    if n - GESD_RULES[-1][2] < 1:
        return TestOutcome(NOT_READY)
    d = getattr(batch, "d", batch)
    sd = stats.sd
    values = tuple(abs(ranked(d, r) - stats.mean) for r, _, _ in GESD_RULES)
    hit = all(
        v > gesd_critical(n, n - off, k, omega, sd)
        for v, (_, k, off) in zip(values, GESD_RULES)
    )
    return TestOutcome(ANOMALOUS if hit else CLEAN, values)


def run_test(batch, stats: RunningStats, cfg: DetectorConfig, omega: float | None = None) -> TestOutcome:
    omega = cfg.omega if omega is None else omega
    if cfg.method == "SPC":
        return spc_test(batch, stats, omega, cfg.spc_rules)
    if cfg.method == "CHI2":
        return chi2_test(batch, stats, omega, cfg.chi2_rules)
    return gesd_test(batch, stats, omega)


def evaluate_batch(batch: DiffBatch, stats: RunningStats, cfg: DetectorConfig, ready: bool = True) -> Verdict:
    """Gate, test and (unless anomalous) fold the batch into ``stats`` in place."""
    g = gate(batch, cfg)
    if not ready:
        outcome = TestOutcome(NOT_READY)
    elif not g:
        outcome = TestOutcome(CLEAN)
    else:
        outcome = run_test(batch, stats, cfg)
    verdict = Verdict(
        batch.second, batch.channel, g, outcome.status, outcome.values,
        stats.n, stats.mean_abs, stats.var,
    )
    if not outcome.anomalous:
        stats.extend(batch.d)
    return verdict


class Detector:
    """One channel's detector state: running statistics plus warm-up count."""

    def __init__(self, cfg: DetectorConfig, channel: str = "fused"):
        self.cfg = cfg
        self.channel = channel
        self.stats = cfg.new_stats()
        self.batches_seen = 0

    def evaluate(self, batch: DiffBatch, suppress: bool = False) -> Verdict:
        self.batches_seen += 1
        if suppress:
            s = self.stats
            return Verdict(batch.second, batch.channel, gate(batch, self.cfg), BLACKOUT, (), s.n, s.mean_abs, s.var)
        return evaluate_batch(batch, self.stats, self.cfg, ready=self.batches_seen > self.cfg.warmup_batches)
