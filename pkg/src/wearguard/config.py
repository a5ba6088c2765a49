"""Flat ``key = value`` configuration files.

Lines starting with ``#`` and trailing ``# ...`` comments are ignored. Flags
given on the command line override file keys. Unknown keys are errors.
"""

from __future__ import annotations

import logging
import os
import re
from dataclasses import dataclass, field
from pathlib import Path

from wearguard.detectors import DetectorConfig
from wearguard.errors import ConfigError, DataError
from wearguard.evaluation import DELTA_FORMULAS, omega_grid
from wearguard.ingest import StreamConfig, default_run_table

ENV_VAR = "WEARGUARD_CONFIG"
SYNTHETIC = "synthetic"

_FLOAT = ("omega", "window_s", "gate_d", "gate_f", "blackout_s", "speedup")
_INT = ("warmup_batches", "batch_len", "workers", "input_rate", "working_rate", "window_len",
        "feature_rate", "seed", "timeout_s")
_STR = ("method", "scheme", "diff", "mode", "variance_denominator", "data_dir", "run_table",
        "output_dir", "log_level", "grid", "delta_formula", "run_file_pattern")
_FLAGS = ("spc_rules", "chi2_rules")
_LISTS = ("channels", "columns", "pass_starts")
KEYS = _FLOAT + _INT + _STR + _FLAGS + _LISTS

_DETECTOR_KEYS = ("method", "omega", "scheme", "window_s", "diff", "mode", "gate_d", "gate_f",
                  "warmup_batches", "batch_len", "spc_rules", "chi2_rules", "variance_denominator",
                  "channels", "blackout_s", "pass_starts")
_STREAM_KEYS = ("input_rate", "working_rate", "window_len", "feature_rate", "batch_len", "columns")


def parse_text(text: str, source: str = "<config>") -> dict[str, str]:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected key = value")
        key, value = (p.strip() for p in line.split("=", 1))
        out[key] = value
    return out


def read_config(path: str | Path) -> dict[str, str]:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file {path} not found")
    return parse_text(path.read_text(encoding="utf-8"), str(path))


def _flags(text: str) -> tuple[bool, ...]:
    parts = [p for p in re.split(r"[,\s]+", text) if p] if ("," in text or " " in text) else list(text)
    truth = {"1": True, "0": False, "true": True, "false": False, "on": True, "off": False}
    try:
        return tuple(truth[p.lower()] for p in parts)
    except KeyError as exc:
        raise ConfigError(f"bad rule flags {text!r}") from exc


def convert(key: str, value: str):
    if key not in KEYS:
        raise ConfigError(f"unknown config key {key!r}")
    try:
        if key in _FLOAT:
            return float(value)
        if key in _INT:
            return int(value)
    except ValueError as exc:
        raise ConfigError(f"{key}: {value!r} is not a number") from exc
    if key in _FLAGS:
        return _flags(value)
    if key in _LISTS:
        items = [p.strip() for p in value.split(",") if p.strip()]
        if key == "pass_starts":
            try:
                return tuple(float(p) for p in items)
            except ValueError as exc:
                raise ConfigError(f"pass_starts: {value!r}") from exc
        return tuple(items)
    if key == "scheme":
        # accepts RO, RW, RW60 and RW(60)
        m = re.fullmatch(r"(RO|RW)\(?(\d+(?:\.\d+)?)?\)?", value.strip(), re.IGNORECASE)
        if not m:
            raise ConfigError(f"bad scheme {value!r}")
        return (m.group(1).upper(), float(m.group(2)) if m.group(2) else None)
    return value


def parse_grid(spec: str) -> list[float]:
    """``a:b:step`` inclusive, or a comma list of weights."""
    try:
        if ":" in spec:
            a, b, s = (float(x) for x in spec.split(":"))
            return omega_grid(a, b, s)
        return [float(x) for x in spec.split(",") if x.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad grid {spec!r}") from exc


@dataclass
class CliConfig:
    detector: DetectorConfig = field(default_factory=DetectorConfig)
    stream: StreamConfig = field(default_factory=StreamConfig)
    data_dir: str = SYNTHETIC
    run_table: Path | None = None
    output_dir: Path = Path("wearguard_out")
    speedup: float = 0.0
    log_level: str = "WARNING"
    grid: list[float] | None = None
    delta_formula: str = "consistent"
    workers: int = 1
    run_file_pattern: str = "run{run}.csv"
    seed: int = 0
    timeout_s: int | None = None

    @property
    def synthetic(self) -> bool:
        return self.data_dir == SYNTHETIC

    @property
    def run_table_path(self) -> Path:
        return self.run_table or default_run_table()

    def check_paths(self) -> None:
        """Fail fast on paths that do not resolve."""
        if not self.synthetic and not Path(self.data_dir).is_dir():
            raise DataError(f"data directory {self.data_dir} not found")
        if not self.run_table_path.is_file():
            raise DataError(f"run table {self.run_table_path} not found")


def build(settings: dict[str, str]) -> CliConfig:
    values = {k: convert(k, v) for k, v in settings.items()}
    if "scheme" in values:
        scheme, window = values.pop("scheme")
        values["scheme"] = scheme
        if window is not None:
            values.setdefault("window_s", window)
    det = DetectorConfig(**{k: values[k] for k in _DETECTOR_KEYS if k in values})
    stream_kw = {k: values[k] for k in _STREAM_KEYS if k in values}
    stream = StreamConfig(**stream_kw)
    cfg = CliConfig(detector=det, stream=stream)
    for key in ("data_dir", "output_dir", "speedup", "log_level", "delta_formula", "workers",
                "run_file_pattern", "seed", "timeout_s"):
        if key in values:
            setattr(cfg, key, values[key])
    cfg.output_dir = Path(cfg.output_dir)
    if "run_table" in values:
        cfg.run_table = Path(values["run_table"])
    if "grid" in values:
        cfg.grid = parse_grid(values["grid"])
    if cfg.delta_formula not in DELTA_FORMULAS:
        raise ConfigError(f"delta_formula must be one of {DELTA_FORMULAS}")
    if cfg.speedup < 0:
        raise ConfigError("speedup must be >= 0")
    if cfg.workers < 1:
        raise ConfigError("workers must be >= 1")
    if not isinstance(logging.getLevelName(cfg.log_level.upper()), int):
        raise ConfigError(f"unknown log level {cfg.log_level!r}")
    return cfg


def load(path: str | Path | None = None, overrides: dict[str, str] | None = None) -> CliConfig:
    """File keys (explicit path, else ``$WEARGUARD_CONFIG``) overlaid with ``overrides``."""
    settings: dict[str, str] = {}
    path = path or os.environ.get(ENV_VAR)
    if path:
        settings.update(read_config(path))
    settings.update(overrides or {})
    return build(settings)


def detector_text(det: DetectorConfig) -> str:
    """Serialize detector keys in the same flat format."""
    lines = []
    for key in _DETECTOR_KEYS:
        v = getattr(det, key)
        if key in _FLAGS:
            text = "".join("1" if x else "0" for x in v)
        elif isinstance(v, tuple):
            text = ",".join(repr(x) if isinstance(x, float) else str(x) for x in v)
        elif isinstance(v, float):
            text = repr(v)
        else:
            text = str(v)
        lines.append(f"{key} = {text}")
    return "\n".join(lines) + "\n"
