"""``wearguard`` command line.

Exit codes: 0 success, 2 data error, 3 config error, 4 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from wearguard import config as config_mod
from wearguard.config import CliConfig
from wearguard.detectors import DetectorConfig
from wearguard.errors import ConfigError, DataError, WearguardError
from wearguard.evaluation import (
    FAMILIES,
    BatchCache,
    DataDirLoader,
    default_grid,
    detect_all,
    evaluate_config,
    select_best,
    sweep_omega,
)
from wearguard.features import FeatureExtractor
from wearguard.ingest import RunRecord, load_run_table, replay_blocks
from wearguard.monitor import EndEvent, TimeoutEvent, VerdictEvent, WarningEvent, as_blocks, monitor_live
from wearguard.records import (
    RUN_SCORE_FIELDS,
    SWEEP_FIELDS,
    VERDICT_FIELDS,
    WARNING_FIELDS,
    write_atomic,
    write_csv,
)
from wearguard.synthetic import SyntheticLoader, write_run_csv

log = logging.getLogger("wearguard")

SELECTED_FILE = "selected.cfg"
FIG6_CONFIGS = (
    ("SPC", "RO", "FOD", "multivariate", 1.2),
    ("CHI2", "RW", "MSD", "multivariate", 0.8),
)

_OVERRIDE_FLAGS = {
    "data_dir": "--data-dir", "run_table": "--run-table", "output_dir": "--output-dir",
    "method": "--method", "omega": "--omega", "scheme": "--scheme", "window_s": "--window-s",
    "diff": "--diff", "mode": "--mode", "speedup": "--speedup", "grid": "--grid",
    "workers": "--workers", "log_level": "--log-level", "seed": "--seed",
}


def _loader(cfg: CliConfig):
    if cfg.synthetic:
        return SyntheticLoader(cfg.seed, cfg.stream)
    return DataDirLoader(cfg.data_dir, cfg.run_file_pattern, cfg.stream)


def _runs(cfg: CliConfig) -> list[RunRecord]:
    return load_run_table(cfg.run_table_path)


def _find_run(runs: list[RunRecord], run_id: int) -> RunRecord:
    for r in runs:
        if r.run_id == run_id:
            return r
    raise DataError(f"unknown run id {run_id}")


def _require_runs(cfg: CliConfig, runs: list[RunRecord]) -> None:
    if cfg.synthetic:
        return
    missing = DataDirLoader(cfg.data_dir, cfg.run_file_pattern).missing(runs)
    if missing:
        raise DataError(f"missing data files for runs {missing}")


def cmd_replay(cfg: CliConfig, run_id: int) -> int:
    runs = _runs(cfg)
    rec = _find_run(runs, run_id)
    _require_runs(cfg, [rec])
    source = _loader(cfg)(rec)
    blocks = replay_blocks(as_blocks(source, cfg.stream), cfg.speedup)
    verdicts, warnings, result = [], [], None
    for ev in monitor_live(blocks, cfg.detector, cfg.stream, run_id=rec.run_id, timeout=cfg.timeout_s):
        if isinstance(ev, VerdictEvent):
            verdicts.append(ev.record())
        elif isinstance(ev, WarningEvent):
            warnings.append(ev.record())
            log.warning("run %s: anomaly at t_hat=%s s on %s", rec.run_id, ev.t_hat, ev.channel)
        elif isinstance(ev, TimeoutEvent):
            log.error("run %s: source stalled for %s s", rec.run_id, ev.waited_s)
        elif isinstance(ev, EndEvent):
            result = ev.result
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"run{rec.run_id}_verdicts.csv", VERDICT_FIELDS, verdicts)
    write_csv(out / f"run{rec.run_id}_warnings.csv", WARNING_FIELDS, warnings)
    write_atomic(out / f"run{rec.run_id}_result.jsonl", result.to_json() + "\n")
    print(result.to_json())
    return 0


def _grid(cfg: CliConfig, mode: str) -> list[float]:
    return cfg.grid if cfg.grid is not None else default_grid(mode)


def cmd_train(cfg: CliConfig) -> int:
    runs = _runs(cfg)
    train = [r for r in runs if r.split == "train"]
    if not train:
        raise DataError("run table has no training runs")
    _require_runs(cfg, runs)
    det = cfg.detector
    DetectorConfig(**det.as_dict())  # re-validate the family before any run executes
    cache = BatchCache(_loader(cfg), cfg.stream, cfg.workers)
    table = sweep_omega(
        det.method, det.scheme, det.diff, det.mode, _grid(cfg, det.mode), runs, cache,
        base=det, splits=("train", "test", "broken"), delta_formula=cfg.delta_formula,
    )
    best = select_best(table, det)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / "sweep.csv", SWEEP_FIELDS, [r.record() for r in table])
    write_atomic(out / SELECTED_FILE, config_mod.detector_text(best))
    print(f"selected omega={best.omega!r} ({best.method} {best.scheme} {best.diff} {best.mode})")
    return 0


def _selected(cfg: CliConfig, path: str | None) -> DetectorConfig:
    p = Path(path) if path else cfg.output_dir / SELECTED_FILE
    if p.is_file():
        merged = config_mod.build(config_mod.read_config(p))
        return merged.detector
    if path:
        raise ConfigError(f"selected config {p} not found")
    return cfg.detector


def cmd_evaluate(cfg: CliConfig, split: str, selected: str | None = None) -> int:
    runs = _runs(cfg)
    chosen = runs if split == "all" else [r for r in runs if r.split == split]
    _require_runs(cfg, chosen)
    det = _selected(cfg, selected)
    cache = BatchCache(_loader(cfg), cfg.stream, cfg.workers)
    report = evaluate_config(det, chosen, detect_all(chosen, det, cache), cfg.delta_formula)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_csv(out / f"evaluate_{split}.csv", RUN_SCORE_FIELDS, [r.record() for r in report.rows])
    summary = {"config": {k: v for k, v in report.config.items()}}
    for s in ("train", "test", "broken"):
        summary[f"mean_{s}"] = report.mean(s)
    write_atomic(out / f"summary_{split}.json", json.dumps(summary, sort_keys=True, indent=2) + "\n")
    for s in ("train", "test", "broken"):
        m = report.mean(s)
        if m is not None:
            print(f"mean {s} score: {m:.4f}")
    return 0


def _export_fig5(cfg: CliConfig, runs) -> None:
    _require_runs(cfg, runs)
    cache = BatchCache(_loader(cfg), cfg.stream, cfg.workers)
    rows = []
    for method, scheme, diff, mode in FAMILIES:
        rows += sweep_omega(
            method, scheme, diff, mode, _grid(cfg, mode), runs, cache,
            base=cfg.detector, splits=("train", "test", "broken"), delta_formula=cfg.delta_formula,
        )
    write_csv(cfg.output_dir / "fig5.csv", SWEEP_FIELDS, [r.record() for r in rows])


def _export_fig6(cfg: CliConfig, runs) -> None:
    progressive = [r for r in runs if r.split in ("train", "test")]
    _require_runs(cfg, progressive)
    cache = BatchCache(_loader(cfg), cfg.stream, cfg.workers)
    rows = []
    for method, scheme, diff, mode, omega in FIG6_CONFIGS:
        det = cfg.detector.with_(method=method, scheme=scheme, diff=diff, mode=mode, omega=omega)
        report = evaluate_config(det, progressive, detect_all(progressive, det, cache), cfg.delta_formula)
        label = f"{method}/{diff}/{scheme}/{mode}/{omega!r}"
        for r in report.rows:
            rows.append({"config": label, **r.record()})
    write_csv(cfg.output_dir / "fig6.csv", ("config",) + RUN_SCORE_FIELDS, rows)


def _export_fig4(cfg: CliConfig, runs, run_id: int) -> None:
    rec = _find_run(runs, run_id)
    _require_runs(cfg, [rec])
    ext = FeatureExtractor(cfg.stream.window_len, metrics=("q90", "q10", "bandwidth"))
    w = cfg.stream.window_len
    raw_rows, sys_rows, q_rows = [], [], []
    offset = 0
    for block in as_blocks(_loader(cfg)(rec), cfg.stream):
        raw_rows.append(block)
        idx = np.arange(offset, offset + len(block))
        sys_rows.append(block[idx % w == 0])
        offset += len(block)
        out = ext.push(block[:, 1:])
        for i, j in enumerate(out["idx"].tolist()):
            q_rows.append(
                {"idx": j, "t": (j + 1) / cfg.stream.feature_rate}
                | {f"{m}_{c}": float(out[m][i, k]) for m in ("q90", "q10", "bandwidth") for k, c in enumerate("tfp")}
            )
    fields = ("t_s", "f_tangential_v", "f_feed_v", "f_thrust_v")
    for name, parts in (("fig4_raw.csv", raw_rows), ("fig4_systematic.csv", sys_rows)):
        arr = np.concatenate(parts) if parts else np.empty((0, 4))
        write_csv(cfg.output_dir / name, fields, [dict(zip(fields, row)) for row in arr.tolist()])
    qfields = ("idx", "t") + tuple(f"{m}_{c}" for m in ("q90", "q10", "bandwidth") for c in "tfp")
    write_csv(cfg.output_dir / "fig4_quantiles.csv", qfields, q_rows)


def cmd_export(cfg: CliConfig, what: str, run_id: int | None = None) -> int:
    runs = _runs(cfg)
    cfg.output_dir.mkdir(parents=True, exist_ok=True)
    if what == "fig5":
        _export_fig5(cfg, runs)
    elif what == "fig6":
        _export_fig6(cfg, runs)
    elif what == "fig4":
        _export_fig4(cfg, runs, run_id if run_id is not None else 20)
    else:
        raise ConfigError(f"unknown export target {what!r}")
    return 0


def cmd_synth(cfg: CliConfig, out_dir: str, run_ids: list[int] | None) -> int:
    runs = _runs(cfg)
    chosen = runs if not run_ids else [_find_run(runs, r) for r in run_ids]
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    loader = SyntheticLoader(cfg.seed, cfg.stream)
    for rec in chosen:
        write_run_csv(out / cfg.run_file_pattern.format(run=rec.run_id), loader(rec))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="flat key = value config file (default $WEARGUARD_CONFIG)")
    common.add_argument("--data-dir", help="directory of run CSV files, or 'synthetic'")
    common.add_argument("--run-table")
    common.add_argument("--output-dir")
    common.add_argument("--method", help="SPC, CHI2 or GESD")
    common.add_argument("--omega", help="rule weight")
    common.add_argument("--scheme", help="RO, RW or RW(seconds)")
    common.add_argument("--window-s")
    common.add_argument("--diff", help="FOD or MSD")
    common.add_argument("--mode", help="U|M (univariate or multivariate)")
    common.add_argument("--workers")
    common.add_argument("--seed", help="synthetic data seed")
    common.add_argument("--log-level")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any config key; repeatable")

    p = argparse.ArgumentParser(prog="wearguard", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("replay", parents=[common], help="stream one run through the detector")
    r.add_argument("--run", type=int, required=True)
    r.add_argument("--speedup", help="0 replays as fast as possible")

    t = sub.add_parser("train", parents=[common], help="sweep the weight and select the best")
    t.add_argument("--grid", help="a:b:step or comma list")

    e = sub.add_parser("evaluate", parents=[common], help="score a configuration on a split")
    e.add_argument("--split", choices=("train", "test", "broken", "all"), required=True)
    e.add_argument("--selected", help="selected config file (default OUTPUT_DIR/selected.cfg)")

    x = sub.add_parser("export", parents=[common], help="write plot-ready tables")
    x.add_argument("--what", required=True, help="fig4, fig5 or fig6")
    x.add_argument("--run", type=int)
    x.add_argument("--grid", help="a:b:step or comma list")

    s = sub.add_parser("synth", parents=[common], help="write synthetic run files")
    s.add_argument("--out", required=True)
    s.add_argument("--runs", help="comma list of run ids (default all)")
    return p


def _overrides(args) -> dict[str, str]:
    out = {}
    for key in _OVERRIDE_FLAGS:
        v = getattr(args, key, None)
        if v is not None:
            out[key] = str(v)
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        k, v = item.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = config_mod.load(args.config, _overrides(args))
        logging.basicConfig(level=cfg.log_level.upper(), format="%(levelname)s %(name)s: %(message)s")
        cfg.check_paths()
        if args.command == "replay":
            return cmd_replay(cfg, args.run)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.split, args.selected)
        if args.command == "export":
            return cmd_export(cfg, args.what, args.run)
        if args.command == "synth":
            try:
                ids = [int(x) for x in args.runs.split(",")] if args.runs else None
            except ValueError as exc:
                raise ConfigError(f"--runs expects a comma list of run ids, got {args.runs!r}") from exc
            return cmd_synth(cfg, args.out, ids)
    except WearguardError as exc:
        print(f"wearguard: {exc}", file=sys.stderr)
        return exc.exit_code
    except (FileNotFoundError, OSError) as exc:
        print(f"wearguard: {exc}", file=sys.stderr)
        return DataError.exit_code
    except Exception as exc:  # noqa: BLE001 - stable exit code for scripting
        print(f"wearguard: internal error: {exc!r}", file=sys.stderr)
        return 4
    return 4


if __name__ == "__main__":
    sys.exit(main())
