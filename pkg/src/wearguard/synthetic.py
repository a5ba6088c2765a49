"""Generated force data for demos, tests and the offline harness.

``synthetic_run`` imitates one run of the turning experiment: three force
channels whose level drifts slowly with wear, plus chatter bursts that start
near the run's reference time and grow more frequent afterwards. Fracture
runs add an abrupt level step at onset. Runs 8 and 15 carry a pass restart
transient well before onset. Everything is seeded per run.
"""

from __future__ import annotations

from typing import Iterator

import numpy as np

from wearguard.ingest import RunRecord, StreamConfig

BASE_LEVELS = (1.0, 0.6, 0.4)  # volts at feed 40 um/rev
RESTART_RUNS = {8: 0.6, 15: 0.75}  # run -> restart time as a fraction of t0


def quiet_run(
    seconds: float,
    stream: StreamConfig | None = None,
    levels=(0.3, 0.2, 0.1),
    noise: float = 0.002,
    seed: int = 0,
) -> np.ndarray:
    """Stationary low-noise run as one ``(n, 4)`` array with a time column."""
    stream = stream or StreamConfig()
    n = int(round(seconds * stream.working_rate))
    rng = np.random.default_rng(seed)
    out = np.empty((n, 4))
    out[:, 0] = np.arange(n) / stream.working_rate
    out[:, 1:] = np.asarray(levels) + noise * rng.standard_normal((n, 3))
    return out


def add_burst(
    arr: np.ndarray,
    start_s: float,
    amplitude: float,
    duration_s: float = 1.0,
    stream: StreamConfig | None = None,
    channels=(0, 1, 2),
) -> np.ndarray:
    """Raise every other feature window in ``[start_s, start_s + duration_s)``.

    Works on positive-level signals, where adding ``amplitude`` to a window
    shifts its 90% quantile by exactly that much, so consecutive feature
    differences alternate between about ``+amplitude`` and ``-amplitude``.
    """
    stream = stream or StreamConfig()
    w = stream.window_len
    first = int(round(start_s * stream.feature_rate))
    count = int(round(duration_s * stream.feature_rate))
    for j in range(first, first + count, 2):
        rows = slice(j * w, (j + 1) * w)
        for c in channels:
            arr[rows, 1 + c] += amplitude
    return arr


def _onset(rec: RunRecord, rng: np.random.Generator) -> float:
    if rec.broken:
        return rec.t0
    # reference times carry roughly +-10 m of cutting-distance uncertainty
    jitter_m = rng.normal(0.0, 10.0)
    return float(np.clip(rec.t0 + 60.0 * jitter_m / rec.v, 1.0, rec.end_time))


def synthetic_run(
    rec: RunRecord,
    seed: int = 0,
    stream: StreamConfig | None = None,
    time_scale: float = 1.0,
) -> Iterator[np.ndarray]:
    """Yield one-second ``(working_rate, 4)`` blocks for a run.

    ``time_scale`` shrinks the run (reference and end times alike) for
    quick checks.
    """
    stream = stream or StreamConfig()
    rate, w = stream.working_rate, stream.window_len
    frames_per_s = stream.feature_rate
    rng = np.random.default_rng([seed, rec.run_id])
    end = rec.end_time * time_scale
    onset = _onset(rec, rng) * time_scale
    seconds = int(end)
    levels = np.asarray(BASE_LEVELS) * (rec.feed / 40.0) ** 0.8
    restart = RESTART_RUNS.get(rec.run_id)
    restart_s = None if restart is None else int(restart * rec.t0 * time_scale)
    spindle_hz = rec.v / (np.pi * 0.05) / 60.0 * 12  # tooth-pass-like carrier

    burst_left = 0
    for s in range(seconds):
        t = s + np.arange(rate) / rate
        wear = 1.0 + 0.15 * s / max(seconds, 1)
        frame_gain = 1.0 + 0.004 * rng.standard_normal((frames_per_s, 3))
        if rec.broken and s >= onset:
            frame_gain *= 1.3
        if s >= onset:
            rate_bursts = 0.15 * (1.0 + (s - onset) / 10.0)
            if burst_left == 0 and rng.random() < min(rate_bursts, 0.9):
                burst_left = int(rng.integers(1, 3))
        if burst_left:
            amp = rng.uniform(0.08, 0.2)
            frame_gain[::2] += amp
            burst_left -= 1
        if restart_s is not None and s == restart_s:
            frame_gain[:5] *= 0.2
        gain = np.repeat(frame_gain, w, axis=0)
        carrier = 1.0 + 0.1 * np.sin(2 * np.pi * spindle_hz * t)
        block = np.empty((rate, 4))
        block[:, 0] = t
        block[:, 1:] = (levels * wear) * gain * carrier[:, None]
        block[:, 1:] += 0.02 * levels * rng.standard_normal((rate, 3))
        yield block


class SyntheticLoader:
    """Run loader producing :func:`synthetic_run` streams; picklable for worker pools."""

    def __init__(self, seed: int = 0, stream: StreamConfig | None = None, time_scale: float = 1.0):
        self.seed = seed
        self.stream = stream
        self.time_scale = time_scale

    def __call__(self, rec: RunRecord):
        return synthetic_run(rec, self.seed, self.stream, self.time_scale)


def write_run_csv(path, blocks, header: bool = True) -> None:
    """Write blocks in the force-file format."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        if header:
            fh.write("t_s,f_tangential_v,f_feed_v,f_thrust_v\n")
        for block in blocks:
            np.savetxt(fh, block, delimiter=",", fmt="%.10g")
