import numpy as np
import pytest

from wearguard.errors import ConfigError, DecodeError, StreamIntegrityError
from wearguard.ingest import (
    ForceSample, StreamConfig, load_run_table, open_run, read_blocks, replay, replay_blocks,
    samples_to_blocks,
)


def write(path, rows, header="t_s,f_tangential_v,f_feed_v,f_thrust_v"):
    lines = [header] if header else []
    lines += [",".join(str(v) for v in r) for r in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_run_table_splits():
    runs = load_run_table()
    assert len(runs) == 21
    by_split = {}
    for r in runs:
        by_split.setdefault(r.split, []).append(r.run_id)
    assert by_split["broken"] == [5, 9, 13, 17, 21]
    assert by_split["test"] == [6, 7, 14, 20]
    assert len(by_split["train"]) == 12
    assert all(r.broken == (r.split == "broken") for r in runs)


def test_run_table_row_values():
    r1 = next(r for r in load_run_table() if r.run_id == 1)
    assert (r1.v, r1.feed, r1.t0) == (40.0, 40.0, 86.9)
    assert r1.t0 > 0 and r1.end_time > r1.t0


def test_stream_config_rates():
    assert StreamConfig().stride == 1
    assert StreamConfig(input_rate=7000).stride == 2
    with pytest.raises(ConfigError):
        StreamConfig(input_rate=5000).stride
    with pytest.raises(ConfigError):
        StreamConfig(working_rate=3000)


def test_read_blocks_with_header(tmp_path):
    rows = [(i / 10, i, -i, 2 * i) for i in range(25)]
    p = write(tmp_path / "a.csv", rows)
    blocks = list(read_blocks(p, StreamConfig(working_rate=10, window_len=1), block_rows=7))
    arr = np.vstack(blocks)
    assert [len(b) for b in blocks] == [7, 7, 7, 4]
    np.testing.assert_array_equal(arr, np.asarray(rows, dtype=float))


def test_read_blocks_headerless_three_columns(tmp_path):
    p = write(tmp_path / "a.csv", [(1, 2, 3), (4, 5, 6)], header=None)
    arr = np.vstack(list(read_blocks(p, StreamConfig(working_rate=10, window_len=1))))
    np.testing.assert_allclose(arr[:, 0], [0.0, 0.1])
    np.testing.assert_array_equal(arr[:, 1:], [[1, 2, 3], [4, 5, 6]])


def test_read_blocks_column_mapping(tmp_path):
    p = write(tmp_path / "a.csv", [(9, 0.0, 3, 1, 2), (9, 0.5, 6, 4, 5)], header="x,t,c,a,b")
    cfg = StreamConfig(working_rate=10, window_len=1,
                       columns=("skip", "t_s", "f_thrust_v", "f_tangential_v", "f_feed_v"))
    arr = np.vstack(list(read_blocks(p, cfg)))
    np.testing.assert_array_equal(arr, [[0.0, 1, 2, 3], [0.5, 4, 5, 6]])


def test_decimation_independent_of_block_size(tmp_path):
    rows = [(i / 20, i, i, i) for i in range(53)]
    p = write(tmp_path / "a.csv", rows)
    cfg = StreamConfig(input_rate=20, working_rate=10, window_len=1)
    a = np.vstack(list(read_blocks(p, cfg, block_rows=5)))
    b = np.vstack(list(read_blocks(p, cfg, block_rows=1000)))
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(a[:, 1], np.arange(0, 53, 2))


def test_malformed_row_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("t_s,f_tangential_v,f_feed_v,f_thrust_v\n0,1,2,3\n0.1,x,2,3\n")
    with pytest.raises(DecodeError) as info:
        list(read_blocks(p, StreamConfig(working_rate=10, window_len=1)))
    assert info.value.line == 3


def test_backwards_timestamp(tmp_path):
    p = write(tmp_path / "a.csv", [(0.0, 1, 1, 1), (0.2, 1, 1, 1), (0.1, 1, 1, 1)])
    with pytest.raises(StreamIntegrityError):
        list(read_blocks(p, StreamConfig(working_rate=10, window_len=1), block_rows=2))


def test_open_run_samples(tmp_path):
    p = write(tmp_path / "a.csv", [(0.0, 1, 2, 3)])
    assert list(open_run(p, StreamConfig(working_rate=10, window_len=1))) == [ForceSample(0.0, 1, 2, 3)]


def test_samples_to_blocks_regroups():
    samples = [ForceSample(i, i, i, i) for i in range(7)]
    assert [len(b) for b in samples_to_blocks(samples, 3)] == [3, 3, 1]


class FakeClock:
    def __init__(self):
        self.now = 0.0
        self.sleeps = []

    def clock(self):
        return self.now

    def sleep(self, dt):
        self.sleeps.append(dt)
        self.now += dt


def test_replay_paces_by_timestamp():
    fc = FakeClock()
    samples = [ForceSample(t, 0, 0, 0) for t in (0.0, 1.0, 2.0, 4.0)]
    out = list(replay(samples, 2.0, clock=fc.clock, sleep=fc.sleep))
    assert out == samples
    assert fc.now == pytest.approx(2.0)


def test_replay_zero_speedup_is_passthrough():
    fc = FakeClock()
    list(replay([ForceSample(5.0, 0, 0, 0)] * 3, 0, clock=fc.clock, sleep=fc.sleep))
    assert fc.sleeps == []


def test_replay_blocks_and_bad_speedup():
    fc = FakeClock()
    blocks = [np.array([[0.0, 0, 0, 0], [0.5, 0, 0, 0]]), np.array([[1.0, 0, 0, 0], [3.0, 0, 0, 0]])]
    list(replay_blocks(blocks, 1.0, clock=fc.clock, sleep=fc.sleep))
    assert fc.now == pytest.approx(3.0)
    with pytest.raises(ConfigError):
        list(replay([], -1))
