import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wearguard.errors import ConfigError
from wearguard.stats import RunningStats

finite = st.floats(-1e3, 1e3, allow_nan=False)


def reference(vals, ddof=0):
    a = np.asarray(vals, dtype=float)
    return a.mean(), np.abs(a).mean(), a.var(ddof=ddof) if len(a) > ddof else 0.0


def test_empty():
    s = RunningStats()
    assert (s.n, s.mean, s.mean_abs, s.var, s.sd) == (0, 0.0, 0.0, 0.0, 0.0)


def test_known_values():
    s = RunningStats().extend([2, 4, 4, 4, 5, 5, 7, 9])
    assert (s.mean, s.var, s.sd) == (5.0, 4.0, 2.0)
    assert RunningStats(ddof=1).extend([1, 2, 3, 4]).var == pytest.approx(5 / 3)


def test_window_capacity_from_seconds():
    assert RunningStats.rolling_window(60, 10).capacity == 600
    assert RunningStats.rolling_window(60).scheme == "RW"
    with pytest.raises(ConfigError):
        RunningStats(0)


def test_values_only_for_rolling_window():
    with pytest.raises(ValueError):
        RunningStats().values()
    s = RunningStats(3).extend([1, 2, 3, 4, 5])
    assert s.values() == [3.0, 4.0, 5.0]


@settings(max_examples=200, deadline=None)
@given(st.lists(finite, min_size=1, max_size=300), st.integers(1, 50), st.sampled_from([0, 1]))
def test_window_matches_last_values(vals, cap, ddof):
    s = RunningStats(cap, ddof).extend(vals)
    tail = vals[-cap:]
    mean, mabs, var = reference(tail, ddof)
    assert s.n == len(tail)
    assert s.mean == pytest.approx(mean, rel=1e-9, abs=1e-9)
    assert s.mean_abs == pytest.approx(mabs, rel=1e-9, abs=1e-9)
    assert s.var == pytest.approx(var, rel=1e-9, abs=1e-7)


@settings(max_examples=100, deadline=None)
@given(st.lists(finite, min_size=1, max_size=300))
def test_rolling_origin_matches_all_values(vals):
    s = RunningStats().extend(vals)
    mean, mabs, var = reference(vals)
    assert s.mean == pytest.approx(mean, rel=1e-9, abs=1e-9)
    assert s.mean_abs == pytest.approx(mabs, rel=1e-9, abs=1e-9)
    assert s.var == pytest.approx(var, rel=1e-9, abs=1e-7)


def test_copy_is_independent():
    s = RunningStats(4).extend([1, 2, 3])
    c = s.copy()
    c.add(100)
    assert s.n == 3 and c.n == 4 and s.values() == [1.0, 2.0, 3.0]


def test_large_offset_stays_accurate():
    vals = 1e6 + np.random.default_rng(0).standard_normal(5000)
    s = RunningStats(600).extend(vals)
    assert math.isclose(s.var, np.var(vals[-600:]), rel_tol=1e-9)
