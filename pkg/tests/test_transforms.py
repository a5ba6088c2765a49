import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracle import offline_diffs
from wearguard.errors import InsufficientDataError
from wearguard.transforms import Batcher, DiffStream, batcher, fod, fuse_multivariate, msd

values = st.lists(st.floats(-100, 100), min_size=3, max_size=60)


def test_fod_and_msd_small():
    x = [1.0, 3.0, 2.0, 2.5]
    np.testing.assert_array_equal(fod(x), [2.0, -1.0, 0.5])
    # interior points: 3 -> back 2, fwd 1; 2 -> back -1, fwd -0.5
    np.testing.assert_array_equal(msd(x), [1.0, -0.5])


def test_msd_tie_takes_backward():
    assert msd([0.0, 1.0, 0.0])[0] == 1.0
    assert msd([2.0, 1.0, 0.0])[0] == -1.0


def test_too_short():
    with pytest.raises(InsufficientDataError):
        fod([1.0])
    with pytest.raises(InsufficientDataError):
        msd([1.0, 2.0])


def test_fused_distance_ignores_thrust():
    frames = np.array([[0.0, 0.0, 5.0], [3.0, 4.0, -9.0], [3.0, 4.0, 0.0]])
    pairs = list(fuse_multivariate(frames))
    assert pairs == [(5.0, 3.5), (0.0, 3.5)]


def test_fused_msd_is_min_of_norms():
    frames = np.array([[0.0, 0.0], [3.0, 4.0], [3.0, 5.0]])
    (d, f), = fuse_multivariate(frames, "MSD")
    assert d == 1.0 and f == 3.5


@settings(max_examples=150, deadline=None)
@given(values, st.sampled_from(["FOD", "MSD"]), st.lists(st.integers(1, 9), min_size=1))
def test_stream_chunking_matches_whole_array(x, kind, cuts):
    ds = DiffStream(kind)
    parts, i = [], 0
    for c in cuts:
        parts.append(ds.push(x[i:i + c]))
        i += c
    parts.append(ds.push(x[i:]))
    d = np.concatenate([p[0] for p in parts])
    f = np.concatenate([p[1] for p in parts])
    ref_d, ref_f = offline_diffs(np.column_stack([x, x, x]), "univariate", kind)["tangential"]
    np.testing.assert_array_equal(d, ref_d)
    np.testing.assert_array_equal(f, ref_f)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(-10, 10), st.floats(-10, 10)), min_size=3, max_size=40),
       st.sampled_from(["FOD", "MSD"]))
def test_fused_matches_oracle(rows, kind):
    x = np.array(rows)
    d, f = DiffStream(kind, multivariate=True).push(x)
    ref_d, ref_f = offline_diffs(np.column_stack([x, np.zeros(len(x))]), "multivariate", kind)["fused"]
    np.testing.assert_allclose(d, ref_d, rtol=1e-15, atol=1e-15)
    np.testing.assert_allclose(f, ref_f, rtol=1e-15, atol=1e-15)


def test_batcher_numbering_and_partial():
    b = Batcher(10)
    assert b.push(np.arange(7.0), np.zeros(7)) == []
    out = b.push(np.arange(7.0, 25.0), np.zeros(18))
    assert [x.second for x in out] == [1, 2]
    np.testing.assert_array_equal(out[1].d, np.arange(10.0, 20.0))
    assert b.pending == 5


def test_batcher_generator():
    out = list(batcher(range(25), 10))
    assert len(out) == 2 and out[0].f.tolist() == [0.0] * 10
