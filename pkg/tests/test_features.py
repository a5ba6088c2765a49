import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from oracle import offline_q90, type7
from wearguard.errors import ConfigError
from wearguard.features import FeatureExtractor, summarize, summarize_window, window_quantile
from wearguard.ingest import ForceSample


def test_q90_of_ramp():
    x = np.arange(1, 351, dtype=float)
    assert window_quantile(x, 0.9) == pytest.approx(315.1, abs=1e-12)
    assert window_quantile(x, 0.1) == pytest.approx(35.9, abs=1e-12)
    assert summarize(x, "bandwidth") == pytest.approx(279.2, abs=1e-12)
    assert window_quantile(x, 0.9, "nearest_rank") == 315.0


def test_q90_uses_absolute_values():
    x = -np.arange(1, 351, dtype=float)
    assert summarize(x) == pytest.approx(315.1)


def test_other_metrics():
    x = np.array([[1.0, -2.0, 3.0, 4.0]])
    assert summarize(x, "mean")[0] == 2.5
    assert summarize(x, "median")[0] == 2.5
    with pytest.raises(ConfigError):
        summarize(x, "max")


def test_summarize_window_shapes():
    w = [ForceSample(i, i, 2 * i, 3 * i) for i in range(1, 11)]
    np.testing.assert_allclose(summarize_window(w), [9.1, 18.2, 27.3])
    with pytest.raises(ValueError):
        summarize_window(np.zeros((5, 3)), window_len=10)


@settings(max_examples=200, deadline=None)
@given(arrays(float, st.integers(1, 400), elements=st.floats(-1e6, 1e6)), st.floats(0, 1))
def test_quantile_matches_sorted_interpolation(x, p):
    expected = type7(sorted(x.tolist()), p)
    assert window_quantile(x, p) == pytest.approx(expected, rel=1e-12, abs=1e-9)


@settings(max_examples=100, deadline=None)
@given(arrays(float, (st.integers(0, 120).map(lambda n: (n, 3))), elements=st.floats(-50, 50)),
       st.lists(st.integers(1, 40), min_size=1, max_size=10))
def test_extractor_is_chunking_invariant(forces, cuts):
    ext = FeatureExtractor(window_len=7)
    out, start = [], 0
    for c in cuts + [len(forces)]:
        out.append(ext.push(forces[start:start + c])["q90"])
        start += c
        if start >= len(forces):
            break
    got = np.vstack([o.reshape(-1, 3) for o in out])
    np.testing.assert_array_equal(got, offline_q90(forces, 7))
    assert len(got) == len(forces) // 7
    assert ext.pending == len(forces) % 7
