import numpy as np
from hypothesis import given, strategies as st
from scipy import stats

from concavity_lab.rng import MAX_DRAWS, uniforms


def test_open_unit_interval_and_uniformity():
    u = uniforms(7, np.arange(200_000), 0)
    assert u.min() > 0 and u.max() < 1
    assert stats.kstest(u, "uniform").pvalue > 1e-3


def test_draw_streams_uncorrelated():
    w = np.arange(100_000)
    a, b = uniforms(3, w, 0), uniforms(3, w, 1)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.02
    c = uniforms(4, w, 0)
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.02


@given(st.integers(0, 2**64 - 1), st.integers(0, 2**30), st.integers(0, MAX_DRAWS - 1))
def test_pure_function_of_counter(seed, walk, draw):
    a = uniforms(seed, walk, draw)
    b = uniforms(seed, np.array([walk, walk + 1]), draw)[0]
    assert a == b
