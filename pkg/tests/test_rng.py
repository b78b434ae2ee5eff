import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qsdlab.rng import CounterStream, path_key, sample_stable_increment, stable_samples, uniform

# scipy.stats.levy_stable.cdf(x, 1.5, 0) at these points
LEVY_CDF_15 = {-2.0: 0.10503983, -0.5: 0.36059577, 0.3: 0.5852627, 1.0: 0.75634202, 3.0: 0.9484022}


@given(st.integers(0, 2 ** 64 - 1), st.integers(0, 2 ** 40), st.integers(0, 2 ** 40), st.integers(0, 7))
def test_uniform_open_interval_and_pure(seed, path, step, lane):
    key = np.uint64(path_key(np.uint64(seed), np.uint64(path)))
    u = uniform(key, np.uint64(step), np.uint64(lane))
    assert 0.0 < u < 1.0
    assert u == uniform(np.uint64(path_key(np.uint64(seed), np.uint64(path))), np.uint64(step), np.uint64(lane))


def test_uniform_moments():
    key = CounterStream(7).key
    u = np.array([uniform(key, np.uint64(i), np.uint64(0)) for i in range(20000)])
    assert abs(u.mean() - 0.5) < 4 * math.sqrt(1 / 12 / u.size)
    assert abs(u.var() - 1 / 12) < 0.005
    v = np.array([uniform(key, np.uint64(i), np.uint64(1)) for i in range(20000)])
    assert abs(np.corrcoef(u, v)[0, 1]) < 0.03


def test_stable_reproducible_and_streams_differ():
    a = stable_samples(1.5, 1000, 42, stream=3)
    assert np.array_equal(a, stable_samples(1.5, 1000, 42, stream=3))
    assert not np.array_equal(a, stable_samples(1.5, 1000, 42, stream=4))
    assert not np.array_equal(a, stable_samples(1.5, 1000, 43, stream=3))


@pytest.mark.parametrize("alpha", [1.2, 1.5, 1.9])
def test_stable_characteristic_function(alpha):
    s = stable_samples(alpha, 200_000, 11)
    for u in (0.3, 1.0, 2.0):
        emp = np.cos(u * s).mean()
        # the variance of cos(uS) is at most 1/2
        assert abs(emp - math.exp(-u ** alpha)) < 4 * math.sqrt(0.5 / s.size)


def test_stable_cdf_against_scipy():
    s = stable_samples(1.5, 200_000, 5)
    for x, F in LEVY_CDF_15.items():
        assert abs(np.mean(s <= x) - F) < 4 * math.sqrt(F * (1 - F) / s.size)


def test_counter_stream_uniform_moments():
    st = CounterStream(3)
    u = np.array([st.uniforms() for _ in range(20000)])
    assert np.all(np.abs(u.mean(axis=0) - 0.5) < 4 * math.sqrt(1 / 12 / 20000))


def test_increment_scaling_and_counter():
    st1, st2 = CounterStream(9), CounterStream(9)
    a = sample_stable_increment(1.5, 1.0, st1)
    b = sample_stable_increment(1.5, 0.25, st2)
    assert b == pytest.approx(0.25 ** (1 / 1.5) * a, rel=1e-14)
    assert st1.step == st2.step == 1
    assert sample_stable_increment(1.5, 0.0, st1) == 0.0 and st1.step == 2
    with pytest.raises(ValueError):
        sample_stable_increment(1.5, -1.0, st1)
