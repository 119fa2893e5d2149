#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 stable_noise.py: 稳定增量抽样与随机流
"""

import math
import sys

import numpy as np

from errors import InvalidParameter, NonMonotoneTimes
from stable_noise import (PURPOSE_INCREMENT, PURPOSE_INITIAL, RngStream, StableParams, as_generator,
                          derive_stream_id, empirical_char_function, increment_path, moment_growth,
                          sample_rot_invariant, sample_subordinator, sample_sym_stable_1d, stream_generator)
from testing import raises, run_all


def test_alpha_range():
    raises(InvalidParameter, StableParams, 1.0)
    raises(InvalidParameter, StableParams, 2.0)
    raises(InvalidParameter, StableParams, 1.5, 3)
    assert StableParams(2.0, pipeline_check=True).alpha == 2.0
    assert abs(StableParams(1.5).rate - 1.0 / 3.0) < 1e-15


def test_streams_are_reproducible():
    a = stream_generator(7, derive_stream_id(PURPOSE_INCREMENT, 3, 1)).standard_normal(5)
    b = RngStream(7, derive_stream_id(PURPOSE_INCREMENT, 3, 1)).generator().standard_normal(5)
    c = stream_generator(7, derive_stream_id(PURPOSE_INCREMENT, 3, 2)).standard_normal(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert derive_stream_id(PURPOSE_INITIAL, 0, 0) != derive_stream_id(PURPOSE_INCREMENT, 0, 0)
    raises(InvalidParameter, as_generator, 42)


def test_shapes():
    p1, p2 = StableParams(1.5), StableParams(1.5, 2)
    rng = stream_generator(0)
    assert sample_rot_invariant(p1, 0.1, rng).shape == (1,)
    assert sample_rot_invariant(p1, 0.1, rng, size=5).shape == (5, 1)
    assert sample_rot_invariant(p2, 0.1, rng).shape == (2,)
    assert sample_rot_invariant(p2, 0.1, rng, size=5).shape == (5, 2)
    raises(InvalidParameter, sample_rot_invariant, p1, 0.0, rng)
    raises(InvalidParameter, sample_rot_invariant, p2, 1.0, rng, 5, "cms")
    raises(InvalidParameter, sample_rot_invariant, p1, 1.0, rng, 5, "unknown")


def test_characteristic_function_1d():
    for alpha in (1.2, 1.5, 1.8):
        params = StableParams(alpha)
        for method in ("cms", "subordination"):
            draws = sample_rot_invariant(params, 1.0, stream_generator(11), size=200000, method=method)
            for xi in (0.5, 1.0, 2.0):
                ecf = empirical_char_function(draws, xi)
                assert abs(ecf.real - math.exp(-xi ** alpha)) < 0.01, (alpha, method, xi)
                assert abs(ecf.imag) < 0.01


def test_characteristic_function_2d_is_rotation_invariant():
    params = StableParams(1.5, 2)
    draws = sample_rot_invariant(params, 0.5, stream_generator(5), size=200000)
    expected = math.exp(-0.5 * 1.0 ** 1.5)
    for angle in (0.0, math.pi / 4, 2.0):
        xi = np.array([math.cos(angle), math.sin(angle)])
        assert abs(empirical_char_function(draws, xi).real - expected) < 0.01


def test_time_scaling_of_cms():
    params = StableParams(1.5)
    one = sample_sym_stable_1d(params, 1.0, stream_generator(2), size=1000)
    four = sample_sym_stable_1d(params, 4.0, stream_generator(2), size=1000)
    assert np.allclose(four, 4.0 ** (1.0 / 1.5) * one)


def test_subordinator_laplace_transform():
    s = sample_subordinator(0.75, 1.0, stream_generator(9), size=200000)
    assert np.all(s > 0)
    assert abs(np.mean(np.exp(-s)) - math.exp(-1.0)) < 0.01
    raises(InvalidParameter, sample_subordinator, 0.4, 1.0, stream_generator(9))


def test_increment_path():
    params = StableParams(1.5)
    path = increment_path(params, [0.1, 0.2, 0.5], stream_generator(1), size=10)
    assert path.shape == (3, 10, 1)
    raises(NonMonotoneTimes, increment_path, params, [0.1, 0.1], stream_generator(1))
    raises(InvalidParameter, increment_path, params, [0.0, 0.1], stream_generator(1))


def test_moments_below_alpha_are_stable():
    params = StableParams(1.5)
    draws = sample_rot_invariant(params, 1.0, stream_generator(4), size=400000)
    half, full = moment_growth(draws, 0.5)
    assert abs(half - full) / full < 0.05


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 stable_noise.py"))
