#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 grid.py: 网格、网格密度、范数与读写
"""

import os
import sys
import tempfile

import numpy as np

from errors import GridMismatch, InvalidParameter, NonMonotoneTimes, OddGridSize
from grid import (DensitySeries, Grid, GridDensity, clamp_density, gaussian_density, histogram_density, lp_distance,
                  lp_norm, make_grid, outside_fraction, read_binary, read_csv, sample_from_density, tail_mass,
                  trig_eval, uniform_bump_density, write_binary, write_csv)
from testing import raises, run_all


def test_grid_validation():
    raises(OddGridSize, make_grid, 1, 10.0, 255)
    raises(InvalidParameter, make_grid, 3, 10.0, 64)
    raises(InvalidParameter, make_grid, 1, -1.0, 64)
    raises(InvalidParameter, make_grid, 1, 10.0, 8)


def test_origin_at_half_index():
    grid = make_grid(1, 10.0, 256)
    assert grid.axis[128] == 0.0
    assert grid.axis[0] == -10.0
    assert abs(grid.spacing - 20.0 / 256) < 1e-15
    grid2 = make_grid(2, 4.0, 32)
    assert grid2.points.shape == (32 * 32, 2)
    assert grid2.radius[16, 16] == 0.0


def test_gaussian_mass_and_symmetry():
    grid = make_grid(1, 10.0, 256)
    f = gaussian_density(grid, sigma=1.0)
    assert abs(f.mass() - 1.0) < 1e-10
    assert np.allclose(grid.mirror(f.values), f.values, atol=1e-15)

    grid2 = make_grid(2, 8.0, 64)
    g = gaussian_density(grid2, sigma=1.0)
    assert abs(g.mass() - 1.0) < 1e-8


def test_density_rejects_negative_and_is_read_only():
    grid = make_grid(1, 5.0, 32)
    values = np.ones(32)
    values[3] = -1e-3
    raises(InvalidParameter, GridDensity, grid, values)
    raises(InvalidParameter, GridDensity, grid, np.full(32, np.nan))
    raises(InvalidParameter, GridDensity, grid, np.ones(31))
    f = GridDensity(grid, np.ones(32))
    raises(ValueError, f.values.__setitem__, 0, 2.0)


def test_clamp_density_keeps_mass():
    grid = make_grid(1, 5.0, 32)
    values = np.full(32, 0.1)
    values[0] = -0.05
    target = float(values.sum()) * grid.cell_volume
    f, clamped = clamp_density(grid, values, target_mass=target)
    assert abs(clamped - 0.05 * grid.cell_volume) < 1e-15
    assert f.values.min() >= 0.0
    assert abs(f.mass() - target) < 1e-12


def test_lp_distance_requires_same_grid():
    a = gaussian_density(make_grid(1, 10.0, 64))
    b = gaussian_density(make_grid(1, 10.0, 128))
    raises(GridMismatch, lp_distance, a, b)
    assert lp_distance(a, a) == 0.0
    raises(InvalidParameter, lp_norm, a.values, a.grid, 0.5)


def test_tail_mass():
    grid = make_grid(1, 10.0, 200)
    assert tail_mass(uniform_bump_density(grid, width=1.0)) == 0.0
    assert abs(tail_mass(uniform_bump_density(grid, width=1.0, center=7.0)) - 1.0) < 1e-12


def test_cell_index_is_periodic():
    grid = make_grid(1, 10.0, 100)
    idx = grid.cell_index(np.array([[-10.0], [10.0], [0.0], [30.0]]))
    assert idx.tolist() == [0, 0, 50, 0]


def test_histogram_and_outside_fraction():
    grid = make_grid(1, 10.0, 100)
    rng = np.random.default_rng(1)
    positions = rng.uniform(-5, 5, size=(1000, 1))
    hist = histogram_density(grid, positions)
    assert abs(hist.mass() - 1.0) < 1e-12
    assert outside_fraction(grid, positions) == 0.0
    assert outside_fraction(grid, np.array([[11.0], [0.0]])) == 0.5


def test_trig_eval_is_exact_for_band_limited_functions():
    grid = make_grid(1, np.pi, 64)
    values = np.cos(3.0 * grid.axis)
    points = np.random.default_rng(0).uniform(-np.pi, np.pi, size=50)
    assert np.max(np.abs(trig_eval(values, grid, points) - np.cos(3.0 * points))) < 1e-12

    grid2 = make_grid(2, np.pi, 32)
    values2 = (np.cos(2.0 * grid2.points[:, 0]) * np.sin(grid2.points[:, 1])).reshape(grid2.shape)
    pts = np.random.default_rng(1).uniform(-np.pi, np.pi, size=(20, 2))
    expected = np.cos(2.0 * pts[:, 0]) * np.sin(pts[:, 1])
    assert np.max(np.abs(trig_eval(values2, grid2, pts) - expected)) < 1e-12


def test_sample_from_density():
    grid = make_grid(1, 10.0, 256)
    f = gaussian_density(grid, sigma=1.0, center=2.0, normalize=True)
    draws = sample_from_density(f, 20000, np.random.default_rng(3))
    assert draws.shape == (20000, 1)
    assert abs(draws.mean() - 2.0) < 0.05


def test_csv_and_binary_files():
    grid = make_grid(2, 3.0, 16)
    f = gaussian_density(grid, sigma=0.7)
    with tempfile.TemporaryDirectory() as tmp:
        write_csv(f, os.path.join(tmp, "f.csv"))
        assert np.array_equal(read_csv(os.path.join(tmp, "f.csv"), grid).values, f.values)
        write_binary(f, os.path.join(tmp, "f.bin"))
        g = read_binary(os.path.join(tmp, "f.bin"))
        assert g.grid == grid
        assert np.array_equal(g.values, f.values)
        assert os.path.getsize(os.path.join(tmp, "f.bin")) == 24 + 8 * grid.cell_count


def test_csv_rejects_other_grid():
    grid = make_grid(1, 5.0, 64)
    f = gaussian_density(grid, sigma=0.9, center=0.3)
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "f.csv")
        write_csv(f, path)
        assert np.array_equal(read_csv(path, grid).values, f.values)
        # 点数相同但半宽不同
        raises(GridMismatch, read_csv, path, make_grid(1, 6.0, 64))
        raises(GridMismatch, read_csv, path, make_grid(1, 5.0, 32))
        raises(GridMismatch, read_csv, path, make_grid(2, 5.0, 16))


def test_density_series():
    grid = make_grid(1, 5.0, 32)
    f = GridDensity(grid, np.ones(32))
    raises(NonMonotoneTimes, DensitySeries, (0.0, 0.5, 0.5), (f, f, f))
    series = DensitySeries((0.0, 0.25, 0.5), (f, f, f))
    assert series.index_of(0.25) == 1
    assert series.has_time(0.5) and not series.has_time(0.3)
    assert series.grid == Grid(1, 5.0, 32)
    raises(InvalidParameter, series.at, 0.3)


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 grid.py"))
