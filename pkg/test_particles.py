#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 particles.py: 核密度估计与粒子版 Euler-Maruyama 格式
"""

import sys

import numpy as np

from config import Rho0Spec
from drift import nemytskii_sat, zero_drift
from errors import InvalidParameter
from grid import gaussian_density, lp_distance, make_grid
from heat_kernel import semigroup_convolve
from particles import (KdeConfig, KdeKernel, ParticleCloud, em_particle_simulate, empirical_tv, kde_density,
                       resolve_bandwidth, sample_initial, silverman_bandwidth)
from stable_noise import StableParams, stream_generator
from testing import raises, run_all

PARAMS = StableParams(1.5)


def test_kde_config_validation():
    assert KdeConfig().kernel is KdeKernel.GAUSSIAN
    assert KdeConfig(kernel="epanechnikov", bandwidth=0.3).kernel is KdeKernel.EPANECHNIKOV
    raises(InvalidParameter, KdeConfig, kernel="box")
    raises(InvalidParameter, KdeConfig, bandwidth=0.0)
    raises(InvalidParameter, KdeConfig, bandwidth="wide")


def test_cloud_validation():
    cloud = ParticleCloud(0.0, [0.0, 1.0, 2.0])
    assert cloud.N == 3 and cloud.dim == 1
    raises(InvalidParameter, ParticleCloud, 0.0, np.zeros((0, 1)))
    raises(InvalidParameter, ParticleCloud, 0.0, [0.0, np.nan])
    raises(ValueError, cloud.positions.__setitem__, (0, 0), 5.0)


def test_single_particle_kde_is_centered_and_symmetric():
    grid = make_grid(1, 8.0, 128)
    for kernel in ("gaussian", "epanechnikov"):
        density = kde_density(ParticleCloud(0.0, [0.0]), KdeConfig(kernel=kernel, bandwidth=0.5), grid)
        assert np.argmax(density.values) == 64
        assert np.max(np.abs(density.values - grid.mirror(density.values))) < 1e-12
        assert abs(density.mass() - 1.0) < 1e-12


def test_kde_is_order_independent():
    grid = make_grid(2, 4.0, 32)
    positions = stream_generator(3).standard_normal((500, 2))
    a = kde_density(ParticleCloud(0.0, positions), KdeConfig(bandwidth=0.4), grid)
    b = kde_density(ParticleCloud(0.0, positions[::-1]), KdeConfig(bandwidth=0.4), grid)
    assert np.array_equal(a.values, b.values)
    raises(InvalidParameter, kde_density, ParticleCloud(0.0, positions[:, :1]), KdeConfig(), grid)


def test_silverman_bandwidth():
    x = stream_generator(1).standard_normal(10000)
    expected = 0.9 * 10000 ** -0.2
    assert abs(silverman_bandwidth(x) - expected) / expected < 0.1
    assert silverman_bandwidth(np.zeros(1)) == 0.0
    xy = stream_generator(1).standard_normal((10000, 2))
    assert abs(silverman_bandwidth(xy) - 10000 ** (-1.0 / 6)) < 0.02
    # 带宽不小于网格间距
    grid = make_grid(1, 8.0, 16)
    assert resolve_bandwidth(KdeConfig(), ParticleCloud(0.0, x), grid) == grid.spacing


def test_sample_initial_kinds():
    rng = stream_generator(2)
    gauss = sample_initial(Rho0Spec("gaussian", sigma=2.0, center=1.0), PARAMS, 100000, rng)
    assert gauss.shape == (100000, 1)
    assert abs(gauss.mean() - 1.0) < 0.05 and abs(gauss.std() - 2.0) < 0.05
    bump = sample_initial(Rho0Spec("uniform-bump", width=0.5), StableParams(1.5, 2), 1000, rng)
    assert bump.shape == (1000, 2) and np.abs(bump).max() <= 0.5
    stable = sample_initial(Rho0Spec("stable", t0=0.1), PARAMS, 1000, rng)
    assert stable.shape == (1000, 1)


def _gaussian_sampler(size, rng):
    return rng.standard_normal((size, 1))


def test_particle_simulation_is_deterministic():
    grid = make_grid(1, 10.0, 128)
    args = (2000, _gaussian_sampler, nemytskii_sat(1.0), 0.125, 0.5, PARAMS, KdeConfig(), grid)
    clouds, stats = em_particle_simulate(*args, seed=17)
    again, _ = em_particle_simulate(*args, seed=17)
    other, _ = em_particle_simulate(*args, seed=18)
    assert [c.time for c in clouds] == [0.0, 0.125, 0.25, 0.375, 0.5]
    assert stats.steps == 4 and 0.0 <= stats.max_wrap_fraction < 0.05
    assert np.array_equal(clouds[-1].positions, again[-1].positions)
    assert not np.array_equal(clouds[-1].positions, other[-1].positions)
    raises(InvalidParameter, em_particle_simulate, 0, *args[1:], seed=17)
    raises(InvalidParameter, em_particle_simulate, 2000, _gaussian_sampler, zero_drift(), 1.5, 2.0, PARAMS,
           KdeConfig(), grid, seed=17)


def test_zero_drift_particles_follow_semigroup():
    grid = make_grid(1, 16.0, 128)
    clouds, _ = em_particle_simulate(200000, _gaussian_sampler, zero_drift(), 0.25, 0.5, PARAMS,
                                     KdeConfig(), grid, seed=5)
    estimate = kde_density(clouds[-1], KdeConfig(), grid)
    exact = semigroup_convolve(PARAMS, 0.5, gaussian_density(grid, sigma=1.0, normalize=True))
    assert lp_distance(estimate, exact, 1) < 0.06


def test_empirical_tv():
    grid = make_grid(1, 8.0, 64)
    a = ParticleCloud(0.0, stream_generator(1).standard_normal(50000))
    b = ParticleCloud(0.0, stream_generator(2).standard_normal(50000))
    far = ParticleCloud(0.0, stream_generator(2).standard_normal(50000) + 4.0)
    assert empirical_tv(a, a, grid) == 0.0
    assert empirical_tv(a, b, grid) < 0.1
    assert empirical_tv(a, far, grid) > 1.5


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 particles.py"))
