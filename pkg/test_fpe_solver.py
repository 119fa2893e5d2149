#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 fpe_solver.py: 分裂格式的 Fokker-Planck 参考解
"""

import math
import sys

import numpy as np

from density_scheme import em_density_evolve
from drift import nemytskii_sat, zero_drift
from errors import CflViolation, InvalidParameter
from fpe_solver import (FpeConfig, Splitting, Transport, check_cfl, em_vs_fpe_gap, fpe_solve, fpe_weak_residual,
                        transport_step)
from grid import gaussian_density, lp_distance, make_grid
from heat_kernel import semigroup_convolve
from stable_noise import StableParams
from testing import raises, run_all

PARAMS = StableParams(1.5)


def test_config_validation():
    raises(InvalidParameter, FpeConfig, dt=0.0)
    raises(InvalidParameter, FpeConfig, splitting="yoshida")
    raises(InvalidParameter, FpeConfig, transport="weno")
    raises(InvalidParameter, FpeConfig, store_every=0)
    config = FpeConfig(splitting="lie", transport="upwind1")
    assert config.splitting is Splitting.LIE and config.transport is Transport.UPWIND1


def test_cfl_violation():
    grid = make_grid(1, 10.0, 256)
    raises(CflViolation, check_cfl, FpeConfig(dt=0.01), nemytskii_sat(10.0), grid)
    check_cfl(FpeConfig(dt=0.01), zero_drift(), grid)


def test_unit_courant_transport_is_a_shift():
    grid = make_grid(1, 8.0, 64)
    values = gaussian_density(grid, sigma=1.0).values
    velocity = np.full((1, 64), 2.0)
    dt = grid.spacing / 2.0
    for scheme in Transport:
        moved = transport_step(values, velocity, dt, grid, scheme)
        assert np.allclose(moved, np.roll(values, 1), atol=1e-14), scheme


def test_limited_transport_creates_no_new_extrema():
    grid = make_grid(1, 8.0, 128)
    values = (np.abs(grid.axis) < 2.0).astype(float)
    mass = values.sum()
    velocity = np.full((1, 128), 1.0)
    dt = 0.5 * grid.spacing
    for _ in range(40):
        values = transport_step(values, velocity, dt, grid, Transport.CENTERED_LIMITED)
    assert values.min() >= -1e-12 and values.max() <= 1.0 + 1e-12
    assert abs(values.sum() - mass) < 1e-10


def test_zero_drift_matches_semigroup():
    grid = make_grid(1, 10.0, 256)
    rho_0 = gaussian_density(grid, sigma=1.0, normalize=True)
    for splitting in ("lie", "strang"):
        traj = fpe_solve(rho_0, zero_drift(), PARAMS, 0.2, FpeConfig(dt=0.01, splitting=splitting))
        assert lp_distance(traj.at(0.2), semigroup_convolve(PARAMS, 0.2, rho_0), 1) < 1e-10


def test_mass_and_store_every():
    grid = make_grid(1, 10.0, 256)
    rho_0 = gaussian_density(grid, sigma=1.0, normalize=True)
    traj = fpe_solve(rho_0, nemytskii_sat(1.0), PARAMS, 0.1, FpeConfig(dt=0.01, store_every=4))
    assert traj.times[0] == 0.0 and math.isclose(traj.times[-1], 0.1)
    assert len(traj.times) == 4
    for rho in traj.densities:
        assert abs(rho.mass() - 1.0) < 1e-12
    raises(InvalidParameter, fpe_solve, rho_0, zero_drift(), PARAMS, 0.0, FpeConfig())


def test_weak_residual():
    grid = make_grid(1, 4.0 * math.pi, 256)
    rho_0 = gaussian_density(grid, sigma=1.0, normalize=True)
    phi = np.cos(grid.axis)
    free = fpe_solve(rho_0, zero_drift(), PARAMS, 0.1, FpeConfig(dt=1e-3))
    assert fpe_weak_residual(free, zero_drift(), PARAMS, phi, 0.1) < 1e-6
    drift = nemytskii_sat(0.5)
    traj = fpe_solve(rho_0, drift, PARAMS, 0.1, FpeConfig(dt=1e-3))
    assert fpe_weak_residual(traj, drift, PARAMS, phi, 0.1) < 5e-3
    assert fpe_weak_residual(traj, drift, PARAMS, phi, 0.0) == 0.0


def test_scheme_and_fpe_are_close():
    grid = make_grid(1, 10.0, 256)
    rho_0 = gaussian_density(grid, sigma=1.0, normalize=True)
    drift = nemytskii_sat(0.5)
    fpe = fpe_solve(rho_0, drift, PARAMS, 0.25, FpeConfig(dt=1e-3, store_every=50))
    scheme = em_density_evolve(rho_0, drift, 1.0 / 64, 0.25, PARAMS)
    gap = em_vs_fpe_gap(scheme, fpe, 0.25)
    assert 0.0 < gap < 0.05


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 fpe_solver.py"))
