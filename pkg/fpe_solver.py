# -*- coding: utf-8 -*-
"""
非线性分数阶 Fokker-Planck 方程的参考解

d_t rho - Delta^{alpha/2} rho + div(b(t, x, rho) rho) = 0

每个 dt 步做算子分裂: 扩散子步在谱空间精确求解（乘以 exp(-dt|xi|^alpha)），
输运子步为守恒有限体积格式，各坐标轴依次处理。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from drift import DriftSpec
from errors import CflViolation, InvalidParameter
from grid import DEFAULT_NUMERICS, DensitySeries, Grid, GridDensity, NumericsConfig, clamp_density, lp_distance
from heat_kernel import check_domain, convolve_values, frac_laplacian, spectral_gradient
from stable_noise import StableParams

logger = logging.getLogger(__name__)


class Splitting(str, Enum):
    LIE = "lie"
    STRANG = "strang"


class Transport(str, Enum):
    UPWIND1 = "upwind1"
    CENTERED_LIMITED = "centered_limited"


@dataclass(frozen=True)
class FpeConfig:
    dt: float = 1e-3
    splitting: Splitting = Splitting.STRANG
    transport: Transport = Transport.CENTERED_LIMITED
    # 每隔多少步保存一次（最后时刻总是保存）
    store_every: int = 1

    def __post_init__(self):
        if not self.dt > 0:
            raise InvalidParameter(f"dt 必须为正，实际为 {self.dt}")
        if self.store_every < 1:
            raise InvalidParameter(f"store_every 必须 >= 1，实际为 {self.store_every}")
        try:
            object.__setattr__(self, "splitting", Splitting(self.splitting))
            object.__setattr__(self, "transport", Transport(self.transport))
        except ValueError as e:
            raise InvalidParameter(str(e)) from None


@dataclass(frozen=True)
class FpeTrajectory(DensitySeries):
    config: FpeConfig = None
    clamped_mass: float = field(default=0.0, compare=False)


def check_cfl(config: FpeConfig, drift: DriftSpec, grid: Grid) -> None:
    """输运子步的 CFL 条件 dt <= dx / kappa"""
    if drift.kappa > 0 and config.dt > grid.spacing / drift.kappa:
        raise CflViolation(f"dt={config.dt} 超过 CFL 上限 dx/kappa={grid.spacing / drift.kappa:.3e}")


def _van_leer(r: np.ndarray) -> np.ndarray:
    return (r + np.abs(r)) / (1.0 + np.abs(r))


def _face_flux(values: np.ndarray, speed: np.ndarray, axis: int, nu: np.ndarray, scheme: Transport) -> np.ndarray:
    """i+1/2 界面上的数值通量（周期边界）"""
    right = np.roll(values, -1, axis=axis)
    positive = speed > 0
    flux = np.where(positive, speed * values, speed * right)
    if scheme is Transport.UPWIND1:
        return flux
    jump = right - values
    upstream = np.where(positive, values - np.roll(values, 1, axis=axis),
                        np.roll(values, -2, axis=axis) - right)
    r = np.divide(upstream, jump, out=np.zeros_like(jump), where=np.abs(jump) > 1e-300)
    return flux + 0.5 * np.abs(speed) * (1.0 - nu) * _van_leer(r) * jump


def transport_step(values: np.ndarray, velocity: np.ndarray, dt: float, grid: Grid, scheme: Transport) -> np.ndarray:
    """守恒有限体积输运，velocity 形状 (dim, *grid.shape) 为单元中心速度"""
    out = np.array(values, dtype=float)
    for axis in range(grid.dim):
        speed = 0.5 * (velocity[axis] + np.roll(velocity[axis], -1, axis=axis))
        nu = np.abs(speed) * dt / grid.spacing
        flux = _face_flux(out, speed, axis, nu, scheme)
        out = out - dt / grid.spacing * (flux - np.roll(flux, 1, axis=axis))
    return out


def _velocity(drift: DriftSpec, t: float, values: np.ndarray, grid: Grid) -> np.ndarray:
    u = np.maximum(values, 0.0).ravel()
    b = drift(t, grid.points, u)
    return b.T.reshape((grid.dim,) + grid.shape)


def fpe_step(values: np.ndarray, drift: DriftSpec, t: float, dt: float, params: StableParams, grid: Grid,
             config: FpeConfig) -> np.ndarray:
    """一个分裂步，b 的密度参数取步中密度"""
    if config.splitting is Splitting.STRANG:
        half = convolve_values(params, dt / 2.0, values, grid)
        moved = transport_step(half, _velocity(drift, t + dt / 2.0, half, grid), dt, grid, config.transport)
        return convolve_values(params, dt / 2.0, moved, grid)
    diffused = convolve_values(params, dt, values, grid)
    return transport_step(diffused, _velocity(drift, t, diffused, grid), dt, grid, config.transport)


def fpe_solve(rho_0: GridDensity, drift: DriftSpec, params: StableParams, T: float, config: FpeConfig,
              numerics: NumericsConfig = DEFAULT_NUMERICS) -> FpeTrajectory:
    if not T > 0:
        raise InvalidParameter(f"终止时间 T 必须为正，实际为 {T}")
    grid = rho_0.grid
    check_cfl(config, drift, grid)
    check_domain(params, T, grid, numerics)
    n_steps = max(int(math.ceil(T / config.dt - 1e-9)), 1)
    logger.debug(f"FPE 求解: alpha={params.alpha}, dt={config.dt}, 步数={n_steps}, "
                 f"分裂={config.splitting.value}, 输运={config.transport.value}")

    times = [0.0]
    densities = [rho_0]
    total_clamped = 0.0
    current = rho_0
    t = 0.0
    for step in range(1, n_steps + 1):
        dt = min(config.dt, T - t) if step == n_steps else config.dt
        values = fpe_step(current.values, drift, t, dt, params, grid, config)
        current, clamped = clamp_density(grid, values, target_mass=current.mass())
        total_clamped += clamped
        t = T if step == n_steps else step * config.dt
        if step % config.store_every == 0 or step == n_steps:
            times.append(t)
            densities.append(current)
    if total_clamped > 1e-6:
        logger.warning(f"FPE 累计截断负质量 {total_clamped:.3e}")
    return FpeTrajectory(times=tuple(times), densities=tuple(densities), config=config, clamped_mass=total_clamped)


def fpe_weak_residual(traj: DensitySeries, drift: DriftSpec, params: StableParams, phi, t: float) -> float:
    """弱形式 <rho_t, phi> - <rho_0, phi> - int_0^t <rho_s, Delta^{a/2} phi + b . grad phi> ds 的绝对值

    时间积分对保存的时刻用梯形公式。
    """
    grid = traj.grid
    phi = np.asarray(phi, dtype=float).reshape(grid.shape)
    lap = frac_laplacian(params, phi, grid)
    grad = spectral_gradient(phi, grid)
    index = traj.index_of(t)
    if index == 0:
        return 0.0

    def integrand(s, rho):
        b = _velocity(drift, s, rho.values, grid)
        return float(np.sum(rho.values * (lap + np.sum(b * grad, axis=0)))) * grid.cell_volume

    times = np.array(traj.times[:index + 1])
    values = np.array([integrand(s, rho) for s, rho in zip(times, traj.densities[:index + 1])])
    integral = float(np.trapz(values, times))
    lhs = float(np.sum((traj.densities[index].values - traj.densities[0].values) * phi)) * grid.cell_volume
    return abs(lhs - integral)


def em_vs_fpe_gap(scheme_traj: DensitySeries, fpe_traj: DensitySeries, t: float) -> float:
    """L^1 距离 ||rho^FPE_t - rho^h_t||"""
    return lp_distance(fpe_traj.at(t), scheme_traj.at(t), 1)
