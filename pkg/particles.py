# -*- coding: utf-8 -*-
"""
平均场粒子法: 用粒子云模拟 Euler-Maruyama 格式，作为确定性密度递推的交叉验证

每个格点时间 kh（k >= 1）用粒子云的核密度估计代替 rho^h_{kh}，
粒子自身所在单元的估计值作为漂移的密度参数。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from drift import DriftSpec, step_displacement, step_index
from errors import InvalidParameter
from grid import (DEFAULT_NUMERICS, Grid, GridDensity, NumericsConfig, clamp_density, histogram_density,
                  lp_distance, outside_fraction)
from stable_noise import (PURPOSE_INCREMENT, PURPOSE_INITIAL, StableParams, derive_stream_id,
                          sample_rot_invariant, stream_generator)

logger = logging.getLogger(__name__)

# 每个随机流负责的粒子数
BLOCK_SIZE = 65536


@dataclass(frozen=True, eq=False)
class ParticleCloud:
    time: float
    positions: np.ndarray

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim == 1:
            pos = pos[:, None]
        if len(pos) < 1:
            raise InvalidParameter("粒子云至少需要1个粒子")
        if not np.all(np.isfinite(pos)):
            raise InvalidParameter("粒子位置含有 NaN 或 Inf")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    @property
    def N(self) -> int:
        return len(self.positions)

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


class KdeKernel(str, Enum):
    GAUSSIAN = "gaussian"
    EPANECHNIKOV = "epanechnikov"


@dataclass(frozen=True)
class KdeConfig:
    kernel: KdeKernel = KdeKernel.GAUSSIAN
    # 正数或 "auto"（Silverman 规则）
    bandwidth: float | str = "auto"

    def __post_init__(self):
        try:
            object.__setattr__(self, "kernel", KdeKernel(self.kernel))
        except ValueError:
            raise InvalidParameter(f"未知核函数: {self.kernel}") from None
        if self.bandwidth != "auto" and not (isinstance(self.bandwidth, (int, float)) and self.bandwidth > 0):
            raise InvalidParameter(f"带宽必须为正数或 'auto'，实际为 {self.bandwidth}")


@dataclass
class ParticleStats:
    max_wrap_fraction: float = 0.0
    steps: int = 0

    def to_dict(self) -> dict:
        return {"max_wrap_fraction": self.max_wrap_fraction, "steps": self.steps}


def silverman_bandwidth(positions: np.ndarray) -> float:
    """一维 0.9 min(sigma, IQR/1.349) N^{-1/5}；二维取各轴平均标准差乘 N^{-1/6}"""
    positions = np.asarray(positions, dtype=float).reshape(len(positions), -1)
    n, dim = positions.shape
    if n < 2:
        return 0.0
    if dim == 1:
        x = positions[:, 0]
        q75, q25 = np.percentile(x, [75, 25])
        spread = min(np.std(x, ddof=1), (q75 - q25) / 1.349)
        if spread <= 0:
            spread = np.std(x, ddof=1)
        return float(0.9 * spread * n ** (-0.2))
    sigma = float(np.mean(np.std(positions, axis=0, ddof=1)))
    return sigma * n ** (-1.0 / (dim + 4))


def resolve_bandwidth(config: KdeConfig, cloud: ParticleCloud, grid: Grid) -> float:
    """带宽不小于网格间距"""
    bw = silverman_bandwidth(cloud.positions) if config.bandwidth == "auto" else float(config.bandwidth)
    if not bw >= grid.spacing:
        logger.debug(f"带宽 {bw:.4g} 小于网格间距，改用 {grid.spacing:.4g}")
        bw = grid.spacing
    return bw


def _kernel_table(config: KdeConfig, bandwidth: float, grid: Grid) -> np.ndarray:
    """以下标 0 为原点的周期核表，离散质量归一为 1"""
    r2 = grid.radius ** 2 / bandwidth ** 2
    if config.kernel is KdeKernel.GAUSSIAN:
        table = np.exp(-0.5 * r2)
    else:
        table = np.maximum(1.0 - r2, 0.0)
    table = table / (table.sum() * grid.cell_volume)
    return np.fft.ifftshift(table)


def kde_density(cloud: ParticleCloud, config: KdeConfig, grid: Grid) -> GridDensity:
    """粒子按最近节点计数后与核表做周期 FFT 卷积

    计数为整数，结果与粒子排列顺序无关。
    """
    if cloud.dim != grid.dim:
        raise InvalidParameter(f"粒子维数 {cloud.dim} 与网格维数 {grid.dim} 不符")
    counts = np.bincount(grid.cell_index(cloud.positions), minlength=grid.cell_count).reshape(grid.shape)
    hist = counts / (cloud.N * grid.cell_volume)
    kernel = _kernel_table(config, resolve_bandwidth(config, cloud, grid), grid)
    values = np.fft.ifftn(np.fft.fftn(hist) * np.fft.fftn(kernel)).real * grid.cell_volume
    density, _ = clamp_density(grid, values, target_mass=1.0)
    return density


def sample_initial(spec, params: StableParams, size: int, rng: np.random.Generator) -> np.ndarray:
    """按初值描述抽样，spec 需有 kind/sigma/width/t0/center 属性"""
    dim = params.dim
    center = np.broadcast_to(np.asarray(spec.center, dtype=float), (dim,))
    if spec.kind == "gaussian":
        return center + spec.sigma * rng.standard_normal((size, dim))
    if spec.kind == "uniform-bump":
        return center + rng.uniform(-spec.width, spec.width, size=(size, dim))
    if spec.kind == "stable":
        return center + sample_rot_invariant(params, spec.t0, rng, size=size)
    raise InvalidParameter(f"未知初值类型: {spec.kind}")


def _increments(params: StableParams, h: float, n: int, seed: int, step: int) -> np.ndarray:
    blocks = []
    for block, start in enumerate(range(0, n, BLOCK_SIZE)):
        gen = stream_generator(seed, derive_stream_id(PURPOSE_INCREMENT, step, block))
        blocks.append(sample_rot_invariant(params, h, gen, size=min(BLOCK_SIZE, n - start)))
    return np.concatenate(blocks, axis=0)


def em_particle_simulate(N: int, rho0_sampler, drift: DriftSpec, h: float, T: float, params: StableParams,
                         kde_config: KdeConfig, grid: Grid, seed: int,
                         numerics: NumericsConfig = DEFAULT_NUMERICS) -> tuple[list[ParticleCloud], ParticleStats]:
    """粒子版 Euler-Maruyama 格式

    Args:
        rho0_sampler: callable(size, rng) -> (size, dim) 初始位置

    Returns:
        (格点时间 0, h, 2h, ... 上的粒子云, 统计)
    """
    if N < 1:
        raise InvalidParameter(f"粒子数至少为1，实际为 {N}")
    if N < 100:
        logger.warning(f"粒子数 {N} 少于100，核密度估计不可靠")
    if not 0 < h < 1:
        raise InvalidParameter(f"步长 h 必须在 (0,1)，实际为 {h}")
    n_steps = step_index(T, h)
    stats = ParticleStats()

    init_rng = stream_generator(seed, derive_stream_id(PURPOSE_INITIAL, 0, 0))
    positions = np.asarray(rho0_sampler(N, init_rng), dtype=float).reshape(N, params.dim)
    clouds = [ParticleCloud(0.0, positions)]
    for k in range(n_steps):
        if k >= 1:
            density = kde_density(clouds[-1], kde_config, grid)
            u = density.values.ravel()[grid.cell_index(positions)]
            positions = positions + step_displacement(drift, k, h, positions, u)
        positions = positions + _increments(params, h, N, seed, k)
        wrap = outside_fraction(grid, positions)
        stats.max_wrap_fraction = max(stats.max_wrap_fraction, wrap)
        stats.steps += 1
        clouds.append(ParticleCloud((k + 1) * h, positions))
    if stats.max_wrap_fraction > numerics.tau_mass:
        logger.warning(f"区域外粒子比例最大 {stats.max_wrap_fraction:.3e}，超过 {numerics.tau_mass}")
    logger.debug(f"粒子模拟完成: N={N}, 步数={n_steps}")
    return clouds, stats


def empirical_tv(cloud_a: ParticleCloud, cloud_b: ParticleCloud, grid: Grid) -> float:
    """两团粒子直方图密度的 L^1 距离（不带 1/2 因子）"""
    return lp_distance(histogram_density(grid, cloud_a.positions), histogram_density(grid, cloud_b.positions), 1)
