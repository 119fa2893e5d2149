# -*- coding: utf-8 -*-
"""
空间离散：截断周期网格、网格密度、求积与范数

所有密度计算共用的底层模块。网格为 [-L, L)^d 上的均匀节点 x_j = -L + j*dx，
在 FFT 运算中按周期拓扑处理。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import pandas as pd

from errors import GridMismatch, InvalidParameter, NonMonotoneTimes, OddGridSize

logger = logging.getLogger(__name__)

# 默认质量容差与尾部容差
TAU_MASS = 1e-3
TAIL_TOLERANCE = 0.1


@dataclass(frozen=True)
class NumericsConfig:
    """数值守卫的容差设置"""
    tau_mass: float = TAU_MASS
    tail_tolerance: float = TAIL_TOLERANCE


DEFAULT_NUMERICS = NumericsConfig()


@dataclass(frozen=True)
class Grid:
    dim: int
    half_width: float
    points_per_axis: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidParameter(f"维数必须为1或2，实际为 {self.dim}")
        if not self.half_width > 0:
            raise InvalidParameter(f"区域半宽必须为正，实际为 {self.half_width}")
        if self.points_per_axis % 2 != 0:
            raise OddGridSize(f"每轴格点数必须为偶数，实际为 {self.points_per_axis}")
        if self.points_per_axis < 16:
            raise InvalidParameter(f"每轴格点数至少为16，实际为 {self.points_per_axis}")

    @property
    def spacing(self) -> float:
        return 2.0 * self.half_width / self.points_per_axis

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.points_per_axis,) * self.dim

    @property
    def cell_count(self) -> int:
        return self.points_per_axis ** self.dim

    @property
    def cell_volume(self) -> float:
        return self.spacing ** self.dim

    @cached_property
    def axis(self) -> np.ndarray:
        """单轴节点坐标 -L + j*dx"""
        values = -self.half_width + np.arange(self.points_per_axis) * self.spacing
        values.setflags(write=False)
        return values

    @cached_property
    def points(self) -> np.ndarray:
        """所有节点坐标，形状 (cell_count, dim)，按行主序排列"""
        mesh = np.meshgrid(*([self.axis] * self.dim), indexing="ij")
        pts = np.stack([m.ravel() for m in mesh], axis=-1)
        pts.setflags(write=False)
        return pts

    @cached_property
    def radius(self) -> np.ndarray:
        """节点到原点的欧氏距离，形状同网格"""
        r = np.sqrt(np.sum(self.points ** 2, axis=1)).reshape(self.shape)
        r.setflags(write=False)
        return r

    @cached_property
    def wave_vectors(self) -> tuple[np.ndarray, ...]:
        """FFT 顺序的波矢分量，每个分量已广播到网格形状"""
        xi = 2.0 * np.pi * np.fft.fftfreq(self.points_per_axis, d=self.spacing)
        mesh = np.meshgrid(*([xi] * self.dim), indexing="ij")
        for m in mesh:
            m.setflags(write=False)
        return tuple(mesh)

    @cached_property
    def wavenumber(self) -> np.ndarray:
        """|xi|，FFT 顺序"""
        k = np.sqrt(sum(m ** 2 for m in self.wave_vectors))
        k.setflags(write=False)
        return k

    @property
    def nyquist(self) -> float:
        return np.pi / self.spacing

    def mirror(self, values: np.ndarray) -> np.ndarray:
        """x -> -x 的镜像，即下标 j -> (n - j) mod n"""
        axes = tuple(range(self.dim))
        return np.roll(np.flip(values, axis=axes), 1, axis=axes)

    def cell_index(self, positions: np.ndarray) -> np.ndarray:
        """粒子所在单元（最近节点）的扁平下标，越界位置按周期折回"""
        positions = np.asarray(positions, dtype=float).reshape(-1, self.dim)
        n = self.points_per_axis
        idx = np.floor((positions + self.half_width) / self.spacing + 0.5).astype(np.int64) % n
        return np.ravel_multi_index(tuple(idx.T), self.shape)


def make_grid(dim: int, half_width: float, points_per_axis: int) -> Grid:
    """构造网格，参数检查在 Grid 中完成"""
    grid = Grid(int(dim), float(half_width), int(points_per_axis))
    logger.debug(f"网格: dim={grid.dim}, L={grid.half_width}, n={grid.points_per_axis}, dx={grid.spacing}")
    return grid


@dataclass(frozen=True, eq=False)
class GridDensity:
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = np.array(self.values, dtype=float)
        if arr.size != self.grid.cell_count:
            raise InvalidParameter(f"密度数组大小 {arr.size} 与网格单元数 {self.grid.cell_count} 不符")
        arr = arr.reshape(self.grid.shape)
        if not np.all(np.isfinite(arr)):
            raise InvalidParameter("密度中含有 NaN 或 Inf")
        if np.any(arr < 0):
            raise InvalidParameter(f"密度含有负值，最小值 {arr.min():.3e}")
        arr.setflags(write=False)
        object.__setattr__(self, "values", arr)

    def mass(self) -> float:
        return mass(self)

    def max(self) -> float:
        return float(self.values.max())


def clamp_density(grid: Grid, values: np.ndarray, target_mass: float | None = None) -> tuple[GridDensity, float]:
    """将负值截断为0并重新缩放到原质量

    Returns:
        (密度, 被截断的负质量绝对值)
    """
    arr = np.asarray(values, dtype=float).reshape(grid.shape)
    total = float(arr.sum()) * grid.cell_volume if target_mass is None else float(target_mass)
    negative = arr < 0
    clamped = float(-arr[negative].sum()) * grid.cell_volume
    if clamped > 0:
        arr = np.where(negative, 0.0, arr)
        kept = float(arr.sum()) * grid.cell_volume
        if kept > 0 and total > 0:
            arr = arr * (total / kept)
    return GridDensity(grid, arr), clamped


def mass(f: GridDensity) -> float:
    """中点求积 dx^d * sum(values)"""
    return float(f.values.sum()) * f.grid.cell_volume


def lp_norm(values: np.ndarray, grid: Grid, p: float) -> float:
    arr = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return float(arr.max())
    if p < 1:
        raise InvalidParameter(f"范数指标 p 必须 >= 1，实际为 {p}")
    return float((grid.cell_volume * np.sum(arr ** p)) ** (1.0 / p))


def lp_distance(f: GridDensity, g: GridDensity, p: float = 1.0) -> float:
    """两个网格密度之间的 L^p 距离；p=1 即总变差距离（不带 1/2 因子）"""
    if f.grid != g.grid:
        raise GridMismatch(f"网格不一致: {f.grid} vs {g.grid}")
    return lp_norm(f.values - g.values, f.grid, p)


def tail_mass(f: GridDensity) -> float:
    """[-L/2, L/2]^d 之外的质量"""
    grid = f.grid
    outside = np.any(np.abs(grid.points) > grid.half_width / 2, axis=1).reshape(grid.shape)
    return float(f.values[outside].sum()) * grid.cell_volume


def gaussian_density(grid: Grid, sigma: float = 1.0, center=0.0, normalize: bool = False) -> GridDensity:
    """网格上采样的各向同性高斯密度"""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    r2 = np.sum((grid.points - center) ** 2, axis=1)
    values = np.exp(-r2 / (2.0 * sigma ** 2)) / (2.0 * np.pi * sigma ** 2) ** (grid.dim / 2.0)
    values = values.reshape(grid.shape)
    if normalize:
        values = values / (values.sum() * grid.cell_volume)
    return GridDensity(grid, values)


def uniform_bump_density(grid: Grid, width: float = 1.0, center=0.0) -> GridDensity:
    """|x - c|_inf <= width 上的均匀密度（不光滑初值），数值归一化"""
    center = np.broadcast_to(np.asarray(center, dtype=float), (grid.dim,))
    inside = np.all(np.abs(grid.points - center) <= width + 1e-12, axis=1).reshape(grid.shape)
    if not inside.any():
        raise InvalidParameter(f"均匀块宽度 {width} 小于网格间距 {grid.spacing}")
    values = inside.astype(float)
    return GridDensity(grid, values / (values.sum() * grid.cell_volume))


def histogram_density(grid: Grid, positions: np.ndarray) -> GridDensity:
    """点集按最近节点分箱（周期折回）得到的经验密度"""
    positions = np.asarray(positions, dtype=float).reshape(-1, grid.dim)
    if len(positions) == 0:
        raise InvalidParameter("点集为空")
    counts = np.bincount(grid.cell_index(positions), minlength=grid.cell_count)
    values = counts.astype(float) / (len(positions) * grid.cell_volume)
    return GridDensity(grid, values)


def outside_fraction(grid: Grid, positions: np.ndarray) -> float:
    """落在 [-L, L)^d 之外（需要周期折回）的点所占比例"""
    positions = np.asarray(positions, dtype=float).reshape(-1, grid.dim)
    L = grid.half_width
    outside = np.any((positions < -L - grid.spacing / 2) | (positions >= L - grid.spacing / 2), axis=1)
    return float(outside.mean()) if len(positions) else 0.0


def trig_eval(values: np.ndarray, grid: Grid, points: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """在任意点处计算网格函数的三角插值"""
    points = np.asarray(points, dtype=float).reshape(-1, grid.dim)
    n = grid.points_per_axis
    coeffs = np.fft.fftn(np.asarray(values, dtype=float).reshape(grid.shape)) / grid.cell_count
    xi = 2.0 * np.pi * np.fft.fftfreq(n, d=grid.spacing)
    shifted = points + grid.half_width
    out = np.empty(len(points))
    for start in range(0, len(points), chunk):
        block = shifted[start:start + chunk]
        if grid.dim == 1:
            phase = np.exp(1j * np.outer(block[:, 0], xi))
            out[start:start + chunk] = (phase @ coeffs).real
        else:
            e1 = np.exp(1j * np.outer(block[:, 0], xi))
            e2 = np.exp(1j * np.outer(block[:, 1], xi))
            out[start:start + chunk] = np.sum((e1 @ coeffs) * e2, axis=1).real
    return out


def sample_from_density(f: GridDensity, size: int, rng: np.random.Generator) -> np.ndarray:
    """按网格密度逆 CDF 抽样，单元内均匀抖动"""
    grid = f.grid
    p = f.values.ravel() / f.values.sum()
    idx = rng.choice(grid.cell_count, size=size, p=p)
    nodes = grid.points[idx]
    jitter = rng.uniform(-0.5, 0.5, size=(size, grid.dim)) * grid.spacing
    return nodes + jitter


def _coordinate_columns(grid: Grid) -> list:
    return ["x"] if grid.dim == 1 else [f"x{i + 1}" for i in range(grid.dim)]


def to_frame(f: GridDensity) -> pd.DataFrame:
    """坐标列 + value 列"""
    grid = f.grid
    frame = pd.DataFrame(grid.points, columns=_coordinate_columns(grid))
    frame["value"] = f.values.ravel()
    return frame


def write_csv(f: GridDensity, path) -> None:
    to_frame(f).to_csv(path, index=False, float_format="%.17g")


def read_csv(path, grid: Grid) -> GridDensity:
    """读回 write_csv 的文件；坐标列必须与 grid 的节点逐一相同"""
    frame = pd.read_csv(path, float_precision="round_trip")
    columns = _coordinate_columns(grid)
    missing = [c for c in columns + ["value"] if c not in frame.columns]
    if missing:
        raise GridMismatch(f"{path} 缺少列 {missing}")
    if len(frame) != grid.cell_count:
        raise GridMismatch(f"{path} 有 {len(frame)} 行，网格有 {grid.cell_count} 个节点")
    coords = frame[columns].to_numpy(dtype=float)
    if not np.array_equal(coords, grid.points):
        worst = float(np.max(np.abs(coords - grid.points)))
        raise GridMismatch(f"{path} 的坐标与网格节点不一致，最大偏差 {worst:.3e}")
    return GridDensity(grid, frame["value"].to_numpy(dtype=float))


def write_binary(f: GridDensity, path) -> None:
    """头部: dim, L, n（小端64位），随后为行主序 float64 数值"""
    grid = f.grid
    with open(path, "wb") as fh:
        fh.write(np.array([grid.dim], dtype="<i8").tobytes())
        fh.write(np.array([grid.half_width], dtype="<f8").tobytes())
        fh.write(np.array([grid.points_per_axis], dtype="<i8").tobytes())
        fh.write(np.ascontiguousarray(f.values, dtype="<f8").tobytes())


def read_binary(path) -> GridDensity:
    with open(path, "rb") as fh:
        raw = fh.read()
    dim = int(np.frombuffer(raw[0:8], dtype="<i8")[0])
    half_width = float(np.frombuffer(raw[8:16], dtype="<f8")[0])
    n = int(np.frombuffer(raw[16:24], dtype="<i8")[0])
    grid = make_grid(dim, half_width, n)
    values = np.frombuffer(raw[24:], dtype="<f8")
    return GridDensity(grid, values)


@dataclass(frozen=True)
class DensitySeries:
    """按时间排列的一组网格密度"""
    times: tuple
    densities: tuple

    def __post_init__(self):
        times = tuple(float(t) for t in self.times)
        if len(times) != len(self.densities):
            raise InvalidParameter("时间数与密度数不一致")
        if any(b <= a for a, b in zip(times, times[1:])):
            raise NonMonotoneTimes(f"时间必须严格递增: {times}")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "densities", tuple(self.densities))

    @property
    def grid(self) -> Grid:
        return self.densities[0].grid

    def index_of(self, t: float, rtol: float = 1e-9) -> int:
        for i, s in enumerate(self.times):
            if abs(s - t) <= rtol * max(1.0, abs(t)):
                return i
        raise InvalidParameter(f"轨迹中没有时间 t={t}")

    def has_time(self, t: float) -> bool:
        try:
            self.index_of(t)
            return True
        except InvalidParameter:
            return False

    def at(self, t: float) -> GridDensity:
        return self.densities[self.index_of(t)]
