# -*- coding: utf-8 -*-
"""
对称旋转不变 alpha-稳定过程的精确抽样

特征函数约定: E exp(i xi . L_t) = exp(-t |xi|^alpha)，
即分数阶拉普拉斯的 Fourier 乘子为 -|xi|^alpha。所有模块共用此约定。
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from errors import InvalidParameter, NonMonotoneTimes

logger = logging.getLogger(__name__)

# 随机流用途编号
PURPOSE_INITIAL = 1
PURPOSE_INCREMENT = 2
PURPOSE_GENERIC = 3


@dataclass(frozen=True)
class StableParams:
    alpha: float
    dim: int = 1
    # 仅用于 alpha=1 / alpha=2 的闭式核对照检查
    pipeline_check: bool = field(default=False, repr=False)

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise InvalidParameter(f"维数必须为1或2，实际为 {self.dim}")
        if self.pipeline_check:
            if not 1.0 <= self.alpha <= 2.0:
                raise InvalidParameter(f"对照检查的 alpha 必须在 [1,2]，实际为 {self.alpha}")
        elif not 1.0 < self.alpha < 2.0:
            raise InvalidParameter(f"alpha 必须在开区间 (1,2)，实际为 {self.alpha}")

    @property
    def rate(self) -> float:
        """理论收敛阶 (alpha-1)/alpha"""
        return (self.alpha - 1.0) / self.alpha


@dataclass(frozen=True)
class RngStream:
    """基于计数器的随机流，(seed, stream_id) 相同则抽样逐位相同"""
    seed: int
    stream_id: int = 0

    def generator(self) -> np.random.Generator:
        return stream_generator(self.seed, self.stream_id)


def stream_generator(seed: int, stream_id: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(seed) & (2 ** 64 - 1), spawn_key=(int(stream_id) & (2 ** 64 - 1),))
    return np.random.Generator(np.random.Philox(seq))


def derive_stream_id(purpose: int, step: int, block: int = 0) -> int:
    """由 (用途, 步序号, 粒子块号) 导出 64 位流编号"""
    return ((purpose & 0xFF) << 56) | ((step & 0xFFFFFFFF) << 24) | (block & 0xFFFFFF)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    raise InvalidParameter(f"不支持的随机源类型: {type(rng)}")


def _check_time(t: float) -> None:
    if not t > 0:
        raise InvalidParameter(f"时间 t 必须为正，实际为 {t}")


def sample_sym_stable_1d(params: StableParams, t: float, rng, size=None):
    """一维对称稳定变量，Chambers-Mallows-Stuck 变换后乘以 t^{1/alpha}"""
    if params.dim != 1:
        raise InvalidParameter("sample_sym_stable_1d 仅适用于 dim=1")
    _check_time(t)
    gen = as_generator(rng)
    a = params.alpha
    v = gen.uniform(-np.pi / 2, np.pi / 2, size=size)
    w = gen.exponential(1.0, size=size)
    x = np.sin(a * v) / np.cos(v) ** (1.0 / a) * (np.cos((1.0 - a) * v) / w) ** ((1.0 - a) / a)
    return t ** (1.0 / a) * x


def sample_subordinator(alpha_half: float, t: float, rng, size=None):
    """单侧 alpha/2-稳定从属子，E exp(-lam S_t) = exp(-t lam^{alpha/2})

    采用 Kanter 表示，U ~ U(0, pi)，W ~ Exp(1)。
    """
    if not 0.5 < alpha_half < 1.0:
        raise InvalidParameter(f"alpha/2 必须在 (1/2, 1)，实际为 {alpha_half}")
    _check_time(t)
    gen = as_generator(rng)
    a = alpha_half
    u = gen.uniform(0.0, np.pi, size=size)
    w = gen.exponential(1.0, size=size)
    s = np.sin(a * u) / np.sin(u) ** (1.0 / a) * (np.sin((1.0 - a) * u) / w) ** ((1.0 - a) / a)
    return t ** (1.0 / a) * s


def sample_rot_invariant(params: StableParams, t: float, rng, size=None, method: str = "auto"):
    """旋转不变稳定向量

    method: "auto"（dim=1 用 CMS，否则从属化）、"cms"、"subordination"。
    从属化: L_t = W_{S_t}，W 的生成元为拉普拉斯算子（每分量方差 2s）。

    Returns:
        size=None 时形状 (dim,)，否则 (size, dim)
    """
    _check_time(t)
    gen = as_generator(rng)
    if method == "auto":
        method = "cms" if params.dim == 1 else "subordination"
    count = 1 if size is None else int(size)
    if method == "cms":
        if params.dim != 1:
            raise InvalidParameter("CMS 直接抽样仅支持 dim=1")
        draws = np.asarray(sample_sym_stable_1d(params, t, gen, size=count)).reshape(count, 1)
    elif method == "subordination":
        s = np.asarray(sample_subordinator(params.alpha / 2.0, t, gen, size=count))
        draws = np.sqrt(2.0 * s)[:, None] * gen.standard_normal((count, params.dim))
    else:
        raise InvalidParameter(f"未知抽样方法: {method}")
    return draws[0] if size is None else draws


def increment_path(params: StableParams, times, rng, size=None):
    """相邻时间点之间的独立增量 L_{t_k} - L_{t_{k-1}}（t_{-1}=0）

    Returns:
        size=None 时形状 (len(times), dim)，否则 (len(times), size, dim)
    """
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return np.empty((0, params.dim)) if size is None else np.empty((0, int(size), params.dim))
    if times[0] <= 0:
        raise InvalidParameter(f"第一个时间点必须为正，实际为 {times[0]}")
    if np.any(np.diff(times) <= 0):
        raise NonMonotoneTimes(f"时间必须严格递增: {times.tolist()}")
    gen = as_generator(rng)
    gaps = np.diff(np.concatenate([[0.0], times]))
    return np.stack([sample_rot_invariant(params, gap, gen, size=size) for gap in gaps])


def empirical_char_function(draws: np.ndarray, xi) -> complex:
    """经验特征函数 mean(exp(i xi . L))"""
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws[:, None]
    xi = np.broadcast_to(np.asarray(xi, dtype=float), (draws.shape[1],))
    return complex(np.mean(np.exp(1j * draws @ xi)))


def moment_growth(draws: np.ndarray, gamma: float) -> tuple[float, float]:
    """前一半样本与全部样本的 E|L|^gamma 估计，用于观察矩是否有限"""
    draws = np.asarray(draws, dtype=float)
    norms = np.abs(draws) if draws.ndim == 1 else np.linalg.norm(draws, axis=1)
    half = len(norms) // 2
    return float(np.mean(norms[:half] ** gamma)), float(np.mean(norms ** gamma))
