# -*- coding: utf-8 -*-
"""
漂移系数 b(t, x, u)

求值函数统一为向量化形式 evaluator(t, x, u)：x 形状 (m, d)，u 形状 (m,)，返回 (m, d)。
内置漂移通过名称注册，只有内置漂移可以写进配置文件。
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Callable

import numpy as np
from scipy.stats import qmc

from errors import ConfigError, DriftViolatesH, InvalidParameter, NegativeDensityInput

logger = logging.getLogger(__name__)

# pi_h 的浮点容差，保证恰好落在 jh 上的时间映射到 jh
PI_H_EPS = 1e-12

_GAUSS_NODES, _GAUSS_WEIGHTS = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class DriftSpec:
    evaluator: Callable
    kappa: float
    label: str = "custom"
    # 与时间无关时位移积分直接取 (t1 - t0) * b
    autonomous: bool = False
    options: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.kappa >= 0 or not np.isfinite(self.kappa):
            raise InvalidParameter(f"kappa 必须为非负有限数，实际为 {self.kappa}")

    def __call__(self, t, x, u):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        u = np.broadcast_to(np.asarray(u, dtype=float), (x.shape[0],))
        return np.asarray(self.evaluator(t, x, u), dtype=float).reshape(x.shape)

    def to_config(self) -> dict:
        return {"kind": self.label, **self.options}


@dataclass(frozen=True)
class DriftReport:
    """validate_drift 的结果"""
    max_abs: float
    max_lipschitz: float
    kappa: float
    samples: int

    @property
    def passed(self) -> bool:
        limit = self.kappa * (1.0 + 1e-9)
        return self.max_abs <= limit and self.max_lipschitz <= limit

    def to_dict(self) -> dict:
        return {"max_abs": self.max_abs, "max_lipschitz": self.max_lipschitz,
                "kappa": self.kappa, "samples": self.samples, "passed": self.passed}


# ---- 方向场 v(x)，|v| <= 1 ----

def _sine_field(x):
    return np.sin(x) / math.sqrt(x.shape[1])


def _tanh_field(x):
    return -np.tanh(x) / math.sqrt(x.shape[1])


def _constant_field(x):
    v = np.zeros_like(x)
    v[:, 0] = 1.0
    return v


DIRECTION_FIELDS = MappingProxyType({
    "sine": _sine_field,
    "tanh": _tanh_field,
    "constant": _constant_field,
})


def _direction(name: str):
    try:
        return DIRECTION_FIELDS[name]
    except KeyError:
        raise InvalidParameter(f"未知方向场: {name}，可选 {sorted(DIRECTION_FIELDS)}") from None


# ---- 内置漂移 ----

def zero_drift() -> DriftSpec:
    return DriftSpec(lambda t, x, u: np.zeros_like(x), 0.0, "zero", autonomous=True)


def autonomous_drift(kappa: float, direction: str = "tanh") -> DriftSpec:
    """b = kappa * v(x)，与密度无关"""
    v = _direction(direction)
    return DriftSpec(lambda t, x, u: kappa * v(x), kappa, "autonomous", autonomous=True,
                     options={"kappa": kappa, "direction": direction})


def nemytskii_sat(kappa: float, direction: str = "sine") -> DriftSpec:
    """b = kappa * v(x) * u / (1 + u)"""
    v = _direction(direction)
    return DriftSpec(lambda t, x, u: kappa * v(x) * (u / (1.0 + u))[:, None], kappa, "nemytskii_sat",
                     autonomous=True, options={"kappa": kappa, "direction": direction})


def nemytskii_trunc(kappa: float, direction: str = "sine") -> DriftSpec:
    """b = v(x) * min(u, kappa)；关于 u 的 Lipschitz 常数为1，故声明 max(kappa, 1)"""
    v = _direction(direction)
    return DriftSpec(lambda t, x, u: v(x) * np.minimum(u, kappa)[:, None], max(kappa, 1.0), "nemytskii_trunc",
                     autonomous=True, options={"kappa": kappa, "direction": direction})


def unbounded_linear(direction: str = "sine") -> DriftSpec:
    """b = u * v(x)，无界，只用于违反条件的检查"""
    v = _direction(direction)
    return DriftSpec(lambda t, x, u: v(x) * u[:, None], 1.0, "unbounded_linear", autonomous=True,
                     options={"direction": direction})


BUILTIN_DRIFTS = MappingProxyType({
    "zero": zero_drift,
    "autonomous": autonomous_drift,
    "nemytskii_sat": nemytskii_sat,
    "nemytskii_trunc": nemytskii_trunc,
    "unbounded_linear": unbounded_linear,
})

# 每种内置漂移允许的配置键
_DRIFT_KEYS = {
    "zero": set(),
    "autonomous": {"kappa", "direction"},
    "nemytskii_sat": {"kappa", "direction"},
    "nemytskii_trunc": {"kappa", "direction"},
    "unbounded_linear": {"direction"},
}


def drift_from_config(table: dict) -> DriftSpec:
    """由配置表 {kind, kappa, direction} 构造内置漂移"""
    table = dict(table)
    kind = table.pop("kind", None)
    if kind not in BUILTIN_DRIFTS:
        raise ConfigError(f"未知漂移类型: {kind}，可选 {sorted(BUILTIN_DRIFTS)}")
    unknown = set(table) - _DRIFT_KEYS[kind]
    if unknown:
        raise ConfigError(f"漂移 {kind} 不支持的配置键: {sorted(unknown)}")
    try:
        return BUILTIN_DRIFTS[kind](**table)
    except (TypeError, InvalidParameter) as e:
        raise ConfigError(f"漂移配置无效: {e}") from e


# ---- 时间投影与冻结漂移 ----

def step_index(s: float, h: float) -> int:
    if s < 0 or not h > 0:
        raise InvalidParameter(f"要求 s >= 0 且 h > 0，实际为 s={s}, h={h}")
    return int(math.floor(s / h + PI_H_EPS))


def pi_h(s: float, h: float) -> float:
    """满足 jh <= s < (j+1)h 的 jh"""
    return step_index(s, h) * h


def _check_density_input(u) -> None:
    if np.any(np.asarray(u) < 0):
        raise NegativeDensityInput(f"密度值为负: min={np.min(u):.3e}，调用方需先截断")


def eval_bh(drift: DriftSpec, s: float, x, u_at_pi, h: float) -> np.ndarray:
    """格式漂移 b^h(s, x)：第一步内为零，之后用 pi_h(s) 时刻的密度值"""
    _check_density_input(u_at_pi)
    single = np.ndim(x) <= 1
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if step_index(s, h) < 1:
        out = np.zeros_like(points)
    else:
        out = drift(s, points, u_at_pi)
    return out[0] if single else out


def partial_displacement(drift: DriftSpec, t0: float, t1: float, x, u) -> np.ndarray:
    """冻结 (x, u) 时 int_{t0}^{t1} b(s, x, u) ds，3点 Gauss-Legendre"""
    points = np.atleast_2d(np.asarray(x, dtype=float))
    if t1 < t0:
        raise InvalidParameter(f"积分区间无效: [{t0}, {t1}]")
    if t1 == t0:
        return np.zeros_like(points)
    width = t1 - t0
    if drift.autonomous:
        return width * drift(t0, points, u)
    mid = (t0 + t1) / 2.0
    total = np.zeros_like(points)
    for node, weight in zip(_GAUSS_NODES, _GAUSS_WEIGHTS):
        total += weight * drift(mid + node * width / 2.0, points, u)
    return total * (width / 2.0)


def step_displacement(drift: DriftSpec, k: int, h: float, x, u) -> np.ndarray:
    """第 k 步 [kh, (k+1)h] 上的漂移位移 D_k(x)"""
    if k < 1:
        raise InvalidParameter(f"第0步没有漂移，k 必须 >= 1，实际为 {k}")
    _check_density_input(u)
    single = np.ndim(x) <= 1
    out = partial_displacement(drift, k * h, (k + 1) * h, x, u)
    return out[0] if single else out


def validate_drift(drift: DriftSpec, sample_count: int = 4096, dim: int = 1, box: float = 10.0,
                   t_max: float = 1.0, u_max: float = 10.0, raise_on_violation: bool = True) -> DriftReport:
    """用 Sobol 拟随机点检查 |b| <= kappa 与关于 u 的 Lipschitz 条件"""
    m = max(int(math.ceil(math.log2(max(sample_count, 2)))), 1)
    sampler = qmc.Sobol(d=dim + 3, scramble=True, seed=0)
    raw = sampler.random_base2(m)
    t = raw[:, 0] * t_max
    x = (2.0 * raw[:, 1:1 + dim] - 1.0) * box
    u1 = raw[:, 1 + dim] * u_max
    u2 = raw[:, 2 + dim] * u_max

    max_abs = 0.0
    max_lip = 0.0
    # 按时间逐点求值，求值函数的 t 为标量
    for ti in np.unique(t) if not drift.autonomous else [0.0]:
        mask = (t == ti) if not drift.autonomous else slice(None)
        b1 = drift(ti, x[mask], u1[mask])
        b2 = drift(ti, x[mask], u2[mask])
        max_abs = max(max_abs, float(np.linalg.norm(b1, axis=1).max()), float(np.linalg.norm(b2, axis=1).max()))
        du = np.abs(u1[mask] - u2[mask])
        ok = du > 1e-12
        if ok.any():
            quot = np.linalg.norm(b1 - b2, axis=1)[ok] / du[ok]
            max_lip = max(max_lip, float(quot.max()))

    report = DriftReport(max_abs, max_lip, float(drift.kappa), len(raw))
    logger.info(f"漂移检查 {drift.label}: max|b|={max_abs:.4g}, Lipschitz={max_lip:.4g}, kappa={drift.kappa}")
    if raise_on_violation and not report.passed:
        raise DriftViolatesH(f"漂移 {drift.label} 违反条件: max|b|={max_abs:.4g}, Lipschitz={max_lip:.4g}, "
                             f"kappa={drift.kappa}", report=report)
    return report
