# -*- coding: utf-8 -*-
"""
Euler-Maruyama 格式密度 rho^h 的确定性网格演化

一步映射: 每个单元的质量沿 x + D_k(x) 推移，再与 q_alpha(h) 卷积。
D_k 中的密度值取该单元在 kh 时刻自身的值。

两条计算路径:
- fast:   质量线性分配到目标点两侧（二维为四角）的单元，再做 FFT 卷积
- direct: 对 sum_x q(h, y - x - D(x)) rho(x) dx 直接求和（非均匀 DFT，O(n^{2d})）
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
import pandas as pd

from drift import DriftSpec, partial_displacement, pi_h, step_index
from errors import InvalidParameter, MassLeak
from grid import (DEFAULT_NUMERICS, DensitySeries, Grid, GridDensity, NumericsConfig, clamp_density,
                  lp_distance, lp_norm, tail_mass, trig_eval)
from heat_kernel import (CLAMP_WARN_LIMIT, check_domain, convolve_values, hessian_sup_norm, kernel_symbol,
                         spectral_gradient)
from stable_noise import StableParams

logger = logging.getLogger(__name__)

PATHS = ("fast", "direct")
# 直接求和时每块处理的单元数
DIRECT_CHUNK = 2048


@dataclass
class SchemeStats:
    """一次演化的数值守卫统计"""
    steps: int = 0
    clamped_mass: float = 0.0
    wrapped_mass: float = 0.0
    max_tail_mass: float = 0.0

    def to_dict(self) -> dict:
        return {"steps": self.steps, "clamped_mass": self.clamped_mass,
                "wrapped_mass": self.wrapped_mass, "max_tail_mass": self.max_tail_mass}


@dataclass(frozen=True)
class SchemeTrajectory(DensitySeries):
    params: StableParams = None
    drift: DriftSpec = None
    h: float = 0.0
    path: str = "fast"
    stats: SchemeStats = field(default_factory=SchemeStats, compare=False)


def _validate_path(path: str) -> None:
    if path not in PATHS:
        raise InvalidParameter(f"未知计算路径: {path}，可选 {PATHS}")


def _displacement(rho: GridDensity, drift: DriftSpec, t0: float, t1: float, h: float) -> np.ndarray:
    """[t0, t1] 上的位移场，第一步内 b^h = 0"""
    grid = rho.grid
    if step_index(t0, h) < 1 or t1 <= t0:
        return np.zeros((grid.cell_count, grid.dim))
    return partial_displacement(drift, t0, t1, grid.points, rho.values.ravel())


def _outgoing_mass(rho: GridDensity, targets: np.ndarray) -> float:
    """目标点落在 [-L, L)^d 之外（被周期折回）的质量"""
    grid = rho.grid
    L = grid.half_width
    half = grid.spacing / 2.0
    outside = np.any((targets < -L - half) | (targets >= L - half), axis=1)
    return float(rho.values.ravel()[outside].sum()) * grid.cell_volume


def redistribute(rho: GridDensity, displacement: np.ndarray) -> tuple[np.ndarray, float]:
    """质量守恒的线性推移 x -> x + D(x)

    Returns:
        (推移后的网格值, 越过周期边界的质量)
    """
    grid = rho.grid
    n = grid.points_per_axis
    weights = rho.values.ravel() * grid.cell_volume
    pos = (grid.points + displacement + grid.half_width) / grid.spacing
    base = np.floor(pos).astype(np.int64)
    frac = pos - base

    out = np.zeros(grid.cell_count)
    wrapped = 0.0
    for corner in range(2 ** grid.dim):
        offsets = np.array([(corner >> j) & 1 for j in range(grid.dim)])
        idx = base + offsets
        w = weights * np.prod(np.where(offsets == 1, frac, 1.0 - frac), axis=1)
        crossing = np.any((idx < 0) | (idx >= n), axis=1)
        wrapped += float(w[crossing].sum())
        flat = np.ravel_multi_index(tuple((idx % n).T), grid.shape)
        out += np.bincount(flat, weights=w, minlength=grid.cell_count)
    return out.reshape(grid.shape) / grid.cell_volume, wrapped


def shifted_spectrum(weights: np.ndarray, targets: np.ndarray, grid: Grid, sign: float = -1.0) -> np.ndarray:
    """sum_c w_c dx^d exp(sign * i xi . z_c)，FFT 顺序

    weights 可带额外的前导维（向量值权重），形状 (..., cell_count)。
    """
    xi = 2.0 * np.pi * np.fft.fftfreq(grid.points_per_axis, d=grid.spacing)
    weights = np.asarray(weights, dtype=float)
    lead = weights.shape[:-1]
    out = np.zeros(lead + grid.shape, dtype=complex)
    for start in range(0, targets.shape[0], DIRECT_CHUNK):
        z = targets[start:start + DIRECT_CHUNK]
        w = weights[..., start:start + DIRECT_CHUNK] * grid.cell_volume
        e1 = np.exp(sign * 1j * np.outer(z[:, 0], xi))
        if grid.dim == 1:
            out += w @ e1
        else:
            e2 = np.exp(sign * 1j * np.outer(z[:, 1], xi))
            out += np.swapaxes(w[..., :, None] * e1, -1, -2) @ e2
    return out


def _origin_phase(grid: Grid, sign: float) -> np.ndarray:
    """exp(sign * i xi . (L, ..., L))"""
    return np.exp(sign * 1j * grid.half_width * sum(grid.wave_vectors))


def _direct_values(rho: GridDensity, targets: np.ndarray, tau: float, params: StableParams) -> np.ndarray:
    grid = rho.grid
    spectrum = shifted_spectrum(rho.values.ravel(), targets, grid, sign=-1.0)
    coeffs = kernel_symbol(params, tau, grid) * spectrum * _origin_phase(grid, -1.0)
    return np.fft.ifftn(coeffs).real / grid.cell_volume


def _advance(rho: GridDensity, drift: DriftSpec, t0: float, t1: float, h: float, params: StableParams,
             numerics: NumericsConfig, path: str, stats: SchemeStats | None) -> GridDensity:
    """从 t0（格点时间）推进到 t1 <= t0 + h"""
    grid = rho.grid
    tau = t1 - t0
    check_domain(params, tau, grid, numerics)
    displacement = _displacement(rho, drift, t0, t1, h)
    if path == "fast":
        moved, wrapped = redistribute(rho, displacement)
        values = convolve_values(params, tau, moved, grid)
    else:
        targets = grid.points + displacement
        wrapped = _outgoing_mass(rho, targets)
        values = _direct_values(rho, targets, tau, params)
    out, clamped = clamp_density(grid, values, target_mass=rho.mass())
    if clamped > CLAMP_WARN_LIMIT * max(rho.mass(), 1e-300):
        logger.warning(f"t={t1:.6g} 截断负质量 {clamped:.3e}")
    if stats is not None:
        stats.clamped_mass += clamped
        stats.wrapped_mass += wrapped
        stats.max_tail_mass = max(stats.max_tail_mass, tail_mass(out))
        if stats.wrapped_mass > numerics.tau_mass:
            raise MassLeak(f"累计跨周期边界质量 {stats.wrapped_mass:.3e} 超过 tau_mass={numerics.tau_mass}")
    return out


def em_density_step(rho_k: GridDensity, drift: DriftSpec, k: int, h: float, params: StableParams,
                    numerics: NumericsConfig = DEFAULT_NUMERICS, path: str = "fast",
                    stats: SchemeStats | None = None) -> GridDensity:
    """rho^h_{kh} -> rho^h_{(k+1)h}，k >= 1"""
    _validate_path(path)
    if k < 1:
        raise InvalidParameter(f"k 必须 >= 1（第0步为纯卷积），实际为 {k}")
    if stats is None:
        stats = SchemeStats()
    return _advance(rho_k, drift, k * h, (k + 1) * h, h, params, numerics, path, stats)


def _output_schedule(h: float, T: float, output_times, keep_grid_times: bool) -> list[float]:
    n_steps = step_index(T, h)
    times = {0.0, float(T)}
    if keep_grid_times:
        times.update(j * h for j in range(1, n_steps + 1))
    for t in output_times or ():
        if not 0 <= t <= T * (1 + 1e-12):
            raise InvalidParameter(f"输出时间 {t} 超出 [0, {T}]")
        times.add(float(t))
    # 合并浮点上几乎相同的时间
    merged = []
    for t in sorted(times):
        if merged and abs(t - merged[-1]) <= 1e-12 * max(1.0, t):
            continue
        merged.append(t)
    return merged


def em_density_evolve(rho_0: GridDensity, drift: DriftSpec, h: float, T: float, params: StableParams,
                      output_times=None, numerics: NumericsConfig = DEFAULT_NUMERICS, path: str = "fast",
                      keep_grid_times: bool = True) -> SchemeTrajectory:
    """演化格式密度到时刻 T

    第一步 [0, h] 为纯卷积；格点时间之间的输出时刻用部分位移与 q_alpha(t - kh) 计算。
    """
    _validate_path(path)
    if not 0 < h < 1:
        raise InvalidParameter(f"步长 h 必须在 (0,1)，实际为 {h}")
    if not T > 0:
        raise InvalidParameter(f"终止时间 T 必须为正，实际为 {T}")
    schedule = _output_schedule(h, T, output_times, keep_grid_times)
    n_steps = step_index(T, h)
    stats = SchemeStats()
    logger.debug(f"EM 密度演化: alpha={params.alpha}, h={h}, T={T}, 步数={n_steps}, 路径={path}")

    stored = {0.0: rho_0}
    pending = [t for t in schedule if t > 0]
    current = rho_0
    for k in range(n_steps + 1):
        t0 = k * h
        # 当前步内（不含右端点）的非格点输出
        while pending and pending[0] < (k + 1) * h - 1e-12 * max(1.0, (k + 1) * h):
            t = pending.pop(0)
            if abs(t - t0) <= 1e-12 * max(1.0, t0):
                stored[t] = current
            else:
                stored[t] = _advance(current, drift, t0, t, h, params, numerics, path, None)
        if k == n_steps or not pending:
            break
        current = _advance(current, drift, t0, (k + 1) * h, h, params, numerics, path, stats)
        stats.steps += 1
        if pending and abs(pending[0] - (k + 1) * h) <= 1e-12 * max(1.0, (k + 1) * h):
            stored[pending.pop(0)] = current

    times = sorted(stored)
    for t in times:
        m = stored[t].mass()
        if abs(m - rho_0.mass()) > numerics.tau_mass:
            raise MassLeak(f"t={t} 的质量 {m:.6f} 偏离初值 {rho_0.mass():.6f}")
    if stats.max_tail_mass > numerics.tau_mass:
        logger.warning(f"[-L/2, L/2] 外的最大质量 {stats.max_tail_mass:.3e} 超过 tau_mass={numerics.tau_mass}")
    return SchemeTrajectory(times=tuple(times), densities=tuple(stored[t] for t in times),
                            params=params, drift=drift, h=h, path=path, stats=stats)


# ---- 关于 rho^h 的可执行估计 ----

def _drift_gradient_term(rho_k: GridDensity, drift: DriftSpec, kh: float, s: float, tau: float,
                         params: StableParams) -> np.ndarray:
    """y -> sum_x rho_k(x) b(s, x, rho_k(x)) . grad q(tau, x + D_s(x) - y) dx"""
    grid = rho_k.grid
    u = rho_k.values.ravel()
    targets = grid.points + partial_displacement(drift, kh, s, grid.points, u)
    flux = (u[:, None] * drift(s, grid.points, u)).T
    amplitude = shifted_spectrum(flux, targets, grid, sign=1.0)
    symbol = kernel_symbol(params, tau, grid)
    phase = _origin_phase(grid, 1.0)
    coeffs = sum(1j * grid.wave_vectors[j] * amplitude[j] for j in range(grid.dim)) * symbol * phase
    return np.fft.fftn(coeffs).real / (2.0 * grid.half_width) ** grid.dim


def duhamel_residual(traj: SchemeTrajectory, t: float, quad_substeps: int = 8) -> float:
    """rho^h_t 与 Duhamel 右端重构之差的 L^1 范数

    s 方向在每个 EM 步内用 quad_substeps 个左端点求积；需要轨迹保存所有格点时间。
    """
    if quad_substeps < 1:
        raise InvalidParameter(f"quad_substeps 必须 >= 1，实际为 {quad_substeps}")
    params, drift, h = traj.params, traj.drift, traj.h
    grid = traj.grid
    rho_t = traj.at(t)
    rho_0 = traj.densities[0]
    rebuilt = convolve_values(params, t, rho_0.values, grid)
    k_last = step_index(t, h)
    for k in range(1, k_last + 1):
        kh = k * h
        end = min(kh + h, t)
        if end <= kh:
            continue
        rho_k = traj.at(kh)
        ds = (end - kh) / quad_substeps
        for i in range(quad_substeps):
            s = kh + i * ds
            rebuilt = rebuilt + ds * _drift_gradient_term(rho_k, drift, kh, s, t - kh, params)
    return lp_norm(rho_t.values - rebuilt, grid, 1)


def check_uniform_bound(traj: SchemeTrajectory, rho_0: GridDensity, params: StableParams,
                        floor: float = 1e-12) -> float:
    """max_{t, y} rho^h_t(y) / (q(t) * rho_0)(y)，只取分母大于 floor 的点"""
    ratio = 0.0
    for t, rho in zip(traj.times, traj.densities):
        if t <= 0:
            continue
        free = convolve_values(params, t, rho_0.values, rho_0.grid)
        mask = free > floor
        if mask.any():
            ratio = max(ratio, float(np.max(rho.values[mask] / free[mask])))
    return ratio


def holder_ratio(traj: SchemeTrajectory, s: float, t: float, p: float = 1.0,
                 params: StableParams | None = None) -> float:
    """||rho_s - rho_t||_p |t-s|^{-(a-1)/a} s^{(a-1)/a} / ||rho_0||_p"""
    if s == t:
        return 0.0
    s, t = min(s, t), max(s, t)
    rate = (params or traj.params).rate
    grid = traj.grid
    diff = lp_distance(traj.at(s), traj.at(t), p)
    return diff * (t - s) ** (-rate) * s ** rate / lp_norm(traj.densities[0].values, grid, p)


def time_holder_modulus(traj: SchemeTrajectory, params: StableParams, p: float = 1.0, pairs=None) -> pd.DataFrame:
    """二进对 (s, 2s) 上的时间 Holder 比值表"""
    if pairs is None:
        pairs = []
        s = traj.h
        while traj.has_time(2 * s):
            if traj.has_time(s):
                pairs.append((s, 2 * s))
            s *= 2
    rows = []
    for s, t in pairs:
        if s < traj.h:
            raise InvalidParameter(f"要求 s >= h，实际为 s={s}, h={traj.h}")
        rows.append({"s": s, "t": t, "p": p, "ratio": holder_ratio(traj, s, t, p, params)})
    return pd.DataFrame(rows, columns=["s", "t", "p", "ratio"])


def pointwise_holder_check(traj: SchemeTrajectory, rho_0: GridDensity, params: StableParams, beta: float,
                           pairs=None, floor: float = 1e-12) -> float:
    """|rho_t - rho_s|(y) / (|t-s|^{beta/a} s^{-beta/a} ((q(t)+q(s)) * rho_0)(y)) 的最大值

    beta 取 (0, alpha-1]。
    """
    if not 0 < beta <= params.alpha - 1 + 1e-12:
        raise InvalidParameter(f"beta 必须在 (0, alpha-1]，实际为 {beta}")
    if pairs is None:
        grid_times = [t for t in traj.times if t >= traj.h]
        pairs = list(zip(grid_times, grid_times[1:]))
    grid = traj.grid
    worst = 0.0
    for s, t in pairs:
        bound = (convolve_values(params, t, rho_0.values, grid) + convolve_values(params, s, rho_0.values, grid))
        bound = bound * abs(t - s) ** (beta / params.alpha) * s ** (-beta / params.alpha)
        mask = bound > floor
        if not mask.any():
            continue
        diff = np.abs(traj.at(t).values - traj.at(s).values)
        worst = max(worst, float(np.max(diff[mask] / bound[mask])))
    return worst


def lr_bound_check(traj: SchemeTrajectory, rho_0: GridDensity, params: StableParams) -> float:
    """max_t sup rho^h_t / sup (q(t) * rho_0)"""
    worst = 0.0
    for t, rho in zip(traj.times, traj.densities):
        if t <= 0:
            continue
        worst = max(worst, rho.max() / float(convolve_values(params, t, rho_0.values, rho_0.grid).max()))
    return worst


def _power_integral(sup_f: float, sup_hess: float, params: StableParams, dim: int) -> float:
    """int min(A, |y|^2 B) |y|^{-d-a} dy，在 r* = sqrt(A/B) 处分段"""
    if sup_f <= 0 or sup_hess <= 0:
        return 0.0
    a = params.alpha
    sphere = 2.0 if dim == 1 else 2.0 * math.pi
    r_star = math.sqrt(sup_f / sup_hess)
    return sphere * (sup_hess * r_star ** (2.0 - a) / (2.0 - a) + sup_f * r_star ** (-a) / a)


def lemma21_check(f1, f2, traj: SchemeTrajectory, s: float, params: StableParams) -> dict:
    """一步期望界: |E f1(X_pi)(f2(X_s) - f2(X_pi))| 与 h||f1||(||grad f2|| kappa + I) 的比较

    f1、f2 为网格上的数组；期望对 rho^h_{pi_h(s)} 与 q(s - pi_h(s)) 做确定性积分。
    """
    h = traj.h
    if not s > h:
        raise InvalidParameter(f"要求 s > h，实际为 s={s}, h={h}")
    grid = traj.grid
    f1 = np.asarray(f1, dtype=float).reshape(grid.shape)
    f2 = np.asarray(f2, dtype=float).reshape(grid.shape)
    start = pi_h(s, h)
    delta = s - start
    rho = traj.at(start)
    if delta > 0:
        smoothed = convolve_values(params, delta, f2, grid)
        displacement = _displacement(rho, traj.drift, start, s, h)
        moved = trig_eval(smoothed, grid, grid.points + displacement).reshape(grid.shape)
    else:
        moved = f2
    lhs = abs(float(np.sum(rho.values * f1 * (moved - f2))) * grid.cell_volume)

    grad_sup = float(np.max(np.linalg.norm(spectral_gradient(f2, grid), axis=0)))
    integral = _power_integral(float(np.abs(f2).max()), hessian_sup_norm(f2, grid), params, grid.dim)
    rhs = h * float(np.abs(f1).max()) * (grad_sup * traj.drift.kappa + integral)
    ratio = lhs / rhs if rhs > 0 else 0.0
    return {"lhs": lhs, "rhs": rhs, "ratio": ratio, "delta": delta}


def self_convergence_ladder(rho_0: GridDensity, drift: DriftSpec, h_ladder, T: float, params: StableParams,
                            numerics: NumericsConfig = DEFAULT_NUMERICS, path: str = "fast",
                            cache: dict | None = None) -> pd.DataFrame:
    """||rho^h_T - rho^{h/2}_T||_1 沿二进步长序列

    cache 为 {h: SchemeTrajectory}，传入时复用已有轨迹并写回新算的轨迹。
    """
    _validate_path(path)
    cache = {} if cache is None else cache

    def final(h):
        if h not in cache:
            cache[h] = em_density_evolve(rho_0, drift, h, T, params, numerics=numerics, path=path,
                                         keep_grid_times=False)
        return cache[h].at(T)

    rows = [{"h": h, "delta": lp_distance(final(h), final(h / 2.0), 1)} for h in h_ladder]
    return pd.DataFrame(rows, columns=["h", "delta"])
