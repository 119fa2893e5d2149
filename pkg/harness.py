# -*- coding: utf-8 -*-
"""
实验编排: 收敛阶研究、估计诊断、蒙特卡洛与 FPE 交叉验证、结果输出

长时间运行的函数都接受 log_callback(message)，便于调用方收集进度信息。
"""

from __future__ import annotations

import dataclasses
import json
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from config import Rho0Spec, SchemeConfig
from density_scheme import (check_uniform_bound, duhamel_residual, em_density_evolve, lemma21_check,
                            lr_bound_check, self_convergence_ladder, time_holder_modulus)
from drift import pi_h, validate_drift
from errors import DdsdeError, DegenerateFit, InvalidParameter, ReferenceTooCoarse
from fpe_solver import em_vs_fpe_gap, fpe_solve
from grid import Grid, GridDensity, gaussian_density, lp_distance, make_grid, uniform_bump_density
from heat_kernel import eval_heat_kernel, kernel_histogram_gap, kernel_suite
from particles import em_particle_simulate, kde_density, sample_initial
from stable_noise import (PURPOSE_GENERIC, StableParams, derive_stream_id, empirical_char_function,
                          sample_rot_invariant, sample_sym_stable_1d, stream_generator)

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SLOPE_MARGIN = 0.15
R2_MIN = 0.98
NOISE_FLOOR = 1e-12
MIN_REFERENCE_DIVISOR = 8
FPE_CHECK_FACTOR = 2.0
# 一阶格式: e(h) 约为 2 ||rho^h - rho^{h/2}||
EM_EXTRAPOLATION = 2.0

# 核检查各项统计量的阈值
KERNEL_THRESHOLDS = {
    "scaling": 1e-4,
    "chapman_kolmogorov": 1e-6,
    "symmetry": 1e-10,
    "heat_equation": 1e-3,
    "two_sided_drift": 0.1,
    "norm_decay_error": 0.02,
    "gradient_oddness": 1e-10,
    "time_holder_ratio": 10.0,
}


def _progress(log_callback, message: str) -> None:
    logger.info(message)
    if log_callback:
        log_callback(message)


@dataclass(frozen=True)
class RateFit:
    slope: float
    intercept: float
    stderr: float
    r_squared: float


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    statistic: float | None
    threshold: float | None
    detail: str = ""

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass
class RateStudyResult:
    alpha: float
    h_values: tuple
    errors: tuple
    fit: RateFit | None
    theoretical_slope: float
    reference_kind: str
    reference_step: float
    status: str
    diagnostics: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "OK"

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_frame(self, config: SchemeConfig) -> pd.DataFrame:
        """每个步长一行的误差表"""
        return pd.DataFrame({
            "alpha": self.alpha,
            "h": list(self.h_values),
            "l1_error": list(self.errors),
            "reference_kind": self.reference_kind,
            "grid_n": config.n,
            "domain_L": config.L,
            "seed": config.seed,
        }, columns=["alpha", "h", "l1_error", "reference_kind", "grid_n", "domain_L", "seed"])


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, check: CheckResult) -> None:
        mark = "通过" if check.passed else "未通过"
        logger.info(f"[{mark}] {check.name}: 统计量={check.statistic}, 阈值={check.threshold} {check.detail}")
        self.checks.append(check)

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([c.to_dict() for c in self.checks],
                            columns=["name", "passed", "statistic", "threshold", "detail"])


def fit_rate(pairs) -> RateFit:
    """log e 对 log h 的最小二乘拟合"""
    pairs = [(float(h), float(e)) for h, e in pairs]
    if len(pairs) < 3:
        raise InvalidParameter(f"拟合至少需要3个点，实际为 {len(pairs)}")
    h = np.array([p[0] for p in pairs])
    e = np.array([p[1] for p in pairs])
    if np.any(h <= 0):
        raise InvalidParameter(f"步长必须为正: {h.tolist()}")
    if np.any(e <= NOISE_FLOOR):
        raise DegenerateFit(f"误差低于噪声底 {NOISE_FLOOR}: {e.tolist()}")
    if np.all(h == h[0]):
        raise DegenerateFit("所有步长相同，无法拟合斜率")
    x, y = np.log(h), np.log(e)
    reg = stats.linregress(x, y)
    residual = y - (reg.intercept + reg.slope * x)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(residual ** 2)) / ss_tot
    return RateFit(float(reg.slope), float(reg.intercept), float(reg.stderr), r_squared)


def build_initial_density(spec: Rho0Spec, grid: Grid, params: StableParams) -> GridDensity:
    if spec.kind == "gaussian":
        return gaussian_density(grid, spec.sigma, spec.center, normalize=True)
    if spec.kind == "uniform-bump":
        return uniform_bump_density(grid, spec.width, spec.center)
    # stable: q_alpha(t0) 平移到 center（按整格平移）
    table = eval_heat_kernel(params, spec.t0, grid).density
    shift = int(round(spec.center / grid.spacing))
    return GridDensity(grid, np.roll(table.values, shift, axis=tuple(range(grid.dim))))


def _scheme_final(rho_0, drift, h, T, params, numerics):
    traj = em_density_evolve(rho_0, drift, h, T, params, numerics=numerics, keep_grid_times=False)
    return traj.at(T), traj.stats.to_dict()


def run_rate_study(config: SchemeConfig, log_callback=None) -> RateStudyResult:
    """||rho_T - rho^h_T||_1 沿 h_ladder 的收敛阶研究"""
    params, grid, drift, numerics = config.params, config.grid(), config.drift_spec(), config.numerics
    T, h_min = config.T, config.h_min
    validate_drift(drift, dim=config.dim)
    rho_0 = build_initial_density(config.rho0, grid, params)

    if config.reference == "self_convergence":
        if config.reference_divisor < MIN_REFERENCE_DIVISOR:
            raise ReferenceTooCoarse(f"参考步长除数 {config.reference_divisor} 小于 {MIN_REFERENCE_DIVISOR}")
        reference_step = h_min / config.reference_divisor

        def reference_job():
            return _scheme_final(rho_0, drift, reference_step, T, params, numerics)
    else:
        reference_step = config.fpe_dt
        if reference_step > min(h_min ** 2, 1e-3):
            raise ReferenceTooCoarse(f"FPE 参考的 dt={reference_step} 必须 <= min(h_min^2, 1e-3)")
        fpe_config = dataclasses.replace(config.fpe_config(), store_every=10 ** 9)

        def reference_job():
            traj = fpe_solve(rho_0, drift, params, T, fpe_config, numerics)
            return traj.at(T), {"clamped_mass": traj.clamped_mass}

    _progress(log_callback, f"收敛阶研究开始: alpha={config.alpha}, 参考={config.reference}, "
                            f"参考步长={reference_step:.3e}, 步长数={len(config.h_ladder)}")
    with ThreadPoolExecutor(max_workers=config.workers) as pool:
        reference_future = pool.submit(reference_job)
        runs = list(pool.map(lambda h: _scheme_final(rho_0, drift, h, T, params, numerics), config.h_ladder))
        reference, reference_stats = reference_future.result()

    errors = tuple(lp_distance(reference, rho, 1) for rho, _ in runs)
    for h, e in zip(config.h_ladder, errors):
        _progress(log_callback, f"h={h:.6g}: L1 误差={e:.6e}")

    diagnostics = {
        "reference_stats": reference_stats,
        "run_stats": [s for _, s in runs],
        "monotone": all(b < a for a, b in zip(errors, errors[1:])),
    }
    try:
        fit = fit_rate(zip(config.h_ladder, errors))
    except DegenerateFit as e:
        _progress(log_callback, f"拟合退化: {e}")
        return RateStudyResult(params.alpha, config.h_ladder, errors, None, params.rate, config.reference,
                               reference_step, "DEGENERATE", diagnostics)

    ok = fit.slope >= params.rate - SLOPE_MARGIN and fit.r_squared >= R2_MIN
    status = "OK" if ok else "FAIL"
    _progress(log_callback, f"拟合斜率={fit.slope:.4f} (理论 {params.rate:.4f}), R^2={fit.r_squared:.4f}, 结果={status}")
    return RateStudyResult(params.alpha, config.h_ladder, errors, fit, params.rate, config.reference,
                           reference_step, status, diagnostics)


def run_alpha_sweep(config: SchemeConfig, alphas, log_callback=None) -> tuple[list, CheckResult]:
    """对多个 alpha 做收敛阶研究，并检查斜率随 alpha 严格递增

    漂移与初值都光滑时格式对每个 alpha 都以一阶收敛，斜率挤在1附近，排序检查照实记为未通过；
    detail 中 first_order=True 标出这种情形。
    """
    results = [run_rate_study(dataclasses.replace(config, alpha=float(a)), log_callback) for a in alphas]
    slopes = [r.fit.slope if r.fit else None for r in results]
    ordered = None not in slopes and all(b > a for a, b in zip(slopes, slopes[1:]))
    gap = min((b - a for a, b in zip(slopes, slopes[1:])), default=0.0) if None not in slopes else None
    first_order = None not in slopes and all(abs(s - 1.0) < SLOPE_MARGIN for s in slopes)
    if not ordered and first_order:
        _progress(log_callback, f"各 alpha 的斜率都在一阶附近: {slopes}，排序检查未通过")
    return results, CheckResult("slope_ordering", bool(ordered), gap, 0.0,
                                f"slopes={slopes}, first_order={first_order}")


# ---- 诊断 ----

def _guarded(report: DiagnosticsReport, name: str, threshold, compute) -> None:
    """compute() 返回 (passed, statistic, detail)；数值守卫异常记为未通过"""
    try:
        passed, statistic, detail = compute()
    except DdsdeError as e:
        logger.error(f"检查 {name} 出错: {e}")
        report.add(CheckResult(name, False, None, threshold, f"{type(e).__name__}: {e}"))
        return
    report.add(CheckResult(name, bool(passed), None if statistic is None else float(statistic), threshold, detail))


def sampler_checks(report: DiagnosticsReport, params: StableParams, seed: int, draws: int) -> None:
    gen = stream_generator(seed, derive_stream_id(PURPOSE_GENERIC, 0, 0))
    sample = sample_rot_invariant(params, 1.0, gen, size=draws)

    def char_function():
        worst = 0.0
        for xi in (0.5, 1.0, 2.0):
            direction = np.zeros(params.dim)
            direction[0] = xi
            worst = max(worst, abs(empirical_char_function(sample, direction).real - math.exp(-xi ** params.alpha)))
        return worst < 0.002, worst, f"draws={draws}"

    _guarded(report, "sampler_char_function", 0.002, char_function)

    if params.dim == 1:
        def ks_cms_vs_subordination():
            m = min(draws, 100000)
            cms = sample_sym_stable_1d(params, 1.0, stream_generator(seed, derive_stream_id(PURPOSE_GENERIC, 1, 0)), m)
            sub = sample_rot_invariant(params, 1.0, stream_generator(seed, derive_stream_id(PURPOSE_GENERIC, 2, 0)),
                                       size=m, method="subordination")[:, 0]
            result = stats.ks_2samp(cms, sub)
            critical = 1.628 * math.sqrt(2.0 / m)
            return result.statistic < critical, result.statistic, f"p={result.pvalue:.4f}, critical={critical:.5f}"

        _guarded(report, "sampler_ks_cms_subordination", None, ks_cms_vs_subordination)
    else:
        def angle_uniformity():
            angles = np.arctan2(sample[:, 1], sample[:, 0])
            counts, _ = np.histogram(angles, bins=36, range=(-math.pi, math.pi))
            result = stats.chisquare(counts)
            critical = float(stats.chi2.ppf(0.99, 35))
            return result.statistic < critical, result.statistic, f"critical={critical:.3f}"

        _guarded(report, "sampler_angle_uniformity", None, angle_uniformity)

    hist_grid = make_grid(1, 32.0, 256) if params.dim == 1 else make_grid(2, 16.0, 64)
    hist_threshold = 0.01 if params.dim == 1 else 0.03

    def histogram_gap():
        gap = kernel_histogram_gap(params, hist_grid, draws,
                                   stream_generator(seed, derive_stream_id(PURPOSE_GENERIC, 3, 0)))
        return gap < hist_threshold, gap, f"grid_n={hist_grid.points_per_axis}"

    _guarded(report, "sampler_histogram_vs_kernel", hist_threshold, histogram_gap)


def kernel_checks(report: DiagnosticsReport, params: StableParams, tau_mass: float) -> None:
    try:
        suite = kernel_suite(params)
    except DdsdeError as e:
        report.add(CheckResult("kernel_suite", False, None, None, f"{type(e).__name__}: {e}"))
        return
    for key, limit in KERNEL_THRESHOLDS.items():
        report.add(CheckResult(f"kernel_{key}", suite[key] < limit, suite[key], limit))
    report.add(CheckResult("kernel_normalization", suite["normalization"] < tau_mass, suite["normalization"], tau_mass))


def _bump(grid: Grid) -> np.ndarray:
    return np.exp(-0.5 * grid.radius ** 2)


def run_diagnostics(config: SchemeConfig, log_callback=None, kernel: bool = True, samplers: bool = True,
                    sampler_draws: int = 1000000) -> DiagnosticsReport:
    """估计诊断: 每项给出统计量、阈值与是否通过；失败只记录不抛出"""
    report = DiagnosticsReport()
    params, grid, drift, numerics = config.params, config.grid(), config.drift_spec(), config.numerics
    T, h = config.T, config.diag_h

    drift_report = validate_drift(drift, dim=config.dim, raise_on_violation=False)
    report.add(CheckResult("drift_hypothesis", drift_report.passed,
                           max(drift_report.max_abs, drift_report.max_lipschitz), drift_report.kappa,
                           "" if drift_report.passed else "DriftViolatesH: 漂移违反有界或 Lipschitz 条件"))
    if not drift_report.passed:
        _progress(log_callback, "漂移违反条件，跳过其余检查")
        return report

    if kernel:
        _progress(log_callback, "热核检查...")
        kernel_checks(report, params, config.tau_mass)
    if samplers:
        _progress(log_callback, "抽样器检查...")
        sampler_checks(report, params, config.seed, sampler_draws)

    _progress(log_callback, "格式密度检查...")
    rho_0 = build_initial_density(config.rho0, grid, params)

    def evolve(step, path="fast", output_times=None):
        return em_density_evolve(rho_0, drift, step, T, params, output_times=output_times, numerics=numerics,
                                 path=path)

    def duhamel():
        traj = evolve(h, path="direct", output_times=[config.diag_t])
        coarse = duhamel_residual(traj, config.diag_t, 8)
        fine = duhamel_residual(traj, config.diag_t, 16)
        ratio = fine / coarse if coarse > 1e-9 else 0.0
        refined = coarse <= 1e-9 or 0.25 <= ratio <= 1.0
        return coarse < 1e-2 and refined, coarse, f"residual_16={fine:.3e}, ratio={ratio:.3f}"

    _guarded(report, "duhamel_residual", 1e-2, duhamel)

    def uniform_bound():
        ratios = [check_uniform_bound(evolve(step), rho_0, params) for step in (1 / 16, 1 / 32, 1 / 64)]
        variation = (max(ratios) - min(ratios)) / min(ratios)
        return variation < 0.2, variation, f"ratios={[round(r, 6) for r in ratios]}"

    _guarded(report, "uniform_bound", 0.2, uniform_bound)

    fine_traj = None

    def time_holder():
        nonlocal fine_traj
        fine_traj = evolve(1 / 64)
        pairs = [(s, 2 * s) for s in (1 / 16, 1 / 8, 1 / 4) if 2 * s <= T + 1e-12]
        table = time_holder_modulus(fine_traj, params, 1, pairs=pairs)
        spread = float(table["ratio"].max() / table["ratio"].min())
        return spread < 4.0, spread, f"ratios={[round(r, 6) for r in table['ratio']]}"

    _guarded(report, "time_holder", 4.0, time_holder)

    def one_step_bound():
        results = []
        for step in (h, h / 2):
            traj = evolve(step)
            s = pi_h(T / 2, step) + step / 4
            f2 = _bump(grid)
            results.append(lemma21_check(np.ones(grid.shape), f2, traj, s, params))
        ratio = results[0]["ratio"] / results[1]["ratio"] if results[1]["ratio"] > 0 else math.inf
        if results[0]["lhs"] == 0 and results[1]["lhs"] == 0:
            ratio = 1.0
        return 0.5 <= ratio <= 4.0, ratio, f"ratios={results[0]['ratio']:.4e}/{results[1]['ratio']:.4e}"

    _guarded(report, "lemma_one_step", 4.0, one_step_bound)

    def lr_bound():
        traj = fine_traj if fine_traj is not None else evolve(1 / 64)
        value = lr_bound_check(traj, rho_0, params)
        return value <= 1.5, value, ""

    _guarded(report, "lr_bound", 1.5, lr_bound)

    def mass():
        traj = fine_traj if fine_traj is not None else evolve(1 / 64)
        worst = max(abs(d.mass() - rho_0.mass()) for d in traj.densities)
        return worst <= config.tau_mass, worst, f"clamped={traj.stats.clamped_mass:.3e}"

    _guarded(report, "mass_conservation", config.tau_mass, mass)
    return report


@dataclass
class ParticleRun:
    clouds: list
    stats: object
    kde: GridDensity
    deterministic: GridDensity
    gap: float


def particle_run(config: SchemeConfig, N: int, h: float | None = None, log_callback=None) -> ParticleRun:
    """粒子模拟到最后一个格点时间，并与同一 h 的确定性格式密度比较"""
    params, grid, drift, numerics = config.params, config.grid(), config.drift_spec(), config.numerics
    h = h or config.diag_h
    T = pi_h(config.T, h)
    rho_0 = build_initial_density(config.rho0, grid, params)
    _progress(log_callback, f"粒子模拟: N={N}, h={h}, T={T}")
    deterministic = em_density_evolve(rho_0, drift, h, T, params, numerics=numerics, keep_grid_times=False).at(T)
    clouds, pstats = em_particle_simulate(N, lambda size, rng: sample_initial(config.rho0, params, size, rng),
                                          drift, h, T, params, config.kde_config(), grid, config.seed, numerics)
    kde = kde_density(clouds[-1], config.kde_config(), grid)
    gap = lp_distance(kde, deterministic, 1)
    _progress(log_callback, f"粒子 KDE 与确定性密度的 L1 差距: {gap:.4e}（预算 {config.mc_budget}）")
    return ParticleRun(clouds, pstats, kde, deterministic, gap)


def cross_validate_mc(config: SchemeConfig, N: int | None = None, h: float | None = None,
                      log_callback=None) -> CheckResult:
    """粒子 KDE 与确定性格式密度在 T 时刻的 L^1 差距"""
    N = int(N or config.particles_n)
    if N < 10000:
        raise InvalidParameter(f"交叉验证的粒子数至少为 10^4，实际为 {N}")
    run = particle_run(config, N, h=h, log_callback=log_callback)
    return CheckResult("mc_cross_validation", run.gap < config.mc_budget, run.gap, config.mc_budget,
                       f"N={N}, h={h or config.diag_h}, max_wrap_fraction={run.stats.max_wrap_fraction:.3e}")


def _restrict(density: GridDensity, grid: Grid) -> GridDensity:
    """2n 网格上的密度取偶数下标节点，落回 n 网格"""
    return GridDensity(grid, density.values[(slice(None, None, 2),) * grid.dim])


def run_fpe_cross_check(config: SchemeConfig, h: float | None = None, path: str = "direct",
                        log_callback=None) -> CheckResult:
    """||rho^FPE_T - rho^h_T||_1 与两条路线自身离散误差的比较

    FPE 的误差取 dt 减半与网格加密 (n -> 2n) 两项差异之和；EM 的误差按一阶外推取
    2 ||rho^h_T - rho^{h/2}_T||_1。差距须小于两者之和的 FPE_CHECK_FACTOR 倍。
    快速路径的线性分配带有 O(dx) 的额外平滑，故默认用直接路径。
    """
    params, grid, drift, numerics = config.params, config.grid(), config.drift_spec(), config.numerics
    h = h or config.h_min
    T = config.T
    rho_0 = build_initial_density(config.rho0, grid, params)
    fine_grid = make_grid(config.dim, config.L, 2 * config.n)
    rho_0_fine = build_initial_density(config.rho0, fine_grid, params)
    base_cfg = dataclasses.replace(config.fpe_config(), store_every=10 ** 9)
    half_dt_cfg = dataclasses.replace(base_cfg, dt=config.fpe_dt / 2)
    _progress(log_callback, f"FPE 交叉检查: dt={config.fpe_dt}, h={h}, 路径={path}")

    scheme_runs = {}
    with ThreadPoolExecutor(max_workers=min(config.workers, 4)) as pool:
        base = pool.submit(fpe_solve, rho_0, drift, params, T, base_cfg, numerics)
        half_dt = pool.submit(fpe_solve, rho_0, drift, params, T, half_dt_cfg, numerics)
        refined = pool.submit(fpe_solve, rho_0_fine, drift, params, T, base_cfg, numerics)
        ladder = pool.submit(self_convergence_ladder, rho_0, drift, [h], T, params, numerics, path, scheme_runs)
        fpe_traj = base.result()
        dt_delta = lp_distance(fpe_traj.at(T), half_dt.result().at(T), 1)
        dx_delta = lp_distance(fpe_traj.at(T), _restrict(refined.result().at(T), grid), 1)
        em_delta = float(ladder.result()["delta"].iloc[0])

    gap = em_vs_fpe_gap(scheme_runs[h], fpe_traj, T)
    threshold = FPE_CHECK_FACTOR * (dt_delta + dx_delta + EM_EXTRAPOLATION * em_delta)
    _progress(log_callback, f"FPE 与 EM 差距={gap:.4e}, FPE dt 减半差异={dt_delta:.4e}, "
                            f"FPE 网格加密差异={dx_delta:.4e}, EM h 减半差异={em_delta:.4e}")
    return CheckResult("fpe_cross_check", gap < threshold, gap, threshold,
                       f"h={h}, dt={config.fpe_dt}, path={path}, dt_delta={dt_delta:.6e}, "
                       f"dx_delta={dx_delta:.6e}, em_delta={em_delta:.6e}")


# ---- 输出 ----

def _json_default(value):
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Enum):
        return value.value
    if dataclasses.is_dataclass(value):
        return dataclasses.asdict(value)
    raise TypeError(f"无法序列化类型 {type(value)}")


def build_manifest(command: str, config: SchemeConfig, results=None, checks=(), status: str = "OK") -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        "command": command,
        "config": config.to_dict(),
        "results": results or {},
        "checks": [c.to_dict() for c in checks],
        "status": status,
    }


def write_manifest(path, manifest: dict) -> Path:
    """不含时间戳，相同输入得到逐字节相同的文件"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    text = json.dumps(manifest, sort_keys=True, indent=2, ensure_ascii=False, default=_json_default)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"已写出运行清单: {path}")
    return path


def write_error_csv(results, config: SchemeConfig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame = pd.concat([r.to_frame(config) for r in results], ignore_index=True)
    frame.to_csv(path, index=False, float_format="%.17g")
    logger.info(f"已写出误差表: {path}")
    return path
