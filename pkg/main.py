"""
ddsde 命令行入口

    python main.py rate-study --config configs/reference.toml --out results/rate
    python main.py diagnose --config configs/reference.toml --report

退出码: 0 全部检查通过，1 有检查未通过或数值错误，2 配置错误。
"""

import argparse
import dataclasses
import logging
import os
import sys

import numpy as np
import pandas as pd

from config import SchemeConfig, load_config, with_overrides
from density_scheme import em_density_evolve, lr_bound_check
from errors import ConfigError, DdsdeError
from fpe_solver import fpe_solve, fpe_weak_residual
from grid import write_binary, write_csv
from harness import (CheckResult, DiagnosticsReport, build_initial_density, build_manifest, cross_validate_mc,
                     kernel_checks, particle_run, run_alpha_sweep, run_diagnostics, run_fpe_cross_check,
                     run_rate_study, write_error_csv, write_manifest)
from heat_kernel import eval_heat_kernel
from report_generator import generate_study_reports
from stable_noise import PURPOSE_GENERIC, derive_stream_id, sample_rot_invariant, stream_generator

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2

# 命令行参数名 -> 配置键
_OVERRIDES = {
    "alpha": "alpha", "dim": "dim", "L": "L", "n": "n", "T": "T", "seed": "seed",
    "drift": "drift_kind", "kappa": "kappa", "direction": "direction", "rho0": "rho0_kind",
    "dt": "fpe_dt", "splitting": "fpe_splitting", "transport": "fpe_transport",
    "N": "particles_n", "bandwidth": "kde_bandwidth", "reference": "reference", "workers": "workers",
}


def _add_common(parser, grid=True, drift=True):
    parser.add_argument("-c", "--config", help="TOML 配置文件")
    parser.add_argument("-o", "--out", default="results", help="输出目录（默认 results）")
    parser.add_argument("-v", "--verbose", action="store_true", help="输出调试日志")
    parser.add_argument("--report", action="store_true", help="同时生成 report.docx 与 report.xlsx")
    parser.add_argument("--alpha", type=float, help="稳定指数，(1,2)")
    parser.add_argument("--dim", type=int, choices=(1, 2), help="空间维数")
    parser.add_argument("--seed", type=int, help="随机种子")
    if grid:
        parser.add_argument("--L", type=float, help="周期区域半宽")
        parser.add_argument("--n", type=int, help="每轴网格点数（偶数）")
    if drift:
        parser.add_argument("--T", type=float, help="终止时间")
        parser.add_argument("--drift", help="漂移类型（zero/autonomous/nemytskii_sat/nemytskii_trunc/unbounded_linear）")
        parser.add_argument("--kappa", type=float, help="漂移的界 kappa")
        parser.add_argument("--direction", help="方向场（sine/tanh/constant）")
        parser.add_argument("--rho0", choices=("gaussian", "stable", "uniform-bump"), help="初值类型")


def build_parser():
    parser = argparse.ArgumentParser(prog="ddsde", description="密度依赖稳定噪声 SDE 的 Euler-Maruyama 格式实验")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("kernel", help="热核表与核检查")
    _add_common(p, drift=False)
    p.add_argument("--t", type=float, default=1.0, help="核的时间（默认 1）")

    p = sub.add_parser("sample", help="输出稳定增量抽样 CSV")
    _add_common(p, grid=False, drift=False)
    p.add_argument("--t", type=float, default=1.0, help="增量时间（默认 1）")
    p.add_argument("--n", dest="draws", type=int, default=100000, help="抽样个数")

    p = sub.add_parser("em-density", help="确定性格式密度演化")
    _add_common(p)
    p.add_argument("--h", type=float, help="步长（默认配置中的 diag_h）")
    p.add_argument("--path", choices=("fast", "direct"), default="fast", help="推进路径")
    p.add_argument("--binary", action="store_true", help="另存最终密度的二进制文件")

    p = sub.add_parser("em-particles", help="粒子法模拟与确定性密度比较")
    _add_common(p)
    p.add_argument("--h", type=float, help="步长（默认配置中的 diag_h）")
    p.add_argument("--N", type=int, help="粒子数")
    p.add_argument("--bandwidth", help="核密度估计带宽，正数或 auto")
    p.add_argument("--save-clouds", action="store_true", help="保存最终粒子位置")

    p = sub.add_parser("fpe", help="Fokker-Planck 参考解")
    _add_common(p)
    p.add_argument("--dt", type=float, help="时间步长")
    p.add_argument("--splitting", choices=("lie", "strang"), help="算子分裂方式")
    p.add_argument("--transport", choices=("upwind1", "centered_limited"), help="输运格式")
    p.add_argument("--outputs", type=int, default=10, help="输出的时间点个数")

    p = sub.add_parser("rate-study", help="收敛阶研究")
    _add_common(p)
    p.add_argument("--reference", choices=("self_convergence", "fpe"), help="参考解类型")
    p.add_argument("--dt", type=float, help="FPE 参考的时间步长")
    p.add_argument("--alphas", type=float, nargs="+", help="对多个 alpha 做研究并检查斜率排序")
    p.add_argument("--workers", type=int, help="并行线程数")
    p.add_argument("--fpe-check", action="store_true", help="附加 FPE 交叉检查")
    p.add_argument("--fpe-path", choices=("fast", "direct"), default="direct", help="FPE 交叉检查所用的格式计算路径")
    p.add_argument("--mc-check", action="store_true", help="附加粒子法交叉验证")

    p = sub.add_parser("diagnose", help="估计诊断")
    _add_common(p)
    p.add_argument("--skip-kernel", action="store_true", help="跳过热核检查")
    p.add_argument("--skip-samplers", action="store_true", help="跳过抽样器检查")
    p.add_argument("--draws", type=int, default=1000000, help="抽样器检查的样本数")
    return parser


def resolve_config(args) -> SchemeConfig:
    config = load_config(args.config) if args.config else SchemeConfig()
    overrides = {key: getattr(args, name) for name, key in _OVERRIDES.items() if hasattr(args, name)}
    if overrides.get("kde_bandwidth") not in (None, "auto"):
        try:
            overrides["kde_bandwidth"] = float(overrides["kde_bandwidth"])
        except ValueError:
            raise ConfigError(f"带宽必须为正数或 auto，实际为 {overrides['kde_bandwidth']}") from None
    return with_overrides(config, **overrides)


def _finish(args, config, command, results, checks, studies=()):
    ok = all(c.passed for c in checks) and all(s.passed for s in studies)
    write_manifest(os.path.join(args.out, "manifest.json"),
                   build_manifest(command, config, results, checks, "OK" if ok else "FAIL"))
    if args.report and not generate_study_reports(config, args.out, studies, checks, log_callback=None):
        logger.error("报告生成失败")
        ok = False
    return ok


def _time_tag(t):
    return f"{t:.6f}".replace(".", "p")


def cmd_kernel(args, config):
    params, grid = config.params, config.grid()
    table = eval_heat_kernel(params, args.t, grid, config.numerics)
    write_csv(table.density, os.path.join(args.out, f"kernel_t{_time_tag(args.t)}.csv"))
    report = DiagnosticsReport()
    kernel_checks(report, params, config.tau_mass)
    report.to_frame().to_csv(os.path.join(args.out, "kernel_checks.csv"), index=False)
    return _finish(args, config, "kernel", {"t": args.t, "clamped_mass": table.clamped_mass}, report.checks)


def cmd_sample(args, config):
    params = config.params
    gen = stream_generator(config.seed, derive_stream_id(PURPOSE_GENERIC, 0, 0))
    draws = sample_rot_invariant(params, args.t, gen, size=args.draws)
    columns = ["x"] if params.dim == 1 else [f"x{i + 1}" for i in range(params.dim)]
    pd.DataFrame(draws, columns=columns).to_csv(os.path.join(args.out, "samples.csv"), index=False,
                                                float_format="%.17g")
    logger.info(f"已写出 {args.draws} 个抽样")
    return _finish(args, config, "sample", {"t": args.t, "draws": args.draws}, [])


def cmd_em_density(args, config):
    params, grid, drift = config.params, config.grid(), config.drift_spec()
    h = args.h or config.diag_h
    rho_0 = build_initial_density(config.rho0, grid, params)
    traj = em_density_evolve(rho_0, drift, h, config.T, params, numerics=config.numerics, path=args.path)
    for t, rho in zip(traj.times, traj.densities):
        write_csv(rho, os.path.join(args.out, f"density_t{_time_tag(t)}.csv"))
    if args.binary:
        write_binary(traj.densities[-1], os.path.join(args.out, "density_final.bin"))
    worst_mass = max(abs(d.mass() - rho_0.mass()) for d in traj.densities)
    lr = lr_bound_check(traj, rho_0, params)
    checks = [
        CheckResult("mass_conservation", worst_mass <= config.tau_mass, worst_mass, config.tau_mass),
        CheckResult("lr_bound", lr <= 1.5, lr, 1.5),
    ]
    results = {"h": h, "path": args.path, "times": list(traj.times), "stats": traj.stats.to_dict()}
    return _finish(args, config, "em-density", results, checks)


def cmd_em_particles(args, config):
    N = config.particles_n
    run = particle_run(config, N, args.h)
    write_csv(run.kde, os.path.join(args.out, "kde_final.csv"))
    write_csv(run.deterministic, os.path.join(args.out, "density_final.csv"))
    if args.save_clouds:
        final = run.clouds[-1]
        columns = ["x"] if final.dim == 1 else [f"x{i + 1}" for i in range(final.dim)]
        pd.DataFrame(final.positions, columns=columns).to_csv(os.path.join(args.out, "cloud_final.csv"),
                                                              index=False, float_format="%.17g")
    checks = [CheckResult("mc_gap", run.gap < config.mc_budget, run.gap, config.mc_budget, f"N={N}")]
    results = {"N": N, "h": args.h or config.diag_h, "gap": run.gap, "stats": run.stats.to_dict()}
    return _finish(args, config, "em-particles", results, checks)


def cmd_fpe(args, config):
    params, grid, drift = config.params, config.grid(), config.drift_spec()
    rho_0 = build_initial_density(config.rho0, grid, params)
    steps = max(int(round(config.T / config.fpe_dt)), 1)
    fpe_config = dataclasses.replace(config.fpe_config(), store_every=max(steps // max(args.outputs, 1), 1))
    traj = fpe_solve(rho_0, drift, params, config.T, fpe_config, config.numerics)
    for t, rho in zip(traj.times, traj.densities):
        write_csv(rho, os.path.join(args.out, f"fpe_t{_time_tag(t)}.csv"))
    phi = np.exp(-0.5 * grid.radius ** 2)
    residual = fpe_weak_residual(traj, drift, params, phi, traj.times[-1])
    worst_mass = max(abs(d.mass() - rho_0.mass()) for d in traj.densities)
    checks = [CheckResult("mass_conservation", worst_mass <= config.tau_mass, worst_mass, config.tau_mass)]
    results = {"times": list(traj.times), "weak_residual": residual, "clamped_mass": traj.clamped_mass}
    return _finish(args, config, "fpe", results, checks)


def cmd_rate_study(args, config):
    if args.alphas:
        studies, ordering = run_alpha_sweep(config, args.alphas)
        checks = [ordering]
    else:
        studies, checks = [run_rate_study(config)], []
    for study in studies:
        checks.append(CheckResult(f"rate_alpha_{study.alpha:g}", study.passed,
                                  study.fit.slope if study.fit else None, study.theoretical_slope,
                                  study.status))
    if args.fpe_check:
        checks.append(run_fpe_cross_check(config, path=args.fpe_path))
    if args.mc_check:
        checks.append(cross_validate_mc(config))
    write_error_csv(studies, config, os.path.join(args.out, "errors.csv"))
    results = {"studies": [s.to_dict() for s in studies]}
    return _finish(args, config, "rate-study", results, checks, studies)


def cmd_diagnose(args, config):
    report = run_diagnostics(config, kernel=not args.skip_kernel, samplers=not args.skip_samplers,
                             sampler_draws=args.draws)
    report.to_frame().to_csv(os.path.join(args.out, "diagnostics.csv"), index=False)
    return _finish(args, config, "diagnose", {}, report.checks)


COMMANDS = {
    "kernel": cmd_kernel,
    "sample": cmd_sample,
    "em-density": cmd_em_density,
    "em-particles": cmd_em_particles,
    "fpe": cmd_fpe,
    "rate-study": cmd_rate_study,
    "diagnose": cmd_diagnose,
}


def main(argv=None):
    """主函数"""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format='%(asctime)s - %(levelname)s - %(message)s',
        datefmt='%H:%M:%S'
    )
    try:
        config = resolve_config(args)
        os.makedirs(args.out, exist_ok=True)
        ok = COMMANDS[args.command](args, config)
    except ConfigError as e:
        logger.error(f"配置错误: {e}")
        return EXIT_CONFIG
    except DdsdeError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return EXIT_FAIL
    logger.info("全部检查通过" if ok else "存在未通过的检查")
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
