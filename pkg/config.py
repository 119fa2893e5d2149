# -*- coding: utf-8 -*-
"""
实验配置: TOML 文件 + 命令行覆盖

顶层为平铺的键，另有 drift 与 rho0 两个内联表。未知键一律报错。
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from drift import DriftSpec, drift_from_config
from errors import ConfigError, DdsdeError
from fpe_solver import FpeConfig
from grid import Grid, NumericsConfig, make_grid
from particles import KdeConfig
from stable_noise import StableParams

logger = logging.getLogger(__name__)

REFERENCE_KINDS = ("self_convergence", "fpe")
RHO0_KINDS = ("gaussian", "uniform-bump", "stable")


@dataclass(frozen=True)
class Rho0Spec:
    kind: str = "gaussian"
    sigma: float = 1.0
    width: float = 1.0
    t0: float = 0.1
    center: float = 0.0

    def __post_init__(self):
        if self.kind not in RHO0_KINDS:
            raise ConfigError(f"未知初值类型: {self.kind}，可选 {RHO0_KINDS}")


def _default_ladder() -> tuple:
    return tuple(2.0 ** -e for e in range(4, 10))


@dataclass(frozen=True)
class SchemeConfig:
    alpha: float = 1.5
    dim: int = 1
    L: float = 10.0
    n: int = 512
    T: float = 0.5
    h_ladder: tuple = field(default_factory=_default_ladder)
    reference: str = "self_convergence"
    reference_divisor: int = 8
    fpe_dt: float = 1e-3
    fpe_splitting: str = "strang"
    fpe_transport: str = "centered_limited"
    seed: int = 20240601
    tau_mass: float = 1e-3
    tail_tolerance: float = 0.1
    workers: int = 4
    particles_n: int = 100000
    kde_kernel: str = "gaussian"
    kde_bandwidth: float | str = "auto"
    mc_budget: float = 0.05
    diag_h: float = 1.0 / 32
    diag_t: float = 0.25
    drift: dict = field(default_factory=lambda: {"kind": "nemytskii_sat", "kappa": 1.0, "direction": "sine"})
    rho0: Rho0Spec = field(default_factory=Rho0Spec)

    def __post_init__(self):
        ladder = tuple(float(h) for h in self.h_ladder)
        object.__setattr__(self, "h_ladder", ladder)
        if len(ladder) < 3:
            raise ConfigError(f"h_ladder 至少需要3个步长，实际为 {len(ladder)}")
        if any(not 0 < h < 1 for h in ladder):
            raise ConfigError(f"所有步长必须在 (0,1): {ladder}")
        if any(b >= a for a, b in zip(ladder, ladder[1:])):
            raise ConfigError(f"h_ladder 必须严格递减: {ladder}")
        if not self.T > max(ladder):
            raise ConfigError(f"T={self.T} 必须大于最大步长 {max(ladder)}")
        if self.reference not in REFERENCE_KINDS:
            raise ConfigError(f"未知参考解类型: {self.reference}，可选 {REFERENCE_KINDS}")
        if self.workers < 1:
            raise ConfigError(f"workers 必须 >= 1，实际为 {self.workers}")
        # 构造一次各子配置，尽早暴露参数错误
        try:
            self.params
            self.grid()
            self.drift_spec()
            self.fpe_config()
            self.kde_config()
        except ConfigError:
            raise
        except DdsdeError as e:
            raise ConfigError(f"配置参数无效: {e}") from e

    @property
    def params(self) -> StableParams:
        return StableParams(float(self.alpha), int(self.dim))

    @property
    def numerics(self) -> NumericsConfig:
        return NumericsConfig(tau_mass=self.tau_mass, tail_tolerance=self.tail_tolerance)

    @property
    def h_min(self) -> float:
        return min(self.h_ladder)

    def grid(self) -> Grid:
        return make_grid(self.dim, self.L, self.n)

    def drift_spec(self) -> DriftSpec:
        return drift_from_config(self.drift)

    def fpe_config(self, dt: float | None = None) -> FpeConfig:
        return FpeConfig(dt=dt or self.fpe_dt, splitting=self.fpe_splitting, transport=self.fpe_transport)

    def kde_config(self) -> KdeConfig:
        return KdeConfig(kernel=self.kde_kernel, bandwidth=self.kde_bandwidth)

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["h_ladder"] = list(self.h_ladder)
        return data


_FIELDS = {f.name for f in dataclasses.fields(SchemeConfig)}
_RHO0_FIELDS = {f.name for f in dataclasses.fields(Rho0Spec)}


def config_from_mapping(data: dict) -> SchemeConfig:
    """由字典构造配置，h_exponents = [4, 5] 表示 h_ladder = [2^-4, 2^-5]"""
    data = dict(data)
    if "h_exponents" in data:
        if "h_ladder" in data:
            raise ConfigError("h_ladder 与 h_exponents 不能同时给出")
        data["h_ladder"] = [2.0 ** -int(e) for e in data.pop("h_exponents")]
    unknown = set(data) - _FIELDS
    if unknown:
        raise ConfigError(f"未知配置键: {sorted(unknown)}")
    if "rho0" in data:
        rho0 = dict(data["rho0"])
        bad = set(rho0) - _RHO0_FIELDS
        if bad:
            raise ConfigError(f"rho0 中的未知配置键: {sorted(bad)}")
        data["rho0"] = Rho0Spec(**rho0)
    if "drift" in data:
        data["drift"] = dict(data["drift"])
    try:
        return SchemeConfig(**data)
    except TypeError as e:
        raise ConfigError(f"配置类型错误: {e}") from e


def load_config(path) -> SchemeConfig:
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"配置文件不存在: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"配置文件格式错误: {path}: {e}") from e
    config = config_from_mapping(data)
    logger.info(f"已加载配置: {path}")
    return config


def with_overrides(config: SchemeConfig, **overrides) -> SchemeConfig:
    """用命令行参数覆盖配置，值为 None 的项忽略"""
    changes = {k: v for k, v in overrides.items() if v is not None}
    if not changes:
        return config
    data = config.to_dict()
    drift_changes = {k: changes.pop(k) for k in ("drift_kind", "kappa", "direction") if k in changes}
    if drift_changes:
        drift = dict(data["drift"])
        if "drift_kind" in drift_changes:
            drift = {"kind": drift_changes.pop("drift_kind")}
        drift.update(drift_changes)
        changes["drift"] = drift
    if "rho0_kind" in changes:
        rho0 = dict(data["rho0"])
        rho0["kind"] = changes.pop("rho0_kind")
        changes["rho0"] = rho0
    data.update(changes)
    return config_from_mapping(data)
