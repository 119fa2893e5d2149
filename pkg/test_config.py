#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 config.py: TOML 配置加载与命令行覆盖
"""

import os
import sys
import tempfile

from config import Rho0Spec, SchemeConfig, config_from_mapping, load_config, with_overrides
from errors import ConfigError
from fpe_solver import Splitting
from testing import raises, run_all

HERE = os.path.dirname(os.path.abspath(__file__))


def _write_toml(text):
    handle = tempfile.NamedTemporaryFile("w", suffix=".toml", delete=False, encoding="utf-8")
    with handle:
        handle.write(text)
    return handle.name


def test_defaults():
    config = SchemeConfig()
    assert config.h_ladder == tuple(2.0 ** -e for e in range(4, 10))
    assert config.h_min == 2.0 ** -9
    assert config.params.alpha == 1.5 and config.params.dim == 1
    assert config.grid().points_per_axis == 512
    assert config.drift_spec().kappa == 1.0
    assert config.fpe_config().splitting is Splitting.STRANG
    assert config.fpe_config(dt=1e-4).dt == 1e-4
    assert config.numerics.tau_mass == 1e-3
    data = config.to_dict()
    assert data["rho0"]["kind"] == "gaussian" and isinstance(data["h_ladder"], list)


def test_validation():
    raises(ConfigError, SchemeConfig, h_ladder=(0.1, 0.05))
    raises(ConfigError, SchemeConfig, h_ladder=(0.1, 0.2, 0.05))
    raises(ConfigError, SchemeConfig, h_ladder=(0.1, 0.05, 0.0))
    raises(ConfigError, SchemeConfig, T=0.05)
    raises(ConfigError, SchemeConfig, reference="exact")
    raises(ConfigError, SchemeConfig, workers=0)
    raises(ConfigError, SchemeConfig, alpha=0.9)
    raises(ConfigError, SchemeConfig, fpe_splitting="yoshida")
    raises(ConfigError, SchemeConfig, drift={"kind": "mystery"})
    raises(ConfigError, Rho0Spec, kind="cauchy")


def test_mapping_with_exponents():
    config = config_from_mapping({"h_exponents": [3, 4, 5], "rho0": {"kind": "stable", "t0": 0.2}})
    assert config.h_ladder == (0.125, 0.0625, 0.03125)
    assert config.rho0 == Rho0Spec(kind="stable", t0=0.2)
    raises(ConfigError, config_from_mapping, {"h_exponents": [3, 4, 5], "h_ladder": [0.1, 0.05, 0.01]})
    raises(ConfigError, config_from_mapping, {"gird_n": 64})
    raises(ConfigError, config_from_mapping, {"rho0": {"kind": "gaussian", "mean": 1.0}})


def test_load_config_file():
    path = _write_toml('alpha = 1.7\nn = 256\nh_exponents = [4, 5, 6]\n\n'
                       '[drift]\nkind = "zero"\n\n[rho0]\nkind = "uniform-bump"\nwidth = 2.0\n')
    try:
        config = load_config(path)
    finally:
        os.remove(path)
    assert config.alpha == 1.7 and config.n == 256
    assert config.drift_spec().kappa == 0.0
    assert config.rho0.width == 2.0


def test_load_config_errors():
    raises(ConfigError, load_config, os.path.join(HERE, "no_such_config.toml"))
    path = _write_toml("alpha = \n")
    try:
        raises(ConfigError, load_config, path)
    finally:
        os.remove(path)


def test_shipped_configs_load():
    for name in ("reference.toml", "zero_drift.toml", "fpe_reference.toml"):
        config = load_config(os.path.join(HERE, "configs", name))
        assert len(config.h_ladder) >= 3, name
    assert load_config(os.path.join(HERE, "configs", "fpe_reference.toml")).reference == "fpe"


def test_with_overrides():
    base = SchemeConfig()
    assert with_overrides(base, alpha=None) is base
    changed = with_overrides(base, alpha=1.2, kappa=0.5, rho0_kind="stable", seed=3)
    assert changed.alpha == 1.2 and changed.seed == 3
    assert changed.drift == {"kind": "nemytskii_sat", "kappa": 0.5, "direction": "sine"}
    assert changed.rho0.kind == "stable"
    zero = with_overrides(base, drift_kind="zero")
    assert zero.drift == {"kind": "zero"}
    raises(ConfigError, with_overrides, base, drift_kind="mystery")


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 config.py"))
