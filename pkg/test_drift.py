#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试 drift.py: 内置漂移、时间投影、位移积分与条件检查
"""

import math
import sys

import numpy as np

from drift import (BUILTIN_DRIFTS, DriftSpec, autonomous_drift, drift_from_config, eval_bh, nemytskii_sat,
                   nemytskii_trunc, partial_displacement, pi_h, step_displacement, step_index, unbounded_linear,
                   validate_drift, zero_drift)
from errors import ConfigError, DriftViolatesH, InvalidParameter, NegativeDensityInput
from testing import raises, run_all


def _time_sine_drift():
    return DriftSpec(lambda t, x, u: np.full_like(x, math.sin(2.0 * math.pi * t)), 1.0, "time_sine")


def test_kappa_must_be_nonnegative():
    raises(InvalidParameter, DriftSpec, lambda t, x, u: x, -1.0)
    raises(InvalidParameter, DriftSpec, lambda t, x, u: x, float("inf"))


def test_builtin_drifts_satisfy_bounds():
    for dim in (1, 2):
        for drift in (zero_drift(), autonomous_drift(0.7), nemytskii_sat(1.0), nemytskii_trunc(2.0, "tanh"),
                      nemytskii_sat(0.5, "constant")):
            report = validate_drift(drift, sample_count=1024, dim=dim)
            assert report.passed, (drift.label, dim, report.to_dict())
            assert report.samples == 1024


def test_unbounded_drift_is_rejected():
    error = raises(DriftViolatesH, validate_drift, unbounded_linear())
    assert error.report is not None and not error.report.passed
    report = validate_drift(unbounded_linear(), raise_on_violation=False)
    assert report.max_abs > 1.0


def test_non_autonomous_drift_validation():
    report = validate_drift(_time_sine_drift(), sample_count=256)
    assert report.passed
    assert report.max_lipschitz == 0.0


def test_drift_from_config():
    drift = drift_from_config({"kind": "nemytskii_sat", "kappa": 0.5, "direction": "tanh"})
    assert drift.kappa == 0.5
    assert drift.to_config() == {"kind": "nemytskii_sat", "kappa": 0.5, "direction": "tanh"}
    assert drift_from_config({"kind": "zero"}).kappa == 0.0
    raises(ConfigError, drift_from_config, {"kind": "mystery"})
    raises(ConfigError, drift_from_config, {"kind": "zero", "kappa": 1.0})
    raises(ConfigError, drift_from_config, {"kind": "autonomous", "kappa": 1.0, "direction": "spiral"})
    raises(ConfigError, drift_from_config, {"kind": "autonomous", "kappa": -1.0})
    assert set(BUILTIN_DRIFTS) == {"zero", "autonomous", "nemytskii_sat", "nemytskii_trunc", "unbounded_linear"}


def test_pi_h():
    assert math.isclose(pi_h(0.3, 0.1), 0.3)
    assert pi_h(0.05, 0.1) == 0.0
    assert math.isclose(pi_h(0.7999, 0.25), 0.75)
    assert step_index(1.0, 0.125) == 8
    raises(InvalidParameter, step_index, -0.1, 0.1)
    raises(InvalidParameter, pi_h, 0.1, 0.0)


def test_eval_bh_vanishes_on_first_step():
    drift = autonomous_drift(1.0, "constant")
    assert np.array_equal(eval_bh(drift, 0.05, [0.3], [1.0], 0.1), [0.0])
    assert np.allclose(eval_bh(drift, 0.15, [0.3], [1.0], 0.1), [1.0])
    out = eval_bh(drift, 0.15, np.zeros((4, 1)), np.ones(4), 0.1)
    assert out.shape == (4, 1)
    raises(NegativeDensityInput, eval_bh, drift, 0.15, [0.3], [-1e-3], 0.1)


def test_step_displacement_integrates_in_time():
    drift = _time_sine_drift()
    d = step_displacement(drift, 1, 0.25, [0.0], [1.0])
    assert abs(d[0] - 1.0 / (2.0 * math.pi)) < 1e-5
    raises(InvalidParameter, step_displacement, drift, 0, 0.25, [0.0], [1.0])
    raises(NegativeDensityInput, step_displacement, drift, 1, 0.25, [0.0], [-1.0])


def test_autonomous_displacement_is_width_times_drift():
    drift = nemytskii_sat(2.0, "sine")
    x = np.linspace(-3, 3, 7)[:, None]
    u = np.linspace(0, 2, 7)
    expected = 0.3 * drift(0.0, x, u)
    assert np.allclose(partial_displacement(drift, 0.1, 0.4, x, u), expected)
    assert np.array_equal(partial_displacement(drift, 0.2, 0.2, x, u), np.zeros_like(x))
    raises(InvalidParameter, partial_displacement, drift, 0.4, 0.1, x, u)


if __name__ == "__main__":
    sys.exit(run_all(dict(globals()), "测试 drift.py"))
