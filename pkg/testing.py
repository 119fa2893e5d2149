#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""
测试脚本共用的小工具: 异常断言、耗时测试标记与 ✅/❌ 运行器
"""

import functools
import os
import sys
import traceback
import unittest

SLOW_ENV = "DDSDE_SLOW"


def raises(exc_type, func, *args, **kwargs):
    """func 抛出 exc_type 时返回该异常，否则断言失败"""
    try:
        func(*args, **kwargs)
    except exc_type as e:
        return e
    raise AssertionError(f"期望抛出 {exc_type.__name__}")


def slow_enabled():
    return os.environ.get(SLOW_ENV) == "1" or "--slow" in sys.argv


def slow(func):
    """耗时的验收测试: 设置 DDSDE_SLOW=1 或带 --slow 参数时才运行，否则跳过"""
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if not slow_enabled():
            raise unittest.SkipTest(f"耗时测试，设置 {SLOW_ENV}=1 或加 --slow 运行")
        return func(*args, **kwargs)

    wrapper.slow = True
    return wrapper


def run_all(namespace, title):
    """依次运行 namespace 中所有 test_ 开头的函数，返回退出码"""
    print(f"=== {title} ===")
    tests = [(name, obj) for name, obj in namespace.items() if name.startswith("test_") and callable(obj)]
    failed = skipped = 0
    for name, func in tests:
        try:
            func()
            print(f"✅ {name}")
        except unittest.SkipTest as e:
            skipped += 1
            print(f"⏭️ {name}: {e}")
        except Exception as e:
            failed += 1
            print(f"❌ {name}: {type(e).__name__}: {e}")
            traceback.print_exc()
    passed = len(tests) - failed - skipped
    print(f"\n共 {len(tests)} 项，通过 {passed} 项，失败 {failed} 项，跳过 {skipped} 项")
    return 0 if failed == 0 else 1
