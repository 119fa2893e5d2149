# -*- coding: utf-8 -*-
"""
ddsde 异常定义

所有数值模块抛出的异常都继承自 DdsdeError，命令行入口在边界处统一捕获并转换为退出码。
"""


class DdsdeError(Exception):
    """ddsde 工具包的基础异常"""


class InvalidParameter(DdsdeError):
    """参数超出允许范围"""


class OddGridSize(InvalidParameter):
    """每轴格点数必须为偶数"""


class GridMismatch(DdsdeError):
    """两个网格函数不在同一网格上"""


class DomainTooSmall(DdsdeError):
    """截断区域过小，稳定核的尾部质量超出容差"""


class SpectralTailTooLarge(DdsdeError):
    """函数的高频能量过大，谱方法不可靠"""


class NegativeDensityInput(DdsdeError):
    """传入漂移系数的密度值为负"""


class DriftViolatesH(DdsdeError):
    """漂移系数违反有界性或关于 u 的 Lipschitz 条件"""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class MassLeak(DdsdeError):
    """推进过程中跨越周期边界的质量超过容差"""


class NonMonotoneTimes(DdsdeError):
    """时间序列不是严格递增的"""


class CflViolation(DdsdeError):
    """输运子步的时间步长违反 CFL 条件"""


class DegenerateFit(DdsdeError):
    """对数回归退化（误差低于噪声底或步长共线）"""


class ReferenceTooCoarse(DdsdeError):
    """参考解分辨率不足"""


class ConfigError(DdsdeError):
    """配置文件错误"""
