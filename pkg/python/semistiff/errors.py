"""semistiff 异常层级.

所有库函数抛出的异常都派生自 `SemistiffError`, 调用方可以用一个 except
子句兜住全部数值失败, 也可以按子类精确处理.
"""

from __future__ import annotations

__all__ = [
    "AdmissibilityError",
    "ConfigError",
    "DegreeUndefinedError",
    "SectorError",
    "SemistiffError",
    "SolverError",
    "StagnationError",
    "TruncationError",
    "ValidationError",
]


class SemistiffError(Exception):
    """semistiff 异常基类."""


class ValidationError(SemistiffError, ValueError):
    """参数或网格不满足前置条件."""


class ConfigError(ValidationError):
    """实验配置文件无法解析或校验失败.

    Attributes:
        field: 出错字段的点分路径, 例如 ``grid.n_radial``.
        line: TOML 语法错误所在行 (仅解析阶段可用).
    """

    def __init__(self, message: str, *, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if field is not None:
            where.append(f"字段 {field}")
        if line is not None:
            where.append(f"第 {line} 行")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(f"{prefix}{message}")


class SolverError(SemistiffError):
    """线性求解失败或达到迭代上限."""


class AdmissibilityError(SemistiffError):
    """场不属于允许类 J (边界模长不为 1), 或边界投影无定义."""


class DegreeUndefinedError(SemistiffError):
    """闭合曲线上 |u| 过小, 拓扑度无定义."""


class SectorError(SemistiffError):
    """abdeg 越出 [d-1/2, d+1/2] 窗口或请求的边界度不可达."""


class StagnationError(SemistiffError):
    """回溯步长减半次数耗尽, 能量仍未下降."""


class TruncationError(SemistiffError):
    """级数截断尾项超过允许误差."""
