"""
异常定义

每个异常带一个稳定的 code，方便在扫描结果和 CLI 输出里归类
"""
from typing import Optional, Dict, Any


class RabiError(Exception):
    """所有数值/配置错误的基类"""

    code = "RABI_ERROR"

    def __init__(self, message: str, details: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.details = details or {}

    def __str__(self):
        return f"[{self.code}] {self.message}"


class InvalidStateError(RabiError):
    """密度矩阵不合法（非厄米、迹不为1、负本征值超出容差）；从校验器中原样抛出"""
    code = "INVALID_STATE"


class CutoffError(RabiError):
    """Fock 截断超过硬上限仍未收敛"""
    code = "CUTOFF_NOT_CONVERGED"


class DispersiveLimitError(RabiError, ValueError):
    """色散近似分母为零"""
    code = "DISPERSIVE_UNDEFINED"


class TruncationError(RabiError, ValueError):
    """本征基截断层数不足以覆盖热占据"""
    code = "TRUNCATION_TOO_SMALL"


class NonUniqueSteadyStateError(RabiError):
    """Liouvillian 零空间简并"""
    code = "NON_UNIQUE_STEADY_STATE"


class UnstableLiouvillianError(RabiError):
    """Liouvillian 出现正实部本征值"""
    code = "UNSTABLE_LIOUVILLIAN"


class BasisMismatchError(RabiError, ValueError):
    """态与算符不在同一个基/维度上"""
    code = "BASIS_MISMATCH"


class ConfigError(RabiError):
    """扫描配置文件错误"""
    code = "CONFIG_ERROR"


class PointEvaluationError(RabiError):
    """单个网格点计算失败（附带网格点上下文）"""
    code = "POINT_FAILED"
