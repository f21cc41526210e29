"""
Pydantic数据验证模型

物理参数、热浴参数、单点报告和扫描配置都在这里定义；
约束直接写在 Field 上，构造时即校验。
"""
import math
from typing import Optional, List, Dict, Any, Tuple, Literal

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from errors import ConfigError


Channel = Literal["qubit1", "qubit2", "cavity"]
AxisName = Literal["g", "g1", "g2", "delta", "delta1", "delta2", "omega", "T"]
CutoffTarget = Literal["n_photons", "zeta2", "p0", "spectrum"]
ALL_CHANNELS: Tuple[str, ...] = ("qubit1", "qubit2", "cavity")

# 报告中的物理量，顺序即 CSV 列顺序
QUANTIFIER_FIELDS: Tuple[str, ...] = (
    "g2", "x_excitations", "zeta2", "n_photons",
    "negativity_qq", "negativity_q_f", "concurrence",
    "mutual_info", "discord", "coherence_re", "lqu", "P0",
)
DIAGNOSTIC_FIELDS: Tuple[str, ...] = ("n_fock_used", "M_used")
ReportField = Literal[
    "g2", "x_excitations", "zeta2", "n_photons",
    "negativity_qq", "negativity_q_f", "concurrence",
    "mutual_info", "discord", "coherence_re", "lqu", "P0",
]


# ==================== 物理参数 ====================

class ModelParams(BaseModel):
    """两比特量子 Rabi 模型参数（以参考频率为单位）"""
    model_config = ConfigDict(frozen=True)

    omega: float = Field(gt=0, description="玻色模频率 ω")
    delta1: float = Field(ge=0, description="比特1跃迁频率 Δ₁")
    delta2: float = Field(ge=0, description="比特2跃迁频率 Δ₂")
    g1: float = Field(ge=0, description="比特1耦合强度")
    g2: float = Field(ge=0, description="比特2耦合强度")

    @classmethod
    def symmetric(cls, omega: float, delta: float, g: float) -> "ModelParams":
        """简并比特、对称耦合"""
        return cls(omega=omega, delta1=delta, delta2=delta, g1=g, g2=g)

    @property
    def g_plus(self) -> float:
        return self.g1 + self.g2

    @property
    def g_minus(self) -> float:
        return self.g1 - self.g2

    @property
    def displacement_scale(self) -> float:
        """DSC 极限下相干态位移尺度 d = (g₁+g₂)/ω"""
        return self.g_plus / self.omega

    def swapped(self) -> "ModelParams":
        """交换两个比特"""
        return ModelParams(omega=self.omega, delta1=self.delta2, delta2=self.delta1, g1=self.g2, g2=self.g1)

    def decoupled(self) -> "ModelParams":
        return self.model_copy(update={"g1": 0.0, "g2": 0.0})


class BathParams(BaseModel):
    """Ohmic 热浴参数"""
    model_config = ConfigDict(frozen=True)

    alpha: float = Field(0.001, gt=0, description="系统-环境耦合 α")
    omega_c: float = Field(10.0, gt=0, description="截止频率 ω_c")
    T: float = Field(ge=0, description="热浴温度（k_B = 1）")
    channels: Tuple[Channel, ...] = Field(ALL_CHANNELS, min_length=1)

    @classmethod
    def for_mode(cls, omega: float, T: float, channels: Tuple[str, ...] = ALL_CHANNELS) -> "BathParams":
        """默认取 α = 0.001ω、ω_c = 10ω"""
        return cls(alpha=0.001 * omega, omega_c=10.0 * omega, T=T, channels=channels)


class ThermalSpec(BaseModel):
    """正则系综参数"""
    model_config = ConfigDict(frozen=True)

    T: float = Field(ge=0, description="温度（k_B = 1）")
    prune_tol: float = Field(1e-14, gt=0, le=1e-6, description="低于该布居的本征态不参与求和")


class EvaluationOptions(BaseModel):
    """单点计算选项"""
    model_config = ConfigDict(frozen=True)

    quantifiers: Optional[Tuple[ReportField, ...]] = None  # None 表示全部
    include_gap: bool = False
    convergence_target: CutoffTarget = "n_photons"
    max_fock: int = Field(1024, ge=16)
    n_fock: Optional[int] = Field(None, ge=2, description="固定截断，跳过自适应收敛")
    discord_side: Literal["A", "B"] = "A"
    guard_band: int = Field(8, ge=0)
    prune_tol: float = Field(1e-14, gt=0, le=1e-6)

    def wants(self, name: str) -> bool:
        return self.quantifiers is None or name in self.quantifiers


# ==================== 单点报告 ====================

class QuantifierReport(BaseModel):
    """一个网格点的全部标量；None 表示未计算或无定义（如基态下的 G²(0)）"""

    g2: Optional[float] = None
    x_excitations: Optional[float] = None
    zeta2: Optional[float] = None
    n_photons: Optional[float] = None
    negativity_qq: Optional[float] = None
    negativity_q_f: Optional[float] = None
    concurrence: Optional[float] = None
    mutual_info: Optional[float] = None
    discord: Optional[float] = None
    coherence_re: Optional[float] = None
    lqu: Optional[float] = None
    P0: Optional[float] = None
    gap_ratio: Optional[float] = None
    n_fock_used: int = Field(ge=2)
    M_used: int = Field(ge=0)

    @model_validator(mode="after")
    def _check_ranges(self):
        if self.zeta2 is not None and self.zeta2 <= 0:
            raise ValueError(f"ζ² 必须为正: {self.zeta2}")
        for name in ("mutual_info", "discord", "coherence_re", "negativity_qq", "negativity_q_f"):
            value = getattr(self, name)
            if value is not None and value < -1e-9:
                raise ValueError(f"{name} 为负: {value}")
        for name in ("concurrence", "lqu"):
            value = getattr(self, name)
            if value is not None and not (-1e-9 <= value <= 1 + 1e-9):
                raise ValueError(f"{name} 超出 [0, 1]: {value}")
        return self


# ==================== 扫描配置 ====================

class AxisSpec(BaseModel):
    """一个扫描轴"""
    model_config = ConfigDict(extra="forbid")

    name: AxisName
    min: float
    max: float
    points: int = Field(ge=2)
    scale: Literal["linear", "log"] = "linear"

    @model_validator(mode="after")
    def _check_range(self):
        if not self.min < self.max:
            raise ValueError(f"轴 {self.name}: 需要 min < max")
        if self.scale == "log" and self.min <= 0:
            raise ValueError(f"轴 {self.name}: 对数刻度要求 min > 0")
        return self

    def values(self) -> np.ndarray:
        if self.scale == "log":
            return np.geomspace(self.min, self.max, self.points)
        return np.linspace(self.min, self.max, self.points)


class SeriesEntry(BaseModel):
    """一条曲线：在固定参数之上的覆盖值（温度依赖图用）"""
    model_config = ConfigDict(extra="forbid")

    name: str
    overrides: Dict[AxisName, float]


class ModelSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    omega: float = Field(1.0, gt=0)
    delta1: float = Field(1.0, ge=0)
    delta2: float = Field(1.0, ge=0)
    g1: float = Field(0.0, ge=0)
    g2: float = Field(0.0, ge=0)


class BathSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    T: float = Field(0.1, ge=0)
    alpha: Optional[float] = Field(None, gt=0, description="缺省 0.001ω")
    omega_c: Optional[float] = Field(None, gt=0, description="缺省 10ω")
    channels: Tuple[Channel, ...] = Field(ALL_CHANNELS, min_length=1)


class SweepSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    axes: List[AxisSpec] = Field(min_length=1, max_length=2)
    quantifiers: List[ReportField] = Field(default_factory=lambda: list(QUANTIFIER_FIELDS))
    include_gap: bool = False
    workers: int = Field(1, ge=1)
    reference_unit: Literal["omega", "delta"] = "omega"
    series: List[SeriesEntry] = Field(default_factory=list)
    convergence_target: CutoffTarget = "n_photons"
    max_fock: int = Field(1024, ge=16)

    @field_validator("axes")
    @classmethod
    def _unique_axes(cls, axes):
        names = [axis.name for axis in axes]
        if len(set(names)) != len(names):
            raise ValueError(f"扫描轴重复: {names}")
        return axes

    @field_validator("quantifiers")
    @classmethod
    def _declaration_order(cls, quantifiers):
        # 统一为 QuantifierReport 声明顺序，去重
        return [name for name in QUANTIFIER_FIELDS if name in set(quantifiers)]


class OutputSection(BaseModel):
    model_config = ConfigDict(extra="forbid")

    dir: str = "results"
    csv_name: str = "sweep.csv"
    heatmaps: List[str] = Field(default_factory=list)
    record_timing: bool = False


class SweepConfig(BaseModel):
    """扫描配置文件（model / bath / sweep / output 四节）"""
    model_config = ConfigDict(protected_namespaces=(), extra="forbid")

    model: ModelSection = Field(default_factory=ModelSection)
    bath: BathSection = Field(default_factory=BathSection)
    sweep: SweepSection
    output: OutputSection = Field(default_factory=OutputSection)

    @model_validator(mode="after")
    def _check_heatmaps(self):
        if self.output.heatmaps and len(self.sweep.axes) != 2:
            raise ValueError("热图输出需要恰好两个扫描轴")
        allowed = set(self.sweep.quantifiers) | ({"gap_ratio"} if self.sweep.include_gap else set())
        missing = [name for name in self.output.heatmaps if name not in allowed]
        if missing:
            raise ValueError(f"热图字段未在 quantifiers 中: {missing}")
        return self

    @classmethod
    def from_file(cls, path: str) -> "SweepConfig":
        """读取 JSON/YAML 配置；任何解析或校验错误都转成 ConfigError"""
        try:
            with open(path, "r", encoding="utf-8") as handle:
                raw = yaml.safe_load(handle)
        except (OSError, yaml.YAMLError) as e:
            raise ConfigError(f"无法读取配置文件 {path}: {e}")
        if not isinstance(raw, dict):
            raise ConfigError(f"配置文件 {path} 顶层必须是对象")
        try:
            return cls.model_validate(raw)
        except ValidationError as e:
            raise ConfigError(f"配置校验失败: {e}")

    # 规格中的扁平字段名
    @property
    def axes(self) -> List[AxisSpec]:
        return self.sweep.axes

    @property
    def quantifiers(self) -> List[str]:
        return self.sweep.quantifiers

    @property
    def include_gap(self) -> bool:
        return self.sweep.include_gap

    @property
    def workers(self) -> int:
        return self.sweep.workers

    @property
    def output_dir(self) -> str:
        return self.output.dir

    @property
    def reference_unit(self) -> str:
        return self.sweep.reference_unit

    def grid_size(self) -> int:
        return math.prod(axis.points for axis in self.axes) * max(1, len(self.sweep.series))

    def resolve_point(self, values: Dict[str, float]) -> Tuple[ModelParams, BathParams]:
        """把固定值 + 覆盖值（series/轴）合成一个网格点的参数"""
        fixed: Dict[str, float] = {**self.model.model_dump(), "T": self.bath.T}
        for name, value in values.items():
            if name == "g":
                fixed["g1"] = fixed["g2"] = value
            elif name == "delta":
                fixed["delta1"] = fixed["delta2"] = value
            else:
                fixed[name] = value
        T = fixed.pop("T")
        params = ModelParams(**fixed)
        bath = BathParams(
            alpha=self.bath.alpha if self.bath.alpha is not None else 0.001 * params.omega,
            omega_c=self.bath.omega_c if self.bath.omega_c is not None else 10.0 * params.omega,
            T=T,
            channels=self.bath.channels,
        )
        return params, bath

    def echo(self) -> Dict[str, Any]:
        """可自描述的配置回显：显式记录单位和热浴缺省值"""
        data = self.model_dump(mode="json")
        data["bath"]["alpha_default"] = "0.001*omega" if self.bath.alpha is None else None
        data["bath"]["omega_c_default"] = "10*omega" if self.bath.omega_c is None else None
        data["units"] = f"all frequencies in units of {self.reference_unit}; k_B = 1"
        return data


# ==================== 扫描结果 ====================

class SweepRow(BaseModel):
    """一个网格点的结果"""
    indices: Tuple[int, ...]
    series: Optional[str] = None
    axis_values: Dict[str, float]
    report: QuantifierReport
    wall_ms: Optional[float] = None


class FailureRecord(BaseModel):
    """失败的网格点（错误码 + 信息）"""
    indices: Tuple[int, ...]
    series: Optional[str] = None
    axis_values: Dict[str, float]
    code: str
    message: str


class SweepResult(BaseModel):
    """扫描结果：按轴下标字典序排列"""
    rows: List[SweepRow]
    config_echo: Dict[str, Any]
    failures: List[FailureRecord] = Field(default_factory=list)
    axis_names: List[str]
    quantifiers: List[str]
    include_gap: bool = False
    series_names: List[str] = Field(default_factory=list)
    axis_points: List[int] = Field(default_factory=list)
