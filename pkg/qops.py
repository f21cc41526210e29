"""
希尔伯特空间代数

子系统顺序固定为 qubit1 ⊗ qubit2 ⊗ boson；量子比特基 |g⟩ 在前、|e⟩ 在后，
σz|e⟩ = +|e⟩。所有矩阵都是稠密的 complex128。
"""
import logging
import string
from functools import reduce
from typing import Tuple, Iterable, Union, Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import linalg
from scipy.stats import entropy

from errors import InvalidStateError

logger = logging.getLogger(__name__)

QUBIT1 = "qubit1"
QUBIT2 = "qubit2"
BOSON = "boson"
EIGENBASIS = "eigenbasis"
COMPOSITE_LABELS = (QUBIT1, QUBIT2, BOSON)
EIGEN_ROUNDOFF = 1e-14  # 相对最大本征值

# 2×2 单比特算符，基序 (|g⟩, |e⟩)
SIGMA_PLUS = np.array([[0, 0], [1, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_X = SIGMA_PLUS + SIGMA_MINUS
SIGMA_Y = -1j * (SIGMA_PLUS - SIGMA_MINUS)
SIGMA_Z = np.diag([-1.0, 1.0]).astype(complex)
IDENTITY_2 = np.eye(2, dtype=complex)

PAULI_MATRICES = {
    "x": SIGMA_X,
    "y": SIGMA_Y,
    "z": SIGMA_Z,
    "plus": SIGMA_PLUS,
    "minus": SIGMA_MINUS,
}

Subsystems = Union[str, Iterable[str]]


# ==================== 数据类型 ====================

class HilbertSpace(BaseModel):
    """两个量子比特 + 一个截断玻色模"""
    model_config = ConfigDict(frozen=True)

    n_fock: int = Field(ge=2, description="Fock 截断（|0⟩…|n_fock−1⟩）")
    n_qubits: Literal[2] = 2

    @property
    def dim(self) -> int:
        return 4 * self.n_fock

    @property
    def dims(self) -> Tuple[int, int, int]:
        return (2, 2, self.n_fock)

    @property
    def labels(self) -> Tuple[str, str, str]:
        return COMPOSITE_LABELS


class Operator(BaseModel):
    """稠密方阵 + 子系统维度信息"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    data: np.ndarray
    dims: Tuple[int, ...]
    labels: Tuple[str, ...]

    @field_validator("data", mode="before")
    @classmethod
    def _as_complex(cls, value):
        return np.asarray(value, dtype=complex)

    @model_validator(mode="after")
    def _check_shape(self):
        side = int(np.prod(self.dims))
        if self.data.ndim != 2 or self.data.shape != (side, side):
            raise ValueError(f"矩阵形状 {self.data.shape} 与子系统维度 {self.dims} 不符")
        if len(self.labels) != len(self.dims):
            raise ValueError("labels 与 dims 长度不一致")
        return self

    @classmethod
    def on(cls, space: HilbertSpace, data: np.ndarray) -> "Operator":
        return cls(data=data, dims=space.dims, labels=space.labels)

    @property
    def dim(self) -> int:
        return self.data.shape[0]

    def dag(self) -> "Operator":
        return Operator(data=self.data.conj().T, dims=self.dims, labels=self.labels)

    def same_basis(self, other: "Operator") -> bool:
        return self.dims == other.dims and self.labels == other.labels


class DensityMatrix(Operator):
    """
    量子态：厄米、迹为1、半正定（容差内）

    半正定性在需要本征分解的地方检查（herm_sqrt / 熵），构造时只检查厄米性和迹，
    避免对上千维的态重复做本征分解。
    """

    herm_tol: float = 1e-10
    trace_tol: float = 1e-8
    psd_tol: float = 1e-10

    @model_validator(mode="after")
    def _check_state(self):
        herm_err = np.max(np.abs(self.data - self.data.conj().T)) if self.data.size else 0.0
        if herm_err > self.herm_tol:
            raise InvalidStateError(f"密度矩阵非厄米: ‖ρ−ρ†‖_max = {herm_err:.3e}")
        trace = np.trace(self.data)
        if abs(trace - 1.0) > self.trace_tol:
            raise InvalidStateError(f"密度矩阵迹不为1: Tr ρ = {trace:.12g}")
        return self

    @classmethod
    def from_matrix(cls, data: np.ndarray, dims: Tuple[int, ...], labels: Tuple[str, ...],
                    **tolerances) -> "DensityMatrix":
        """厄米化后构造（数值误差带来的微小反厄米部分直接去掉）"""
        data = np.asarray(data, dtype=complex)
        return cls(data=0.5 * (data + data.conj().T), dims=dims, labels=labels, **tolerances)

    @classmethod
    def from_ket(cls, ket: np.ndarray, dims: Tuple[int, ...], labels: Tuple[str, ...]) -> "DensityMatrix":
        ket = np.asarray(ket, dtype=complex).ravel()
        ket = ket / np.linalg.norm(ket)
        return cls.from_matrix(np.outer(ket, ket.conj()), dims, labels)

    def eigenvalues(self) -> np.ndarray:
        """检查半正定并返回截断到 ≥0 的本征值"""
        evals = linalg.eigvalsh(self.data)
        _check_psd(evals, self.psd_tol)
        return np.clip(evals, 0.0, None)

    def tolerances(self) -> dict:
        return {"herm_tol": self.herm_tol, "trace_tol": self.trace_tol, "psd_tol": self.psd_tol}


def _check_psd(evals: np.ndarray, psd_tol: float):
    lowest = float(np.min(evals))
    if lowest < -psd_tol:
        raise InvalidStateError(f"密度矩阵不是半正定的: λ_min = {lowest:.3e}")


# ==================== 算符构造 ====================

def tensor(*factors: np.ndarray) -> np.ndarray:
    """Kronecker 积，按参数顺序"""
    return reduce(np.kron, factors)


def boson_annihilation(n_fock: int) -> np.ndarray:
    """只作用在玻色因子上的 â：â|n⟩ = √n |n−1⟩"""
    return np.diag(np.sqrt(np.arange(1, n_fock)), k=1).astype(complex)


def embed(factor: np.ndarray, target: str, space: HilbertSpace) -> Operator:
    """把单个子系统上的算符嵌入复合空间，其余子系统为单位算符"""
    parts = [IDENTITY_2, IDENTITY_2, np.eye(space.n_fock, dtype=complex)]
    parts[space.labels.index(target)] = factor
    return Operator.on(space, tensor(*parts))


def identity(space: HilbertSpace) -> Operator:
    return Operator.on(space, np.eye(space.dim, dtype=complex))


def annihilation(space: HilbertSpace) -> Operator:
    return embed(boson_annihilation(space.n_fock), BOSON, space)


def number_operator(space: HilbertSpace) -> Operator:
    a = boson_annihilation(space.n_fock)
    return embed(a.conj().T @ a, BOSON, space)


def pauli(which: str, qubit_index: int, space: HilbertSpace) -> Operator:
    """σ_x/σ_y/σ_z/σ+/σ− 作用在第 qubit_index (1 或 2) 个比特上"""
    if which not in PAULI_MATRICES:
        raise ValueError(f"未知的 Pauli 算符: {which}")
    if qubit_index not in (1, 2):
        raise ValueError(f"比特编号只能是 1 或 2，收到 {qubit_index}")
    return embed(PAULI_MATRICES[which], (QUBIT1, QUBIT2)[qubit_index - 1], space)


def parity_operator(space: HilbertSpace) -> Operator:
    """π̂ = exp(iπ n̂)，n̂ = â†â + σ+σ−(1) + σ+σ−(2)；对角 ±1"""
    qubit = np.array([1.0, -1.0])
    boson = (-1.0) ** np.arange(space.n_fock)
    return Operator.on(space, np.diag(tensor(qubit, qubit, boson)).astype(complex))


def excitation_number(space: HilbertSpace) -> Operator:
    """总激发数 n̂（与 Ĥ 不对易，只有宇称守恒）"""
    a = boson_annihilation(space.n_fock)
    n_hat = embed(a.conj().T @ a, BOSON, space).data
    for index in (1, 2):
        n_hat = n_hat + pauli("plus", index, space).data @ pauli("minus", index, space).data
    return Operator.on(space, n_hat)


def basis_ket(space: HilbertSpace, q1: str, q2: str, n: int) -> np.ndarray:
    """|q1, q2, n⟩，q 取 'g' 或 'e'"""
    levels = {"g": 0, "e": 1}
    return tensor(np.eye(2)[levels[q1]], np.eye(2)[levels[q2]], np.eye(space.n_fock)[n]).astype(complex)


def displacement_operator(alpha: complex, n_fock: int) -> np.ndarray:
    """截断空间中的 D̂(α) = exp(αâ† − α*â)，直接对截断生成元取矩阵指数"""
    a = boson_annihilation(n_fock)
    return linalg.expm(alpha * a.conj().T - np.conj(alpha) * a)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def expect(op: Union[Operator, np.ndarray], rho: Union[Operator, np.ndarray]) -> complex:
    """Tr(ρ Ô)"""
    op_data = op.data if isinstance(op, Operator) else op
    rho_data = rho.data if isinstance(rho, Operator) else rho
    return complex(np.sum(rho_data * op_data.T))


# ==================== 约化与变换 ====================

def resolve_subsystems(labels: Tuple[str, ...], subsystems: Subsystems) -> Tuple[int, ...]:
    if isinstance(subsystems, str):
        subsystems = (subsystems,)
    chosen = set(subsystems)
    unknown = chosen - set(labels)
    if unknown:
        raise ValueError(f"未知子系统 {sorted(unknown)}，可选 {labels}")
    return tuple(i for i, label in enumerate(labels) if label in chosen)


def partial_trace(rho: DensityMatrix, keep: Subsystems) -> DensityMatrix:
    """保留 keep 中的子系统，对其余子系统求迹"""
    keep_idx = resolve_subsystems(rho.labels, keep)
    n = len(rho.dims)
    if not keep_idx or len(keep_idx) == n:
        raise ValueError("keep 必须是非空的真子集")

    letters = string.ascii_letters
    rows = list(letters[:n])
    cols = list(letters[n:2 * n])
    for i in range(n):
        if i not in keep_idx:
            cols[i] = rows[i]
    out = "".join(rows[i] for i in keep_idx) + "".join(cols[i] for i in keep_idx)
    reduced = np.einsum("".join(rows + cols) + "->" + out, rho.data.reshape(rho.dims + rho.dims))

    dims = tuple(rho.dims[i] for i in keep_idx)
    side = int(np.prod(dims))
    return DensityMatrix.from_matrix(
        reduced.reshape(side, side), dims, tuple(rho.labels[i] for i in keep_idx), **rho.tolerances()
    )


def partial_transpose(rho: Operator, subsystems: Subsystems) -> Operator:
    """对指定子系统的指标做转置（可以是一组子系统构成的分块）"""
    idx = resolve_subsystems(rho.labels, subsystems)
    if not idx:
        raise ValueError("至少要指定一个子系统")
    n = len(rho.dims)
    axes = list(range(2 * n))
    for i in idx:
        axes[i], axes[n + i] = axes[n + i], axes[i]
    transposed = rho.data.reshape(rho.dims + rho.dims).transpose(axes).reshape(rho.dim, rho.dim)
    return Operator(data=transposed, dims=rho.dims, labels=rho.labels)


def swap_qubits(rho: DensityMatrix) -> DensityMatrix:
    """交换两个量子比特因子（两比特态或复合空间态）"""
    n = len(rho.dims)
    order = list(range(n))
    order[0], order[1] = 1, 0
    axes = order + [n + i for i in order]
    dims = tuple(rho.dims[i] for i in order)
    swapped = rho.data.reshape(rho.dims + rho.dims).transpose(axes).reshape(rho.dim, rho.dim)
    return DensityMatrix.from_matrix(swapped, dims, rho.labels, **rho.tolerances())


# ==================== 矩阵函数 ====================

def herm_sqrt(rho: DensityMatrix) -> Operator:
    """半正定平方根；|负本征值| ≤ psd_tol 的部分截断为0，舍入量级的正本征值也按0处理"""
    evals, evecs = linalg.eigh(rho.data)
    _check_psd(evals, rho.psd_tol)
    evals = np.where(evals > EIGEN_ROUNDOFF * max(float(evals[-1]), 0.0), evals, 0.0)
    roots = np.sqrt(evals)
    return Operator(data=(evecs * roots) @ evecs.conj().T, dims=rho.dims, labels=rho.labels)


def von_neumann_entropy(rho: DensityMatrix) -> float:
    """S(ρ) = −Σ λ log₂ λ，0·log0 := 0，单位 bit"""
    return float(entropy(rho.eigenvalues(), base=2))


def trace_distance(rho: Operator, sigma: Operator) -> float:
    """½‖ρ − σ‖₁"""
    if rho.dim != sigma.dim:
        raise ValueError(f"维度不一致: {rho.dim} vs {sigma.dim}")
    diff = rho.data - sigma.data
    return 0.5 * float(np.sum(np.abs(linalg.eigvalsh(0.5 * (diff + diff.conj().T)))))
