"""
非经典性与量子关联度量

光子：缀饰 G²(0)、压缩参数 ζ²
比特对：负性、并发度、互信息、量子失协、相对熵相干性、局域量子不确定度
熵一律以 bit 为单位（log₂）。
"""
import logging
import math
from typing import Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg
from scipy.optimize import minimize
from scipy.special import entr
from scipy.stats import entropy

from errors import BasisMismatchError
from qops import (
    BOSON, EIGENBASIS, QUBIT1, QUBIT2, SIGMA_X, SIGMA_Y, SIGMA_Z, IDENTITY_2,
    DensityMatrix, Operator, Subsystems, annihilation, boson_annihilation,
    expect, herm_sqrt, partial_trace, partial_transpose, swap_qubits,
    tensor, von_neumann_entropy, resolve_subsystems,
)
from rabi_model import EigenSystem

logger = logging.getLogger(__name__)

UNDEFINED_G2_THRESHOLD = 1e-14
ZERO_MEAN_TOL = 1e-8
GUARD_BAND = 8
DISCORD_GRID = 64
DISCORD_XATOL = 1e-8

QUBIT_PAIR = (QUBIT1, QUBIT2)


# ==================== 缀饰跃迁算符 / G²(0) ====================

class DressedJumpOperator(BaseModel):
    """X̂⁺ = −i Σ_{k>j} (E_k−E_j) X_jk |φ_j⟩⟨φ_k|，只在对角线上方有非零元"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    xplus: Operator
    M: int

    @property
    def xminus(self) -> np.ndarray:
        return self.xplus.data.conj().T

    @classmethod
    def build(cls, eigs: EigenSystem, M: int, observable: Optional[np.ndarray] = None) -> "DressedJumpOperator":
        """observable 缺省为腔场 X̂ = â + â†"""
        if not 1 <= M <= eigs.size:
            raise ValueError(f"M={M} 超出本征态数 {eigs.size}")
        if observable is None:
            a = annihilation(eigs.space).data
            observable = a + a.conj().T
        X = eigs.project(observable, M)
        energies = eigs.energies[:M]
        gaps = energies[None, :] - energies[:, None]  # [j, k] = E_k − E_j
        xplus = np.triu(-1j * gaps * X, k=1)
        return cls(xplus=Operator(data=xplus, dims=(M,), labels=(EIGENBASIS,)), M=M)


def jump_levels(populated: int, available: int, guard_band: int = GUARD_BAND) -> int:
    """有布居的能级数 + 保护带，不超过可用本征态数"""
    return min(populated + guard_band, available)


def dressed_g2(rho: DensityMatrix, X: DressedJumpOperator) -> Tuple[Optional[float], float]:
    """G²(0) = ⟨(X̂⁻)²(X̂⁺)²⟩/⟨X̂⁻X̂⁺⟩²；⟨X̂⁻X̂⁺⟩ < 1e-14 时 G² 为 None"""
    if not rho.same_basis(X.xplus):
        raise BasisMismatchError(
            f"态的基 {rho.labels}{rho.dims} 与跃迁算符 {X.xplus.labels}{X.xplus.dims} 不一致"
        )
    xp = X.xplus.data
    xm = X.xminus
    single = xm @ xp
    x_num = expect(single, rho).real
    if x_num < UNDEFINED_G2_THRESHOLD:
        return None, max(x_num, 0.0)
    double = xm @ single @ xp
    return expect(double, rho).real / x_num ** 2, x_num


# ==================== 压缩 ====================

def squeezing(rho_full: DensityMatrix) -> Tuple[float, float]:
    """
    裸腔场的二次压缩 ζ² = 1 + 2⟨â†â⟩ − 2|⟨â²⟩|，真空为 1

    热平衡态的 ⟨â⟩ 因宇称对称为零；若不为零则改用减去平均值的方差最小值
    """
    rho_boson = partial_trace(rho_full, BOSON)
    a = boson_annihilation(rho_boson.dims[0])
    n_photons = expect(a.conj().T @ a, rho_boson).real
    a_mean = expect(a, rho_boson)
    a2_mean = expect(a @ a, rho_boson)

    if abs(a_mean) <= ZERO_MEAN_TOL:
        zeta2 = 1.0 + 2.0 * n_photons - 2.0 * abs(a2_mean)
    else:
        logger.warning(f"⚠ ⟨â⟩ = {a_mean:.3e} 不为零，压缩参数改用减去平均值的方差")
        zeta2 = 1.0 + 2.0 * (n_photons - abs(a_mean) ** 2) - 2.0 * abs(a2_mean - a_mean ** 2)
    return float(zeta2), float(n_photons)


# ==================== 纠缠 ====================

def negativity(rho: DensityMatrix, subsystem: Subsystems = QUBIT1,
               method: Literal["eigen", "trace_norm"] = "eigen") -> float:
    """
    N = Σᵢ(|εᵢ| − εᵢ)/2，εᵢ 为 ρ^{T_A} 的本征值

    比特对：subsystem=qubit1；比特|场 分割：对完整态转置 boson
    """
    transposed = partial_transpose(rho, subsystem).data
    transposed = 0.5 * (transposed + transposed.conj().T)
    if method == "eigen":
        eps = linalg.eigvalsh(transposed)
        return float(np.sum(np.abs(eps) - eps) / 2.0)
    if method == "trace_norm":
        return float((np.sum(linalg.svdvals(transposed)) - np.trace(transposed).real) / 2.0)
    raise ValueError(f"未知方法: {method}")


def _require_qubit_pair(rho: DensityMatrix):
    if rho.dims != (2, 2):
        raise BasisMismatchError(f"需要两比特态，收到 dims={rho.dims}")


SPIN_FLIP = tensor(SIGMA_Y, SIGMA_Y)


def concurrence(rho_qq: DensityMatrix) -> float:
    """
    C = max(0, λ₁−λ₂−λ₃−λ₄)，λ 为 ρ(σ_y⊗σ_y)ρ*(σ_y⊗σ_y) 本征值平方根（降序）

    λ 等于 √ρ(σ_y⊗σ_y)√ρ* 的奇异值，直接用 SVD 求，避免对接近零的本征值开方
    """
    _require_qubit_pair(rho_qq)
    root = herm_sqrt(rho_qq).data
    lambdas = linalg.svdvals(root @ SPIN_FLIP @ root.conj())
    return float(max(0.0, lambdas[0] - lambdas[1] - lambdas[2] - lambdas[3]))


# ==================== 熵类关联 ====================

def mutual_information(rho: DensityMatrix, part_a: Subsystems = QUBIT1,
                       part_b: Optional[Subsystems] = None) -> float:
    """I(A:B) = S(ρ_A) + S(ρ_B) − S(ρ_AB)；part_b 缺省为 A 的补"""
    idx_a = resolve_subsystems(rho.labels, part_a)
    idx_b = (tuple(i for i in range(len(rho.labels)) if i not in idx_a)
             if part_b is None else resolve_subsystems(rho.labels, part_b))
    if not idx_a or not idx_b or set(idx_a) & set(idx_b):
        raise ValueError("A 与 B 必须是非空且不相交的子系统集合")

    labels_a = [rho.labels[i] for i in idx_a]
    labels_b = [rho.labels[i] for i in idx_b]
    joint = sorted(idx_a + idx_b)
    rho_ab = rho if len(joint) == len(rho.labels) else partial_trace(rho, [rho.labels[i] for i in joint])
    return (von_neumann_entropy(partial_trace(rho, labels_a))
            + von_neumann_entropy(partial_trace(rho, labels_b))
            - von_neumann_entropy(rho_ab))


def _conditional_entropy(rho_qq: np.ndarray, theta, phi):
    """
    在比特 A 上做投影测量 {|ψ(θ,φ)⟩, |ψ⊥⟩} 后，B 的平均条件熵 Σ pᵢ S(ρ_B|i)（bit）

    θ, φ 可以是同形状的数组
    """
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    c = np.cos(theta / 2)
    s = np.sin(theta / 2) * np.exp(1j * phi)
    # |ψ₀⟩ = (c, s)，|ψ₁⟩ = (−s*, c)
    kets = np.stack([np.stack([c, s], axis=-1), np.stack([-np.conj(s), c + 0j], axis=-1)], axis=-2)
    blocks = rho_qq.reshape(2, 2, 2, 2)  # [a, b, a', b']
    # σ_i[b, b'] = Σ ψ_i*[a] ρ[a,b,a',b'] ψ_i[a']
    sigma = np.einsum("...ia,abcd,...ic->...ibd", kets.conj(), blocks, kets)

    p = np.real(sigma[..., 0, 0] + sigma[..., 1, 1])
    half_diff = 0.5 * np.real(sigma[..., 0, 0] - sigma[..., 1, 1])
    radius = np.sqrt(half_diff ** 2 + np.abs(sigma[..., 0, 1]) ** 2)
    lam_plus = np.clip(0.5 * p + radius, 0.0, None)
    lam_minus = np.clip(0.5 * p - radius, 0.0, None)
    # p·S(σ/p) = −Σλ log λ + p log p
    weighted = (entr(lam_plus) + entr(lam_minus) - entr(np.clip(p, 0.0, None))) / math.log(2)
    return weighted.sum(axis=-1)


def quantum_discord(rho_qq: DensityMatrix, measured_side: Literal["A", "B"] = "A") -> float:
    """
    D = S(ρ_A) − S(ρ_AB) + min_Π Σ pᵢ S(ρ_B|i)

    先在 64×64 的 (θ,φ) 网格上取最小值，再用 Nelder–Mead 细化（xatol=1e-8）
    """
    _require_qubit_pair(rho_qq)
    if measured_side == "B":
        rho_qq = swap_qubits(rho_qq)
    elif measured_side != "A":
        raise ValueError(f"measured_side 只能是 'A' 或 'B'，收到 {measured_side}")

    data = rho_qq.data
    thetas = np.linspace(0.0, np.pi, DISCORD_GRID)
    phis = np.linspace(0.0, 2 * np.pi, DISCORD_GRID, endpoint=False)
    grid_theta, grid_phi = np.meshgrid(thetas, phis, indexing="ij")
    values = _conditional_entropy(data, grid_theta, grid_phi)
    best = np.unravel_index(np.argmin(values), values.shape)
    start = np.array([grid_theta[best], grid_phi[best]])

    result = minimize(
        lambda x: float(_conditional_entropy(data, x[0], x[1])),
        start,
        method="Nelder-Mead",
        options={"xatol": DISCORD_XATOL, "fatol": 1e-14, "maxiter": 4000},
    )
    conditional = min(float(result.fun), float(values[best]))

    s_a = von_neumann_entropy(partial_trace(rho_qq, QUBIT1))
    s_ab = von_neumann_entropy(rho_qq)
    return max(s_a - s_ab + conditional, 0.0)


def coherence_re(rho_qq: DensityMatrix) -> float:
    """相对熵相干性 C_RE = S(diag ρ) − S(ρ)，计算基为 σ_z⊗σ_z 本征基"""
    diagonal = np.clip(np.real(np.diag(rho_qq.data)), 0.0, None)
    return max(float(entropy(diagonal, base=2)) - von_neumann_entropy(rho_qq), 0.0)


_LOCAL_PAULIS = [tensor(sigma, IDENTITY_2) for sigma in (SIGMA_X, SIGMA_Y, SIGMA_Z)]


def lqu(rho_qq: DensityMatrix) -> float:
    """U = 1 − λ_max(W)，W_ij = Tr{√ρ (σᵢ⊗I) √ρ (σⱼ⊗I)}"""
    _require_qubit_pair(rho_qq)
    root = herm_sqrt(rho_qq).data
    sandwiched = [root @ sigma @ root for sigma in _LOCAL_PAULIS]
    W = np.array([[np.real(np.trace(left @ sigma)) for sigma in _LOCAL_PAULIS] for left in sandwiched])
    W = 0.5 * (W + W.T)
    return float(1.0 - linalg.eigvalsh(W)[-1])


def qubit_pair(rho_full: DensityMatrix) -> DensityMatrix:
    """复合态约化到两个比特"""
    return partial_trace(rho_full, QUBIT_PAIR)
