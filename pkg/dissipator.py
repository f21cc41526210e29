"""
缀饰态主方程

在 Ĥ 的前 M 个本征态上构造 Born–Markov Liouvillian：
跃迁算符 |φ_k⟩⟨φ_j|（k<j），速率 Γ_u^{jk} = γ(Δ_jk)|S_u^{jk}|²，
向上/向下分别乘 n(Δ) 与 1+n(Δ)。

Liouvillian 在本征基中按块存储：布居块是 M×M 的速率生成元，
相干项 ρ_xy（x≠y）各自以 −i(E_x−E_y) − ½(Γout_x+Γout_y) 独立衰减。
需要时可以展开成列优先向量化的 M²×M² 稠密矩阵。
"""
import logging
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg

from errors import BasisMismatchError, NonUniqueSteadyStateError, TruncationError, UnstableLiouvillianError
from qops import EIGENBASIS, DensityMatrix, annihilation, pauli
from rabi_model import EigenSystem, choose_cutoff, solve
from schemas import BathParams, ModelParams
from thermal import ground_cluster_size

logger = logging.getLogger(__name__)

TRUNCATION_THRESHOLD = 1e-12
DEGENERACY_TOL = 1e-9
UNIQUENESS_RATIO = 1e3
NULLSPACE_FLOOR = 1e-12  # 相对最大奇异值
STABILITY_TOL = 1e-8
FOCK_STEP = 8
GAP_LEVEL_STEP = 8
GAP_RTOL = 1e-3


# ==================== 谱密度 ====================

def spectral_density(gap, bath: BathParams):
    """Ohmic 谱密度 γ(Δ) = παΔe^{−Δ/ω_c}，γ(0) = 0"""
    gap = np.asarray(gap, dtype=float)
    if np.any(gap < 0):
        raise ValueError("谱密度只对非负能隙定义")
    value = np.pi * bath.alpha * gap * np.exp(-gap / bath.omega_c)
    return float(value) if value.ndim == 0 else value


def thermal_occupation(gap, T: float):
    """n(Δ) = 1/(e^{Δ/T} − 1)；T=0 时为 0"""
    gap = np.asarray(gap, dtype=float)
    if T == 0:
        return np.zeros_like(gap)
    with np.errstate(divide="ignore", over="ignore"):
        return np.where(gap > 0, 1.0 / np.expm1(gap / T), 0.0)


def _up_factor(gap: np.ndarray, bath: BathParams) -> np.ndarray:
    """γ(Δ)·n(Δ)，写成 παe^{−Δ/ω_c}·Δ/(e^{Δ/T}−1)，Δ→0 时趋于 παT"""
    if bath.T == 0:
        return np.zeros_like(gap)
    x = gap / bath.T
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ratio = np.where(x > 0, gap / np.expm1(x), bath.T)
    return np.pi * bath.alpha * np.exp(-gap / bath.omega_c) * ratio


# ==================== 跃迁表 ====================

def channel_operator(channel: str, eigs: EigenSystem) -> np.ndarray:
    """与热浴耦合的系统算符：比特 σ̂ₓ⁽ⁱ⁾，腔 â + â†"""
    space = eigs.space
    if channel == "qubit1":
        return pauli("x", 1, space).data
    if channel == "qubit2":
        return pauli("x", 2, space).data
    if channel == "cavity":
        a = annihilation(space).data
        return a + a.conj().T
    raise ValueError(f"未知通道: {channel}")


def thermal_level_count(eigs: EigenSystem, T: float, threshold: float = TRUNCATION_THRESHOLD) -> int:
    """最小的 M，使 e^{−(E_{M−1}−E₀)/T} < threshold"""
    shifted = eigs.energies - eigs.energies[0]
    if T == 0:
        occupied = ground_cluster_size(eigs)
    else:
        occupied = int(np.count_nonzero(np.exp(-shifted / T) >= threshold))
    required = max(occupied + 1, 2)
    if required > eigs.size:
        raise TruncationError(
            f"本征态数 {eigs.size} 不足以覆盖 T={T} 的热占据（需要 {required}）",
            details={"required_M": required, "available": eigs.size},
        )
    return required


def solve_thermal(params: ModelParams, T: float, n_fock: Optional[int] = None,
                  hard_max: int = 1024) -> EigenSystem:
    """
    对角化，并保证本征态数覆盖温度 T 的热窗口

    n_fock 缺省由 choose_cutoff 给出；⟨a†a⟩ 收敛并不保证 4·n_fock 个本征态够用，
    不够时逐步加大 n_fock，直到 hard_max。
    """
    n_fock = n_fock or choose_cutoff(params, T, hard_max=hard_max)
    while True:
        eigs = solve(params, n_fock)
        try:
            thermal_level_count(eigs, T)
            return eigs
        except TruncationError:
            if n_fock >= hard_max:
                raise
        n_next = min(hard_max, n_fock + max(FOCK_STEP, n_fock // 4))
        logger.info(f"⚠ n_fock={n_fock} 的本征态不足以覆盖 T={T} 的热窗口，增大到 {n_next}")
        n_fock = n_next


class DressedTransitionTable(BaseModel):
    """
    每个通道 u、每对 k<j 的跃迁数据；矩阵下标 [j, k] 只在 j>k 处有值

    rate_up[u][j,k] 为 k→j 的速率 Γn，rate_down[u][j,k] 为 j→k 的速率 Γ(1+n)
    """
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    M: int
    T: float
    energies: np.ndarray
    channels: Tuple[str, ...]
    coefficients: Dict[str, np.ndarray]
    rates: Dict[str, np.ndarray]
    occupations: np.ndarray
    rate_up: Dict[str, np.ndarray]
    rate_down: Dict[str, np.ndarray]

    @property
    def gaps(self) -> np.ndarray:
        return np.tril(self.energies[:, None] - self.energies[None, :], k=-1)

    def total_up(self) -> np.ndarray:
        return sum(self.rate_up[u] for u in self.channels)

    def total_down(self) -> np.ndarray:
        return sum(self.rate_down[u] for u in self.channels)


def transition_table(eigs: EigenSystem, bath: BathParams, M: Optional[int] = None) -> DressedTransitionTable:
    """
    S_u = V_M† Ô_u V_M，Γ_u^{jk} = γ(Δ_jk)|S_u^{jk}|²

    简并对（Δ < 1e-9·scale）按 Δ = 0 处理：Γ = 0，但 γn → παT，
    上下两个方向都保留 παT|S|² 的交换速率。
    """
    if M is None:
        M = thermal_level_count(eigs, bath.T)
    if not 1 <= M <= eigs.size:
        raise ValueError(f"M={M} 超出本征态数 {eigs.size}")
    if bath.T > 0:
        tail = float(np.exp(-(eigs.energies[M - 1] - eigs.energies[0]) / bath.T))
        if tail >= TRUNCATION_THRESHOLD:
            required = thermal_level_count(eigs, bath.T)
            raise TruncationError(
                f"M={M} 太小：最高保留能级布居因子 {tail:.3e} ≥ {TRUNCATION_THRESHOLD:g}，需要 M ≥ {required}",
                details={"M": M, "required_M": required, "T": bath.T},
            )

    energies = eigs.energies[:M]
    lower = np.tril(np.ones((M, M), dtype=bool), k=-1)
    raw = energies[:, None] - energies[None, :]
    split = lower & (raw >= DEGENERACY_TOL * eigs.scale)
    gaps = np.where(split, raw, 0.0)

    gamma = spectral_density(gaps, bath)
    up_factor = np.where(lower, _up_factor(gaps, bath), 0.0)
    occupations = np.where(split, thermal_occupation(gaps, bath.T), 0.0)

    coefficients, rates, rate_up, rate_down = {}, {}, {}, {}
    for channel in bath.channels:
        S = eigs.project(channel_operator(channel, eigs), M)
        weight = np.where(lower, np.abs(S) ** 2, 0.0)
        coefficients[channel] = S
        rates[channel] = gamma * weight
        rate_up[channel] = up_factor * weight
        rate_down[channel] = rates[channel] + rate_up[channel]

    logger.debug(f"跃迁表: M={M}, 通道={bath.channels}, T={bath.T}")
    return DressedTransitionTable(
        M=M, T=bath.T, energies=energies, channels=tuple(bath.channels),
        coefficients=coefficients, rates=rates, occupations=occupations,
        rate_up=rate_up, rate_down=rate_down,
    )


# ==================== Liouvillian ====================

class Liouvillian(BaseModel):
    """本征基中的缀饰主方程生成元（块形式）"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    M: int
    energies: np.ndarray
    transfer: np.ndarray  # transfer[a, b]：b → a 的总速率
    coherence: np.ndarray  # coherence[x, y]：ρ_xy 的对角元

    @property
    def population_block(self) -> np.ndarray:
        """布居的速率生成元（列和为零）"""
        return self.transfer + np.diag(np.diag(self.coherence).real)

    def to_dense(self) -> np.ndarray:
        """列优先向量化（vec 下标 x + y·M）的 M²×M² 矩阵"""
        M = self.M
        L = np.diag(self.coherence.ravel(order="F")).astype(complex)
        diagonal = np.arange(M) * (M + 1)
        L[np.ix_(diagonal, diagonal)] += self.transfer
        return L

    def eigenvalues(self) -> np.ndarray:
        """全部本征值：布居块的本征值 + 每个相干项的衰减率"""
        off = ~np.eye(self.M, dtype=bool)
        return np.concatenate([linalg.eigvals(self.population_block), self.coherence[off]])

    def singular_values(self) -> np.ndarray:
        """全部奇异值（降序）"""
        off = ~np.eye(self.M, dtype=bool)
        values = np.concatenate([linalg.svdvals(self.population_block), np.abs(self.coherence[off])])
        return np.sort(values)[::-1]


def build_liouvillian(table: DressedTransitionTable, eigs: Optional[EigenSystem] = None,
                      M: Optional[int] = None) -> Liouvillian:
    """
    L = −i[Ĥ,·] + Σ_u Σ_{k<j} {Γn D[|φ_j⟩⟨φ_k|] + Γ(1+n) D[|φ_k⟩⟨φ_j|]}

    D[|a⟩⟨b|] 把 ρ_bb 搬到 ρ_aa，并让带 b 下标的相干项以一半速率衰减。
    """
    M = table.M if M is None else M
    if M != table.M:
        raise ValueError(f"M={M} 与跃迁表的 M={table.M} 不一致")
    energies = table.energies if eigs is None else eigs.energies[:M]

    down = table.total_down()
    up = table.total_up()
    # transfer[a, b]: b → a
    transfer = down.T + up
    outflow = transfer.sum(axis=0)
    coherence = -1j * (energies[:, None] - energies[None, :]) - 0.5 * (outflow[:, None] + outflow[None, :])
    return Liouvillian(M=M, energies=energies, transfer=transfer, coherence=coherence)


def _require_unique_null_space(L: Liouvillian):
    values = L.singular_values()
    if len(values) > 1 and not (values[-2] > NULLSPACE_FLOOR * values[0]
                                and values[-2] > UNIQUENESS_RATIO * values[-1]):
        raise NonUniqueSteadyStateError(
            f"稳态不唯一: σ_min = {values[-1]:.3e}, σ_next = {values[-2]:.3e}",
            details={"sigma_min": float(values[-1]), "sigma_next": float(values[-2])},
        )


def steady_state(L: Liouvillian, method: str = "block") -> DensityMatrix:
    """
    L 的零空间向量，厄米化并归一；要求次小奇异值 > 1e3 × 最小奇异值，且不是数值零

    method="dense" 对完整 M²×M² 矩阵做 SVD，"block" 只对布居块做 SVD（结果相同）
    """
    _require_unique_null_space(L)

    if method == "dense":
        _, _, vh = linalg.svd(L.to_dense())
        rho = vh[-1].conj().reshape(L.M, L.M, order="F")
    elif method == "block":
        _, _, vh = linalg.svd(L.population_block)
        rho = np.diag(vh[-1].conj())
    else:
        raise ValueError(f"未知方法: {method}")

    rho = 0.5 * (rho + rho.conj().T)
    rho = rho / np.trace(rho)
    return DensityMatrix.from_matrix(rho, (L.M,), (EIGENBASIS,), herm_tol=1e-9, psd_tol=1e-9)


def to_full_space(rho: DensityMatrix, eigs: EigenSystem) -> DensityMatrix:
    """本征基（前 M 个本征态）中的态变换回复合空间：V_M ρ V_M†"""
    if rho.labels != (EIGENBASIS,) or rho.dim > eigs.size:
        raise BasisMismatchError(f"需要至多 {eigs.size} 维的本征基态，收到 {rho.labels}{rho.dims}")
    V = eigs.states[:, :rho.dim]
    return DensityMatrix.from_matrix(V @ rho.data @ V.conj().T, eigs.space.dims, eigs.space.labels, **rho.tolerances())


def liouvillian_gap(L: Liouvillian) -> float:
    """μ₁ = −max_{α≠0} Re μ_α；零本征值简并时没有定义，抛 NonUniqueSteadyStateError"""
    eigenvalues = L.eigenvalues()
    worst = float(np.max(eigenvalues.real))
    if worst > STABILITY_TOL:
        raise UnstableLiouvillianError(f"Liouvillian 有正实部本征值: {worst:.3e}")
    if len(eigenvalues) < 2:
        return 0.0
    _require_unique_null_space(L)
    order = np.argsort(eigenvalues.real)[::-1]
    return max(0.0, -float(eigenvalues.real[order[1]]))


class GapComparison(BaseModel):
    """同一截断下 μ₁(g) 与 μ₁(g=0)"""
    model_config = ConfigDict(frozen=True)

    mu1: float
    mu1_bare: float
    M: int
    n_fock: int
    converged: bool = True  # M 再加 GAP_LEVEL_STEP 时两个能隙的相对变化都小于 GAP_RTOL

    @property
    def ratio(self) -> float:
        if self.mu1_bare == 0:
            raise UnstableLiouvillianError("g=0 的 Liouvillian 能隙为零，比值无定义")
        return self.mu1 / self.mu1_bare


def _gap_at(eigs: EigenSystem, bath: BathParams, M: int) -> float:
    return liouvillian_gap(build_liouvillian(transition_table(eigs, bath, M), eigs, M))


def _settled(old: float, new: float) -> bool:
    return abs(new - old) <= GAP_RTOL * abs(new)


def compare_gaps(params: ModelParams, bath: BathParams, M: Optional[int] = None,
                 n_fock: Optional[int] = None, hard_max: int = 1024) -> GapComparison:
    """
    分别计算耦合与无耦合系统的 Liouvillian 能隙，热浴、n_fock 与 M 完全相同

    M 缺省时从热占据所需的能级数出发，每次加 GAP_LEVEL_STEP 个能级，
    直到 μ₁ 与 μ₁(0) 都不再变化（相对 GAP_RTOL）或用完全部本征态。
    """
    coupled = solve_thermal(params, bath.T, n_fock, hard_max)
    bare_params = params.decoupled()
    if bare_params == params:
        bare = coupled
    else:
        bare = solve_thermal(bare_params, bath.T, coupled.n_fock_used, hard_max)
        if bare.n_fock_used != coupled.n_fock_used:
            coupled = solve(params, bare.n_fock_used)
    n_fock = coupled.n_fock_used

    def gaps_at(levels: int) -> Tuple[float, float]:
        mu = _gap_at(coupled, bath, levels)
        return mu, (mu if bare is coupled else _gap_at(bare, bath, levels))

    if M is not None:
        mu, mu_bare = gaps_at(M)
        return GapComparison(mu1=mu, mu1_bare=mu_bare, M=M, n_fock=n_fock)

    M = max(thermal_level_count(coupled, bath.T), thermal_level_count(bare, bath.T))
    mu, mu_bare = gaps_at(M)
    converged = False
    while M < coupled.size:
        M_next = min(M + GAP_LEVEL_STEP, coupled.size)
        mu_next, mu_bare_next = gaps_at(M_next)
        converged = _settled(mu, mu_next) and _settled(mu_bare, mu_bare_next)
        M, mu, mu_bare = M_next, mu_next, mu_bare_next
        if converged:
            break
    if not converged:
        logger.warning(f"⚠ Liouvillian 能隙在 M={M} 时仍未收敛 (n_fock={n_fock})")
    logger.debug(f"能隙: μ₁={mu:.6e}, μ₁(0)={mu_bare:.6e}, M={M}")
    return GapComparison(mu1=mu, mu1_bare=mu_bare, M=M, n_fock=n_fock, converged=converged)


def gap_ratio(params: ModelParams, bath: BathParams, M: Optional[int] = None,
              n_fock: Optional[int] = None, hard_max: int = 1024) -> float:
    """μ₁(ω,Δ,g)/μ₁(ω,Δ,0)；g=0 时恰为 1"""
    gaps = compare_gaps(params, bath, M, n_fock, hard_max)
    ratio = gaps.ratio
    logger.info(f"Liouvillian 能隙比 = {ratio:.6g} (μ₁={gaps.mu1:.3e}, μ₁(0)={gaps.mu1_bare:.3e}, M={gaps.M})")
    return ratio
