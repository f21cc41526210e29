"""
两比特量子 Rabi 模型

Ĥ = ωâ†â + Σᵢ (Δᵢ/2)σ̂ᶻ⁽ⁱ⁾ + Σᵢ gᵢ(â+â†)σ̂ₓ⁽ⁱ⁾

包括：哈密顿量构造、带宇称标签的对角化、自适应 Fock 截断，
以及三个解析极限（色散 RWA / 非 RWA、DSC 位移振子、绝热集体自旋）。
"""
import logging
import math
from typing import Callable, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict
from scipy import linalg

from errors import CutoffError, DispersiveLimitError
from qops import (
    HilbertSpace, Operator, annihilation, basis_ket, displacement_operator,
    number_operator, parity_operator, pauli, tensor,
)
from schemas import ModelParams, ThermalSpec
from thermal import populations

logger = logging.getLogger(__name__)

HERMITICITY_TOL = 1e-12
DEGENERACY_TOL = 1e-9
CUTOFF_FLOOR = 16
DEFAULT_HARD_MAX = 1024
CONVERGENCE_RTOL = 1e-6
CONVERGENCE_ATOL = 1e-9
SPECTRUM_LEVELS = 10


# ==================== 本征系统 ====================

class EigenSystem(BaseModel):
    """升序本征值、正交本征矢（列）、每个本征态的宇称 ±1"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    energies: np.ndarray
    states: np.ndarray
    parities: np.ndarray
    n_fock_used: int
    space: HilbertSpace

    @property
    def size(self) -> int:
        return len(self.energies)

    @property
    def scale(self) -> float:
        """能谱跨度，用作简并判据的尺度"""
        span = float(self.energies[-1] - self.energies[0]) if self.size > 1 else 0.0
        return span if span > 0 else 1.0

    def project(self, op: np.ndarray, M: Optional[int] = None) -> np.ndarray:
        """把复合空间算符变换到前 M 个本征态张成的子空间：V_M† O V_M"""
        V = self.states if M is None else self.states[:, :M]
        return V.conj().T @ op @ V


def build_hamiltonian(params: ModelParams, space: HilbertSpace) -> Operator:
    """按 qubit1 ⊗ qubit2 ⊗ boson 顺序构造 Ĥ"""
    a = annihilation(space).data
    quadrature = a + a.conj().T
    H = params.omega * number_operator(space).data
    for index, (delta, g) in enumerate(((params.delta1, params.g1), (params.delta2, params.g2)), start=1):
        H = H + 0.5 * delta * pauli("z", index, space).data
        H = H + g * quadrature @ pauli("x", index, space).data
    return Operator.on(space, H)


def diagonalize(H: Operator, n_fock_used: Optional[int] = None) -> EigenSystem:
    """
    完整本征分解

    简并簇（|E_j − E_k| < 1e-9·(E_max − E_min)）内部再对角化 π̂，
    使每个本征态都有确定宇称。
    """
    data = H.data
    norm = float(np.max(np.abs(data))) if data.size else 0.0
    herm_err = float(np.max(np.abs(data - data.conj().T))) if data.size else 0.0
    if herm_err > HERMITICITY_TOL * max(norm, 1.0):
        raise ValueError(f"哈密顿量非厄米: ‖H−H†‖_max = {herm_err:.3e}")

    matrix = 0.5 * (data + data.conj().T)
    if not np.any(matrix.imag):
        matrix = matrix.real
    energies, states = linalg.eigh(matrix)
    states = states.astype(complex)

    space = HilbertSpace(n_fock=H.dims[-1])
    parity_diag = np.diag(parity_operator(space).data).real

    span = float(energies[-1] - energies[0]) if len(energies) > 1 else 0.0
    tol = DEGENERACY_TOL * (span if span > 0 else 1.0)
    start = 0
    while start < len(energies):
        stop = start + 1
        while stop < len(energies) and energies[stop] - energies[stop - 1] < tol:
            stop += 1
        if stop - start > 1:
            block = states[:, start:stop]
            restricted = block.conj().T @ (parity_diag[:, None] * block)
            _, rotation = linalg.eigh(0.5 * (restricted + restricted.conj().T))
            states[:, start:stop] = block @ rotation
        start = stop

    expectation = np.einsum("ik,i,ik->k", states.conj(), parity_diag, states).real
    parities = np.where(expectation >= 0, 1, -1)

    return EigenSystem(
        energies=energies,
        states=states,
        parities=parities,
        n_fock_used=n_fock_used if n_fock_used is not None else space.n_fock,
        space=space,
    )


def solve(params: ModelParams, n_fock: int) -> EigenSystem:
    """build_hamiltonian + diagonalize"""
    space = HilbertSpace(n_fock=n_fock)
    return diagonalize(build_hamiltonian(params, space), n_fock_used=n_fock)


# ==================== 自适应截断 ====================

def initial_cutoff(params: ModelParams) -> int:
    """n₀ = max(16, ⌈d² + 6d + 20⌉)，d = (g₁+g₂)/ω"""
    d = params.displacement_scale
    return max(CUTOFF_FLOOR, math.ceil(d * d + 6 * d + 20))


def _gibbs_diagonal(eigs: EigenSystem, T: float, op: np.ndarray) -> complex:
    spec = ThermalSpec(T=T)
    weights = populations(eigs, spec)
    kept = np.nonzero(weights >= spec.prune_tol)[0]
    weights = weights[kept] / weights[kept].sum()
    V = eigs.states[:, kept]
    return complex(np.sum(weights * np.sum(V.conj() * (op @ V), axis=0)))


def _target_n_photons(eigs: EigenSystem, T: float):
    return _gibbs_diagonal(eigs, T, number_operator(eigs.space).data).real


def _target_zeta2(eigs: EigenSystem, T: float):
    a = annihilation(eigs.space).data
    n_mean = _gibbs_diagonal(eigs, T, a.conj().T @ a).real
    a2 = _gibbs_diagonal(eigs, T, a @ a)
    return 1.0 + 2.0 * n_mean - 2.0 * abs(a2)


def _target_p0(eigs: EigenSystem, T: float):
    return float(populations(eigs, ThermalSpec(T=T))[0])


def _target_spectrum(eigs: EigenSystem, T: float):
    levels = min(SPECTRUM_LEVELS, eigs.size)
    return eigs.energies[:levels] - eigs.energies[0]


# 可用于判断截断收敛的标量（或向量）
CUTOFF_TARGETS: Dict[str, Callable[[EigenSystem, float], object]] = {
    "n_photons": _target_n_photons,
    "zeta2": _target_zeta2,
    "p0": _target_p0,
    "spectrum": _target_spectrum,
}


def _converged(previous, current) -> bool:
    previous = np.atleast_1d(np.asarray(previous, dtype=float))
    current = np.atleast_1d(np.asarray(current, dtype=float))
    change = np.abs(current - previous)
    near_zero = np.maximum(np.abs(previous), np.abs(current)) < CONVERGENCE_ATOL / CONVERGENCE_RTOL
    ok = np.where(near_zero, change < CONVERGENCE_ATOL, change < CONVERGENCE_RTOL * np.abs(previous))
    return bool(np.all(ok))


def choose_cutoff(params: ModelParams, T: float, target: str = "n_photons",
                  hard_max: int = DEFAULT_HARD_MAX) -> int:
    """
    自适应 Fock 截断

    从 n₀ 开始，把 N 与 min(2N, hard_max) 上的目标量比较，
    变化小于 1e-6（相对）或 1e-9（接近零时的绝对值）即返回 N。
    """
    if T < 0:
        raise ValueError(f"温度不能为负: T = {T}")
    if target not in CUTOFF_TARGETS:
        raise ValueError(f"未知的收敛目标: {target}，可选 {sorted(CUTOFF_TARGETS)}")
    evaluate = CUTOFF_TARGETS[target]

    n = initial_cutoff(params)
    if n > hard_max:
        raise CutoffError(
            f"初始截断 {n} 已超过上限 {hard_max}",
            details={"n0": n, "hard_max": hard_max, "params": params.model_dump()},
        )

    previous = evaluate(solve(params, n), T)
    while True:
        if n >= hard_max:
            raise CutoffError(
                f"截断达到上限 {hard_max} 仍未收敛 (target={target})",
                details={"hard_max": hard_max, "target": target, "last_value": np.asarray(previous).tolist()},
            )
        n_next = min(2 * n, hard_max)
        current = evaluate(solve(params, n_next), T)
        if _converged(previous, current):
            logger.info(f"✓ 截断收敛: n_fock={n} (target={target}, 对照 {n_next})")
            return n
        logger.debug(f"截断 {n} → {n_next} 未收敛 (target={target})")
        n, previous = n_next, current


# ==================== 色散极限 ====================

class EffectiveHamiltonian(BaseModel):
    """有效哈密顿量 + 比特间有效耦合"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    hamiltonian: Operator
    coupling: float
    valid: bool  # gᵢ ≪ |δᵢ| 是否成立（只报告，不强制）


def detunings(params: ModelParams) -> Tuple[float, float]:
    """δᵢ = Δᵢ − ω"""
    return params.delta1 - params.omega, params.delta2 - params.omega


def _dispersive_valid(params: ModelParams) -> bool:
    return all(g < 0.1 * abs(delta) for g, delta in zip((params.g1, params.g2), detunings(params)))


def dispersive_rwa(params: ModelParams, space: Optional[HilbertSpace] = None) -> EffectiveHamiltonian:
    """
    RWA 色散哈密顿量

    Ĥ = ωâ†â + ½Σ(Δⱼ + gⱼ²/δⱼ)σ̂ᶻ⁽ʲ⁾ + Σ(gⱼ²/δⱼ)â†âσ̂ᶻ⁽ʲ⁾ + J₁₂(σ̂⁺⁽¹⁾σ̂⁻⁽²⁾ + h.c.)
    J₁₂ = g₁g₂(1/δ₁ + 1/δ₂)
    """
    space = space or HilbertSpace(n_fock=CUTOFF_FLOOR)
    delta = detunings(params)
    if any(d == 0 for d in delta):
        raise DispersiveLimitError(f"共振时色散近似无定义: δ = {delta}")

    couplings = (params.g1, params.g2)
    n_hat = number_operator(space).data
    H = params.omega * n_hat
    for index, (bare, g, d) in enumerate(zip((params.delta1, params.delta2), couplings, delta), start=1):
        sz = pauli("z", index, space).data
        chi = g * g / d
        H = H + 0.5 * (bare + chi) * sz + chi * n_hat @ sz

    J12 = params.g1 * params.g2 * (1.0 / delta[0] + 1.0 / delta[1])
    flip_flop = pauli("plus", 1, space).data @ pauli("minus", 2, space).data
    H = H + J12 * (flip_flop + flip_flop.conj().T)
    return EffectiveHamiltonian(hamiltonian=Operator.on(space, H), coupling=J12, valid=_dispersive_valid(params))


def dispersive_nonrwa(params: ModelParams, space: Optional[HilbertSpace] = None) -> EffectiveHamiltonian:
    """
    超越 RWA 的色散哈密顿量

    Ĥ = ωâ†â + ½ΣΔⱼσ̂ᶻ⁽ʲ⁾ + J̄₁₂σ̂ₓ⁽¹⁾σ̂ₓ⁽²⁾ + Σgⱼ²(1/δⱼ − 1/(Δⱼ−δⱼ))(â†+â)²σ̂ᶻ⁽ʲ⁾
    J̄₁₂ = g₁g₂(1/δ₁ + 1/δ₂ − 1/(2Δ₁−δ₁) − 1/(2Δ₂−δ₂))
    """
    space = space or HilbertSpace(n_fock=CUTOFF_FLOOR)
    delta = detunings(params)
    bare = (params.delta1, params.delta2)
    denominators = list(delta) + [2 * b - d for b, d in zip(bare, delta)] + [b - d for b, d in zip(bare, delta)]
    if any(d == 0 for d in denominators):
        raise DispersiveLimitError(f"非 RWA 色散近似分母为零: {denominators}")

    a = annihilation(space).data
    quadrature = a + a.conj().T
    H = params.omega * number_operator(space).data
    for index, (b, g, d) in enumerate(zip(bare, (params.g1, params.g2), delta), start=1):
        sz = pauli("z", index, space).data
        H = H + 0.5 * b * sz
        H = H + g * g * (1.0 / d - 1.0 / (b - d)) * quadrature @ quadrature @ sz

    J_bar = params.g1 * params.g2 * (
        1.0 / delta[0] + 1.0 / delta[1] - 1.0 / (2 * bare[0] - delta[0]) - 1.0 / (2 * bare[1] - delta[1])
    )
    H = H + J_bar * pauli("x", 1, space).data @ pauli("x", 2, space).data
    return EffectiveHamiltonian(hamiltonian=Operator.on(space, H), coupling=J_bar, valid=_dispersive_valid(params))


# ==================== 深强耦合 / 绝热极限 ====================

def dsc_spectrum(params: ModelParams, n_levels: int) -> np.ndarray:
    """DSC 主导阶：ωn − g₊²/ω 与 ωn − g₋²/ω，各二重简并"""
    if n_levels <= 0:
        return np.zeros(0)
    n = np.arange(n_levels)
    shifts = (params.g_plus ** 2 / params.omega, params.g_minus ** 2 / params.omega)
    ladder = np.concatenate([params.omega * n - shift for shift in shifts for _ in range(2)])
    return np.sort(ladder)[:n_levels]


def critical_coupling(omega: float, delta: float) -> float:
    """高频比特极限下的临界耦合 g_c = √(ωΔ)/2"""
    return math.sqrt(omega * delta) / 2.0


class AdiabaticState(NamedTuple):
    label: Tuple[int, int]  # 集体自旋 (j, m)
    fock_index: int
    vector: np.ndarray
    energy: float  # nω − (2mg)²/ω


_PLUS = np.array([1.0, 1.0], dtype=complex) / math.sqrt(2.0)
_MINUS = np.array([1.0, -1.0], dtype=complex) / math.sqrt(2.0)

# σ̂ₓ 本征基下的集体自旋态 |j, m⟩
COLLECTIVE_SPIN_STATES: Dict[Tuple[int, int], np.ndarray] = {
    (1, 1): tensor(_PLUS, _PLUS),
    (1, 0): (tensor(_PLUS, _MINUS) + tensor(_MINUS, _PLUS)) / math.sqrt(2.0),
    (0, 0): (tensor(_PLUS, _MINUS) - tensor(_MINUS, _PLUS)) / math.sqrt(2.0),
    (1, -1): tensor(_MINUS, _MINUS),
}


def adiabatic_eigenstates(params: ModelParams, n_max: int,
                          space: Optional[HilbertSpace] = None) -> List[AdiabaticState]:
    """
    绝热近似下的乘积态 |j,m⟩ ⊗ D̂(α_m)|n⟩，n = 0…n_max

    只在 g₁ = g₂ 时成立。对 Ĥ_ad = ωâ†â + 2mg(â+â†) 配方得 α_m = −2mg/ω。
    """
    if params.g1 != params.g2:
        raise ValueError(f"集体自旋构造要求 g₁ = g₂，收到 g₁={params.g1}, g₂={params.g2}")
    space = space or HilbertSpace(n_fock=max(CUTOFF_FLOOR, n_max + 1))
    if n_max >= space.n_fock:
        raise ValueError(f"n_max={n_max} 超出截断 n_fock={space.n_fock}")

    g, omega = params.g1, params.omega
    states: List[AdiabaticState] = []
    for n in range(n_max + 1):
        fock = np.zeros(space.n_fock, dtype=complex)
        fock[n] = 1.0
        for label, spin in COLLECTIVE_SPIN_STATES.items():
            m = label[1]
            alpha = -2.0 * m * g / omega
            boson = displacement_operator(alpha, space.n_fock) @ fock if m else fock
            states.append(AdiabaticState(
                label=label,
                fock_index=n,
                vector=tensor(spin, boson),
                energy=omega * n - (2.0 * m * g) ** 2 / omega,
            ))
    return states


def dark_singlet(space: HilbertSpace, n: int) -> np.ndarray:
    """|Ψ₋⟩⊗|n⟩，Ψ₋ = (|eg⟩ − |ge⟩)/√2；对称参数下是能量 nω 的精确本征态"""
    return (basis_ket(space, "e", "g", n) - basis_ket(space, "g", "e", n)) / math.sqrt(2.0)
