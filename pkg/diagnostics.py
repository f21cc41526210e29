"""
自检脚本 - 检查各模块的基本不变量
"""
import math
from typing import Callable, List, Tuple

import numpy as np

from dissipator import spectral_density
from qops import (
    BOSON, QUBIT1, QUBIT2, DensityMatrix, HilbertSpace, annihilation, basis_ket,
    herm_sqrt, parity_operator, partial_trace, partial_transpose, pauli, von_neumann_entropy,
)
from quantifiers import concurrence, lqu, negativity, quantum_discord, squeezing
from rabi_model import build_hamiltonian, dark_singlet, diagonalize, dispersive_rwa, dsc_spectrum, solve
from schemas import BathParams, ModelParams, ThermalSpec
from thermal import populations
from service import thermalization_check

PAIR = (2, 2)
PAIR_LABELS = (QUBIT1, QUBIT2)


def _bell() -> DensityMatrix:
    ket = np.array([1.0, 0.0, 0.0, 1.0]) / math.sqrt(2.0)
    return DensityMatrix.from_ket(ket, PAIR, PAIR_LABELS)


# ==================== 检查项 ====================

def check_ladder() -> bool:
    a = annihilation(HilbertSpace(n_fock=4)).data
    boson_block = a[:4, :4]
    return abs(boson_block[2, 3] - math.sqrt(3)) < 1e-15


def check_pauli_convention() -> bool:
    space = HilbertSpace(n_fock=2)
    excited = basis_ket(space, "e", "g", 0)
    raised = pauli("plus", 2, space).data @ basis_ket(space, "g", "g", 0)
    return (np.allclose(pauli("z", 1, space).data @ excited, excited)
            and np.allclose(raised, basis_ket(space, "g", "e", 0)))


def check_parity() -> bool:
    space = HilbertSpace(n_fock=6)
    pi = parity_operator(space).data
    return (np.allclose(pi @ pi, np.eye(space.dim))
            and pi[0, 0] == 1
            and np.vdot(basis_ket(space, "e", "g", 0), pi @ basis_ket(space, "e", "g", 0)).real == -1)


def check_reductions() -> bool:
    bell = _bell()
    reduced = partial_trace(bell, QUBIT1).data
    transposed = partial_transpose(bell, QUBIT1).data
    return (np.allclose(reduced, np.eye(2) / 2)
            and abs(np.linalg.eigvalsh(transposed)[0] + 0.5) < 1e-12)


def check_matrix_functions() -> bool:
    rho = DensityMatrix.from_matrix(np.diag([0.64, 0.36]), (2,), (QUBIT1,))
    mixed = DensityMatrix.from_matrix(np.diag([0.5, 0.25, 0.25, 0.0]), PAIR, PAIR_LABELS)
    return (np.allclose(herm_sqrt(rho).data, np.diag([0.8, 0.6]))
            and abs(von_neumann_entropy(mixed) - 1.5) < 1e-12)


def check_decoupled_spectrum() -> bool:
    eigs = solve(ModelParams.symmetric(omega=1.0, delta=1.0, g=0.0), 8)
    return abs(eigs.energies[0] + 1.0) < 1e-12


def check_parity_symmetry() -> bool:
    space = HilbertSpace(n_fock=20)
    H = build_hamiltonian(ModelParams(omega=1.0, delta1=0.7, delta2=1.3, g1=0.4, g2=0.9), space).data
    pi = parity_operator(space).data
    return np.max(np.abs(H @ pi - pi @ H)) <= 1e-10 * np.max(np.abs(H))


def check_dark_singlet() -> bool:
    space = HilbertSpace(n_fock=20)
    H = build_hamiltonian(ModelParams.symmetric(omega=1.0, delta=1.0, g=0.8), space).data
    scale = np.max(np.abs(H))
    return all(
        np.linalg.norm(H @ dark_singlet(space, n) - n * dark_singlet(space, n)) <= 1e-10 * scale
        for n in range(space.n_fock - 1)
    )


def check_ground_population() -> bool:
    eigs = solve(ModelParams.symmetric(omega=1.0, delta=1.0, g=0.5), 16)
    return populations(eigs, ThermalSpec(T=0.0))[0] == 1.0


def check_analytic_limits() -> bool:
    params = ModelParams(omega=1.0, delta1=1.0, delta2=1.0, g1=2.0, g2=1.0)
    dispersive = dispersive_rwa(ModelParams.symmetric(omega=1.0, delta=2.0, g=0.1))
    return abs(dsc_spectrum(params, 4)[0] + 9.0) < 1e-12 and abs(dispersive.coupling - 0.02) < 1e-15


def check_spectral_density() -> bool:
    bath = BathParams.for_mode(omega=1.0, T=0.1)
    return spectral_density(0.0, bath) == 0.0 and abs(
        spectral_density(bath.omega_c, bath) - math.pi * bath.alpha * bath.omega_c * math.exp(-1)
    ) < 1e-15


def check_thermalization() -> bool:
    params = ModelParams.symmetric(omega=1.0, delta=1.0, g=0.5)
    return thermalization_check(params, BathParams.for_mode(omega=1.0, T=0.2), n_fock=24) < 1e-6


def check_bell_correlations() -> bool:
    bell = _bell()
    return (abs(concurrence(bell) - 1.0) < 1e-9
            and abs(negativity(bell, QUBIT1) - 0.5) < 1e-12
            and abs(quantum_discord(bell) - 1.0) < 1e-4
            and abs(lqu(bell) - 1.0) < 1e-9)


def check_vacuum_squeezing() -> bool:
    space = HilbertSpace(n_fock=4)
    vacuum = DensityMatrix.from_ket(basis_ket(space, "g", "g", 0), space.dims, space.labels)
    zeta2, n_photons = squeezing(vacuum)
    return abs(zeta2 - 1.0) < 1e-15 and n_photons == 0.0


CHECKS: List[Tuple[str, Callable[[], bool]]] = [
    ("玻色湮灭算符矩阵元", check_ladder),
    ("Pauli 算符约定", check_pauli_convention),
    ("宇称算符", check_parity),
    ("偏迹 / 偏转置", check_reductions),
    ("矩阵平方根 / 熵", check_matrix_functions),
    ("无耦合能谱", check_decoupled_spectrum),
    ("[Ĥ, π̂] = 0", check_parity_symmetry),
    ("暗单态", check_dark_singlet),
    ("零温基态布居", check_ground_population),
    ("解析极限", check_analytic_limits),
    ("Ohmic 谱密度", check_spectral_density),
    ("主方程稳态 = Gibbs 态", check_thermalization),
    ("Bell 态关联", check_bell_correlations),
    ("真空压缩参数", check_vacuum_squeezing),
]


def run_selftest() -> bool:
    """逐项运行并打印报告，全部通过返回 True"""

    print("=" * 70)
    print("🔬 自检报告")
    print("=" * 70)

    failed = []
    for i, (name, check) in enumerate(CHECKS, 1):
        try:
            ok = bool(check())
            detail = ""
        except Exception as e:
            ok = False
            detail = f" ({type(e).__name__}: {e})"
        print(f"{i:2d}. {'✓' if ok else '❌'} {name}{detail}")
        if not ok:
            failed.append(name)

    print("\n" + "=" * 70)
    print("📋 自检结论")
    print("=" * 70)
    if failed:
        print(f"❌ {len(failed)} 项未通过:")
        for name in failed:
            print(f"   - {name}")
    else:
        print(f"✅ 全部 {len(CHECKS)} 项通过")
    return not failed


if __name__ == "__main__":
    raise SystemExit(0 if run_selftest() else 1)
