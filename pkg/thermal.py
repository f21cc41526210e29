"""
正则系综

ρ̂ = Σ_k e^{−E_k/T}/Z |φ_k⟩⟨φ_k|，能量先减去 E₀ 再取指数。
"""
from __future__ import annotations

import logging
from typing import TYPE_CHECKING, Optional

import numpy as np

from qops import EIGENBASIS, DensityMatrix
from schemas import ThermalSpec

if TYPE_CHECKING:
    from rabi_model import EigenSystem

logger = logging.getLogger(__name__)

DEGENERACY_TOL = 1e-9


def ground_cluster_size(eigs: EigenSystem) -> int:
    """与基态能量差小于 1e-9·scale 的能级数"""
    shifted = eigs.energies - eigs.energies[0]
    return int(np.count_nonzero(shifted < DEGENERACY_TOL * eigs.scale))


def populations(eigs: EigenSystem, spec: ThermalSpec) -> np.ndarray:
    """P_k = e^{−(E_k−E₀)/T}/Z；T=0 时在简并基态簇上均分"""
    if spec.T < 0:
        raise ValueError(f"温度不能为负: T = {spec.T}")
    if spec.T == 0:
        weights = np.zeros(eigs.size)
        weights[:ground_cluster_size(eigs)] = 1.0
    else:
        weights = np.exp(-(eigs.energies - eigs.energies[0]) / spec.T)
    return weights / weights.sum()


def _pruned(eigs: EigenSystem, spec: ThermalSpec):
    weights = populations(eigs, spec)
    kept = np.nonzero(weights >= spec.prune_tol)[0]
    return kept, weights[kept] / weights[kept].sum()


def retained_levels(eigs: EigenSystem, spec: ThermalSpec) -> int:
    """布居不低于 prune_tol 的能级数（能量升序，所以是前缀）"""
    kept, _ = _pruned(eigs, spec)
    return int(kept[-1]) + 1


def gibbs_state(eigs: EigenSystem, spec: ThermalSpec) -> DensityMatrix:
    """复合空间上的 Gibbs 态（裁剪小布居后重新归一）"""
    kept, weights = _pruned(eigs, spec)
    V = eigs.states[:, kept]
    rho = (V * weights) @ V.conj().T
    logger.debug(f"Gibbs 态: T={spec.T}, 保留 {len(kept)}/{eigs.size} 个本征态")
    return DensityMatrix.from_matrix(rho, eigs.space.dims, eigs.space.labels)


def gibbs_state_eigenbasis(eigs: EigenSystem, spec: ThermalSpec, M: Optional[int] = None) -> DensityMatrix:
    """前 M 个本征态构成的基下的 Gibbs 态（对角）"""
    M = eigs.size if M is None else M
    weights = populations(eigs, spec)[:M].copy()
    weights[weights < spec.prune_tol] = 0.0
    return DensityMatrix.from_matrix(np.diag(weights / weights.sum()), (M,), (EIGENBASIS,))
