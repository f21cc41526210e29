"""
dissipator 模块测试：谱密度、跃迁表、Liouvillian、稳态、能隙
"""
import math

import numpy as np
import pytest
from scipy import linalg

from dissipator import (
    DEGENERACY_TOL, GapComparison, Liouvillian, build_liouvillian, channel_operator, compare_gaps,
    liouvillian_gap, solve_thermal, spectral_density, steady_state, thermal_level_count,
    thermal_occupation, to_full_space, transition_table,
)
from errors import BasisMismatchError, NonUniqueSteadyStateError, TruncationError, UnstableLiouvillianError
from qops import number_operator, pauli, trace_distance
from rabi_model import choose_cutoff, solve
from schemas import BathParams, ModelParams, ThermalSpec
from service import thermalization_check
from thermal import gibbs_state, gibbs_state_eigenbasis

# 无耦合时能谱无简并：Δ₁、Δ₂ 与 ω 不可公度
DETUNED = dict(omega=1.0, delta1=1.3, delta2=0.55)


@pytest.fixture(scope="module")
def coupled():
    return solve(ModelParams.symmetric(omega=1.0, delta=1.0, g=0.5), 16)


@pytest.fixture(scope="module")
def deep_strong():
    # g = 2：基态附近的宇称双重态在 1e-9·scale 内简并
    return solve(ModelParams.symmetric(omega=1.0, delta=1.0, g=2.0), 64)


@pytest.fixture(scope="module")
def bath():
    return BathParams.for_mode(omega=1.0, T=0.1)


def brute_force_liouvillian(table) -> np.ndarray:
    """逐个跃迁算符用 Kronecker 积搭出列优先向量化的 Lindblad 生成元"""
    M = table.M
    H = np.diag(table.energies).astype(complex)
    I = np.eye(M)
    L = -1j * (np.kron(I, H) - np.kron(H.T, I))
    basis = np.eye(M)
    for channel in table.channels:
        for j in range(M):
            for k in range(j):
                jumps = (
                    (table.rate_up[channel][j, k], np.outer(basis[j], basis[k])),
                    (table.rate_down[channel][j, k], np.outer(basis[k], basis[j])),
                )
                for rate, c in jumps:
                    if rate == 0:
                        continue
                    cdc = c.conj().T @ c
                    L += rate * (np.kron(c.conj(), c) - 0.5 * np.kron(I, cdc) - 0.5 * np.kron(cdc.T, I))
    return L


class TestBathFunctions:

    def test_spectral_density(self, bath):
        assert spectral_density(0.0, bath) == 0.0
        expected = math.pi * bath.alpha * bath.omega_c * math.exp(-1.0)
        assert abs(spectral_density(bath.omega_c, bath) - expected) < 1e-15
        values = spectral_density(np.array([0.0, 1.0, 2.0]), bath)
        assert values.shape == (3,)
        assert np.all(np.diff(values) > 0)

    def test_spectral_density_default_bath(self):
        bath = BathParams.for_mode(omega=1.0, T=0.1)
        assert abs(spectral_density(1.0, bath) - 0.001 * math.pi * math.exp(-0.1)) < 1e-18

    def test_spectral_density_rejects_negative_gap(self, bath):
        with pytest.raises(ValueError):
            spectral_density(-0.5, bath)

    def test_thermal_occupation(self):
        assert abs(thermal_occupation(1.0, 0.5) - 1.0 / (math.exp(2.0) - 1.0)) < 1e-15
        np.testing.assert_array_equal(thermal_occupation(np.array([0.5, 1.0]), 0.0), [0.0, 0.0])

    def test_channel_operators(self, coupled):
        for channel in ("qubit1", "qubit2", "cavity"):
            op = channel_operator(channel, coupled)
            np.testing.assert_allclose(op, op.conj().T)
        with pytest.raises(ValueError):
            channel_operator("phonon", coupled)


class TestTransitionTable:

    def test_level_count(self, coupled):
        assert thermal_level_count(coupled, 0.0) == 2
        M = thermal_level_count(coupled, 0.1)
        shifted = coupled.energies - coupled.energies[0]
        assert math.exp(-shifted[M - 1] / 0.1) < 1e-12
        assert math.exp(-shifted[M - 2] / 0.1) >= 1e-12

    def test_level_count_exceeds_basis(self):
        eigs = solve(ModelParams.symmetric(omega=1.0, delta=1.0, g=0.2), 2)
        with pytest.raises(TruncationError):
            thermal_level_count(eigs, 5.0)

    def test_explicit_M_too_small(self, coupled):
        with pytest.raises(TruncationError) as excinfo:
            transition_table(coupled, BathParams.for_mode(omega=1.0, T=0.5), M=3)
        assert excinfo.value.details["required_M"] > 3

    def test_only_downward_pairs_populated(self, coupled, bath):
        table = transition_table(coupled, bath)
        upper = np.triu(np.ones((table.M, table.M), dtype=bool))
        for channel in table.channels:
            assert np.all(table.rates[channel][upper] == 0)
            assert np.all(table.rate_up[channel] >= 0)

    def test_detailed_balance(self, coupled, bath):
        table = transition_table(coupled, bath)
        gaps = table.gaps
        for channel in table.channels:
            active = table.rate_down[channel] > 0
            ratio = table.rate_up[channel][active] / table.rate_down[channel][active]
            np.testing.assert_allclose(ratio, np.exp(-gaps[active] / bath.T), rtol=1e-10)

    def test_parity_selection_rule(self, coupled, bath):
        table = transition_table(coupled, bath)
        parities = coupled.parities[:table.M]
        same = parities[:, None] == parities[None, :]
        for channel in table.channels:
            assert np.max(np.abs(table.coefficients[channel][same])) < 1e-10

    def test_decoupled_cavity_elements(self):
        eigs = solve(ModelParams(**DETUNED, g1=0.0, g2=0.0), 16)
        S = transition_table(eigs, BathParams.for_mode(omega=1.0, T=0.3, channels=("cavity",))).coefficients["cavity"]
        M = S.shape[0]
        photons = np.rint(np.diag(eigs.project(number_operator(eigs.space).data, M)).real)
        qubits = [np.rint(np.diag(eigs.project(pauli("z", i, eigs.space).data, M)).real) for i in (1, 2)]
        for j in range(M):
            for k in range(j):
                hop = abs(photons[j] - photons[k]) == 1 and all(z[j] == z[k] for z in qubits)
                expected = math.sqrt(max(photons[j], photons[k])) if hop else 0.0
                assert abs(abs(S[j, k]) - expected) < 1e-10

    def test_degenerate_pairs_exchange_at_thermal_rate(self, deep_strong):
        bath = BathParams.for_mode(omega=1.0, T=0.1)
        table = transition_table(deep_strong, bath)
        gaps = table.energies[:, None] - table.energies[None, :]
        degenerate = np.tril(gaps < DEGENERACY_TOL * deep_strong.scale, k=-1)
        assert degenerate.any()
        exchange = np.pi * bath.alpha * bath.T * np.abs(table.coefficients["cavity"]) ** 2
        assert np.max(exchange[degenerate]) > 0
        for channel in table.channels:
            S2 = np.abs(table.coefficients[channel][degenerate]) ** 2
            assert np.all(table.rates[channel][degenerate] == 0)
            np.testing.assert_allclose(table.rate_up[channel][degenerate], np.pi * bath.alpha * bath.T * S2, rtol=1e-12)
            np.testing.assert_allclose(table.rate_down[channel][degenerate], table.rate_up[channel][degenerate])

    def test_degenerate_pairs_frozen_at_zero_temperature(self, deep_strong):
        table = transition_table(deep_strong, BathParams.for_mode(omega=1.0, T=0.0))
        for channel in table.channels:
            assert np.all(table.rate_up[channel] == 0)


class TestLiouvillian:

    def test_matches_brute_force(self, coupled, bath):
        table = transition_table(coupled, bath)
        L = build_liouvillian(table, coupled)
        np.testing.assert_allclose(L.to_dense(), brute_force_liouvillian(table), atol=1e-14)

    def test_trace_preserving(self, coupled, bath):
        L = build_liouvillian(transition_table(coupled, bath)).to_dense()
        M = int(math.isqrt(L.shape[0]))
        diagonal = np.arange(M) * (M + 1)
        np.testing.assert_allclose(L[diagonal, :].sum(axis=0), 0.0, atol=1e-15)

    def test_block_eigenvalues_match_dense(self, coupled, bath):
        L = build_liouvillian(transition_table(coupled, bath))
        dense = linalg.eigvals(L.to_dense())
        block = L.eigenvalues()
        np.testing.assert_allclose(np.sort(block.real), np.sort(dense.real), atol=1e-9)
        np.testing.assert_allclose(np.sort(block.imag), np.sort(dense.imag), atol=1e-9)

    def test_zero_rates_leave_commutator(self, coupled, bath):
        table = transition_table(coupled, bath)
        silent = {u: np.zeros_like(table.rate_up[u]) for u in table.channels}
        L = build_liouvillian(table.model_copy(update={"rate_up": silent, "rate_down": silent}))
        E = table.energies
        expected = (-1j * (E[:, None] - E[None, :])).ravel()
        eigenvalues = L.eigenvalues()
        np.testing.assert_allclose(eigenvalues.real, 0.0, atol=1e-15)
        np.testing.assert_allclose(np.sort(eigenvalues.imag), np.sort(expected.imag), atol=1e-12)

    def test_mismatched_M(self, coupled, bath):
        table = transition_table(coupled, bath)
        with pytest.raises(ValueError):
            build_liouvillian(table, coupled, M=table.M + 1)


class TestSteadyState:

    def test_block_and_dense_agree(self, coupled, bath):
        L = build_liouvillian(transition_table(coupled, bath))
        block = steady_state(L, method="block")
        dense = steady_state(L, method="dense")
        np.testing.assert_allclose(block.data, dense.data, atol=1e-10)

    def test_thermalizes_to_gibbs(self, coupled, bath):
        table = transition_table(coupled, bath)
        rho_ss = steady_state(build_liouvillian(table, coupled))
        rho_gibbs = gibbs_state_eigenbasis(coupled, ThermalSpec(T=bath.T), table.M)
        assert trace_distance(rho_ss, rho_gibbs) < 1e-6

    def test_thermalization_check(self):
        params = ModelParams.symmetric(omega=1.0, delta=1.0, g=0.5)
        assert thermalization_check(params, BathParams.for_mode(omega=1.0, T=0.2), n_fock=24) < 1e-6

    def test_single_qubit_channel_thermalizes_when_coupled(self):
        params = ModelParams(**DETUNED, g1=0.3, g2=0.3)
        bath = BathParams.for_mode(omega=1.0, T=0.2, channels=("qubit1",))
        assert thermalization_check(params, bath, n_fock=20) < 1e-6

    def test_non_unique_without_coupling(self):
        params = ModelParams(**DETUNED, g1=0.0, g2=0.0)
        bath = BathParams.for_mode(omega=1.0, T=0.2, channels=("qubit1",))
        with pytest.raises(NonUniqueSteadyStateError):
            thermalization_check(params, bath, n_fock=16)

    def test_full_space_matches_gibbs(self):
        params = ModelParams.symmetric(omega=1.0, delta=1.0, g=0.75)
        bath = BathParams.for_mode(omega=1.0, T=0.2)
        eigs = solve(params, 32)
        rho_ss = steady_state(build_liouvillian(transition_table(eigs, bath), eigs))
        full = to_full_space(rho_ss, eigs)
        assert full.dims == (2, 2, 32)
        assert trace_distance(full, gibbs_state(eigs, ThermalSpec(T=0.2))) < 1e-6

    def test_zero_temperature_relaxes_to_ground(self):
        eigs = solve(ModelParams(**DETUNED, g1=0.3, g2=0.3), 16)
        table = transition_table(eigs, BathParams.for_mode(omega=1.0, T=0.0), M=8)
        rho = steady_state(build_liouvillian(table, eigs))
        expected = np.zeros((8, 8))
        expected[0, 0] = 1.0
        np.testing.assert_allclose(rho.data, expected, atol=1e-10)

    def test_full_space_rejects_composite_state(self, coupled):
        rho = gibbs_state(coupled, ThermalSpec(T=0.2))
        with pytest.raises(BasisMismatchError):
            to_full_space(rho, coupled)

    def test_deep_strong_doublet_thermalizes(self):
        params = ModelParams.symmetric(omega=1.0, delta=1.0, g=2.0)
        assert thermalization_check(params, BathParams.for_mode(omega=1.0, T=0.1)) < 1e-6

    def test_degenerate_doublet_not_unique_at_zero_temperature(self, deep_strong):
        table = transition_table(deep_strong, BathParams.for_mode(omega=1.0, T=0.0))
        with pytest.raises(NonUniqueSteadyStateError):
            steady_state(build_liouvillian(table, deep_strong))

    @pytest.mark.slow
    def test_random_points_thermalize(self, rng):
        # ω = 1，Δ ∈ [0.5, 2]，g ∈ [0, 1.5]，T ∈ [0.1, 1]
        for _ in range(20):
            delta, g, T = rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.5), rng.uniform(0.1, 1.0)
            params = ModelParams.symmetric(omega=1.0, delta=delta, g=g)
            distance = thermalization_check(params, BathParams.for_mode(omega=1.0, T=T))
            assert distance <= 1e-6, (delta, g, T)

    def test_unknown_method(self, coupled, bath):
        L = build_liouvillian(transition_table(coupled, bath))
        with pytest.raises(ValueError):
            steady_state(L, method="power")


class TestSolveThermal:

    # n_fock 由 ⟨a†a⟩ 收敛给出时，88 个本征态不够覆盖 T = 0.87 的热窗口
    PARAMS = ModelParams.symmetric(omega=1.0, delta=0.787, g=0.122)

    def test_grows_basis_to_cover_window(self):
        eigs = solve_thermal(self.PARAMS, 0.87, n_fock=16)
        assert eigs.n_fock_used > 16
        assert thermal_level_count(eigs, 0.87) <= eigs.size
        with pytest.raises(TruncationError):
            thermal_level_count(solve(self.PARAMS, 16), 0.87)

    def test_default_starts_from_cutoff(self):
        eigs = solve_thermal(self.PARAMS, 0.87)
        assert eigs.n_fock_used >= choose_cutoff(self.PARAMS, 0.87)
        thermal_level_count(eigs, 0.87)

    def test_hard_max(self):
        with pytest.raises(TruncationError):
            solve_thermal(self.PARAMS, 0.87, n_fock=16, hard_max=16)

    def test_thermalization_check_at_wide_window(self):
        assert thermalization_check(self.PARAMS, BathParams.for_mode(omega=1.0, T=0.87)) < 1e-6


class TestGap:

    def test_two_level_gap(self):
        up, down = 0.2, 1.0
        L = Liouvillian(
            M=2,
            energies=np.array([0.0, 1.0]),
            transfer=np.array([[0.0, down], [up, 0.0]]),
            coherence=np.array([[-up, 1j - 0.5 * (up + down)], [-1j - 0.5 * (up + down), -down]]),
        )
        assert abs(liouvillian_gap(L) - 0.5 * (up + down)) < 1e-14

    def test_unstable_generator(self):
        L = Liouvillian(
            M=2,
            energies=np.zeros(2),
            transfer=np.zeros((2, 2)),
            coherence=np.array([[0.5, -1.0], [-1.0, 0.5]], dtype=complex),
        )
        with pytest.raises(UnstableLiouvillianError):
            liouvillian_gap(L)

    def test_gap_positive(self, coupled, bath):
        assert liouvillian_gap(build_liouvillian(transition_table(coupled, bath))) > 0

    def test_ratio_is_one_without_coupling(self):
        params = ModelParams(**DETUNED, g1=0.0, g2=0.0)
        gaps = compare_gaps(params, BathParams.for_mode(omega=1.0, T=0.1), n_fock=16)
        assert gaps.ratio == 1.0

    def test_ratio_near_one_for_weak_coupling(self):
        params = ModelParams(**DETUNED, g1=0.01, g2=0.01)
        gaps = compare_gaps(params, BathParams.for_mode(omega=1.0, T=0.1), n_fock=16)
        assert gaps.n_fock == 16
        assert abs(gaps.ratio - 1.0) < 0.1

    def test_zero_bare_gap(self):
        with pytest.raises(UnstableLiouvillianError):
            GapComparison(mu1=0.1, mu1_bare=0.0, M=2, n_fock=16).ratio

    def test_gap_undefined_for_degenerate_null_space(self):
        # 两个互不连通的能级：零本征值二重简并
        L = Liouvillian(
            M=2,
            energies=np.array([0.0, 1.0]),
            transfer=np.zeros((2, 2)),
            coherence=np.array([[0.0, 1j], [-1j, 0.0]]),
        )
        with pytest.raises(NonUniqueSteadyStateError):
            liouvillian_gap(L)

    def test_gap_undefined_for_frozen_doublet(self, deep_strong):
        table = transition_table(deep_strong, BathParams.for_mode(omega=1.0, T=0.0))
        with pytest.raises(NonUniqueSteadyStateError):
            liouvillian_gap(build_liouvillian(table, deep_strong))

    def test_level_count_converges(self):
        params = ModelParams.symmetric(omega=1.0, delta=1.0, g=1.0)
        bath = BathParams.for_mode(omega=1.0, T=0.1)
        gaps = compare_gaps(params, bath)
        assert gaps.converged
        coupled = solve(params, gaps.n_fock)
        assert gaps.M > thermal_level_count(coupled, bath.T)
        wider = compare_gaps(params, bath, M=gaps.M + 8, n_fock=gaps.n_fock)
        assert abs(wider.ratio - gaps.ratio) < 5e-3 * gaps.ratio

    @pytest.mark.parametrize("g", [0.5, 1.0, 2.0])
    def test_ratio_near_resonance(self, g):
        ratio = compare_gaps(ModelParams.symmetric(omega=1.0, delta=1.0, g=g),
                             BathParams.for_mode(omega=1.0, T=0.1)).ratio
        assert 0.5 < ratio < 2.0

    def test_ratio_fast_oscillator(self):
        ratio = compare_gaps(ModelParams.symmetric(omega=100.0, delta=1.0, g=1.0),
                             BathParams.for_mode(omega=100.0, T=0.1)).ratio
        assert abs(ratio - 1.0) < 0.2

    @pytest.mark.slow
    def test_ratio_fast_qubits(self):
        ratio = compare_gaps(ModelParams.symmetric(omega=1.0, delta=100.0, g=4.5),
                             BathParams.for_mode(omega=1.0, T=0.1)).ratio
        assert ratio > 1.0
