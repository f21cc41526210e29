"""
核心计算流程

单点：截断 → 对角化 → Gibbs 态 → 各物理量
扫描：网格展开 → joblib 并行 → 按下标排序汇总，单点失败只记录不中断
"""
import itertools
import logging
import time
from typing import Any, Dict, List, Optional, Tuple, Union

from joblib import Parallel, delayed
from scipy import linalg
from threadpoolctl import threadpool_limits

from dissipator import build_liouvillian, gap_ratio, solve_thermal, steady_state, thermal_level_count, transition_table
from errors import PointEvaluationError, RabiError
from qops import BOSON, QUBIT1, trace_distance
from quantifiers import (
    DressedJumpOperator, QUBIT_PAIR, concurrence, coherence_re, dressed_g2, jump_levels,
    lqu, mutual_information, negativity, quantum_discord, qubit_pair, squeezing,
)
from rabi_model import choose_cutoff, critical_coupling, solve
from schemas import (
    BathParams, EvaluationOptions, FailureRecord, ModelParams, QuantifierReport,
    SweepConfig, SweepResult, SweepRow, ThermalSpec,
)
from thermal import gibbs_state, gibbs_state_eigenbasis, populations, retained_levels

logger = logging.getLogger(__name__)


# ==================== 单点计算 ====================

def evaluate_all(params: ModelParams, bath: BathParams, T: float,
                 options: Optional[EvaluationOptions] = None) -> QuantifierReport:
    """
    一个参数点的完整计算

    流程：
    1. 自适应截断（或使用 options.n_fock）
    2. 构造并对角化 Ĥ
    3. Gibbs 态，约化到比特对
    4. 按需计算各物理量；include_gap 时附加 Liouvillian 能隙比
    """
    options = options or EvaluationOptions()
    context = {"params": params.model_dump(), "T": T}
    try:
        n_fock = options.n_fock or choose_cutoff(
            params, T, target=options.convergence_target, hard_max=options.max_fock
        )
        eigs = solve(params, n_fock)
        spec = ThermalSpec(T=T, prune_tol=options.prune_tol)
        rho = gibbs_state(eigs, spec)
        rho_qq = qubit_pair(rho)
        M = jump_levels(retained_levels(eigs, spec), eigs.size, options.guard_band)

        fields: Dict[str, Any] = {"n_fock_used": n_fock, "M_used": M}

        if options.wants("g2") or options.wants("x_excitations"):
            X = DressedJumpOperator.build(eigs, M)
            g2, x_num = dressed_g2(gibbs_state_eigenbasis(eigs, spec, M), X)
            fields.update(g2=g2, x_excitations=x_num)
        if options.wants("zeta2") or options.wants("n_photons"):
            zeta2, n_photons = squeezing(rho)
            fields.update(zeta2=zeta2, n_photons=n_photons)
        if options.wants("negativity_qq"):
            fields["negativity_qq"] = negativity(rho_qq, QUBIT1)
        if options.wants("negativity_q_f"):
            fields["negativity_q_f"] = negativity(rho, BOSON)
        if options.wants("concurrence"):
            fields["concurrence"] = concurrence(rho_qq)
        if options.wants("mutual_info"):
            fields["mutual_info"] = mutual_information(rho_qq, QUBIT1)
        if options.wants("discord"):
            fields["discord"] = quantum_discord(rho_qq, options.discord_side)
        if options.wants("coherence_re"):
            fields["coherence_re"] = coherence_re(rho_qq)
        if options.wants("lqu"):
            fields["lqu"] = lqu(rho_qq)
        if options.wants("P0"):
            fields["P0"] = float(populations(eigs, spec)[0])
        if options.include_gap:
            fields["gap_ratio"] = gap_ratio(params, bath.model_copy(update={"T": T}), n_fock=n_fock,
                                           hard_max=options.max_fock)

        # 只保留请求的字段
        if options.quantifiers is not None:
            requested = set(options.quantifiers) | {"n_fock_used", "M_used", "gap_ratio"}
            fields = {key: value for key, value in fields.items() if key in requested}
        return QuantifierReport(**fields)

    except RabiError as e:
        e.details.update(context)
        raise
    except (ValueError, ArithmeticError, linalg.LinAlgError) as e:
        raise PointEvaluationError(f"{type(e).__name__}: {e}", details=context) from e


def thermalization_check(params: ModelParams, bath: BathParams, n_fock: Optional[int] = None,
                         M: Optional[int] = None) -> float:
    """缀饰主方程稳态与 Gibbs 态（同一截断本征基）之间的迹距离"""
    eigs = solve_thermal(params, bath.T, n_fock)
    n_fock = eigs.n_fock_used
    M = M or thermal_level_count(eigs, bath.T)
    table = transition_table(eigs, bath, M)
    rho_ss = steady_state(build_liouvillian(table, eigs, M))
    rho_gibbs = gibbs_state_eigenbasis(eigs, ThermalSpec(T=bath.T), M)
    distance = trace_distance(rho_ss, rho_gibbs)
    logger.info(f"热化检查: ½‖ρ_ss − ρ_Gibbs‖₁ = {distance:.3e} (n_fock={n_fock}, M={M})")
    return distance


# ==================== 参数扫描 ====================

GridTask = Tuple[Tuple[int, ...], Optional[str], Dict[str, float]]
FREQUENCY_AXES = {"omega", "delta", "delta1", "delta2"}


def _evaluate_point(task: GridTask, config: SweepConfig, options: EvaluationOptions,
                    record_timing: bool) -> Union[SweepRow, FailureRecord]:
    """单个网格点；BLAS 固定单线程，保证结果与 worker 数无关"""
    indices, series, values = task
    start = time.perf_counter()
    try:
        params, bath = config.resolve_point(values)
        with threadpool_limits(limits=1):
            report = evaluate_all(params, bath, bath.T, options)
    except Exception as e:
        code = getattr(e, "code", PointEvaluationError.code)
        message = e.message if isinstance(e, RabiError) else f"{type(e).__name__}: {e}"
        logger.error(f"✗ 网格点 {indices} {values} 失败: [{code}] {message}")
        return FailureRecord(indices=indices, series=series, axis_values=values, code=code, message=message)

    wall_ms = (time.perf_counter() - start) * 1000.0 if record_timing else None
    return SweepRow(indices=indices, series=series, axis_values=values, report=report, wall_ms=wall_ms)


class SweepService:
    """参数扫描服务"""

    def __init__(self, config: SweepConfig, workers: Optional[int] = None):
        self.config = config
        self.workers = workers or config.workers
        self.options = EvaluationOptions(
            quantifiers=tuple(config.quantifiers),
            include_gap=config.include_gap,
            convergence_target=config.sweep.convergence_target,
            max_fock=config.sweep.max_fock,
        )

    def tasks(self) -> List[GridTask]:
        """按 (series, 轴1, 轴2) 下标字典序展开网格"""
        axes = self.config.axes
        grids = [axis.values() for axis in axes]
        series = self.config.sweep.series or [None]
        tasks: List[GridTask] = []
        for s_index, entry in enumerate(series):
            for combo in itertools.product(*(range(axis.points) for axis in axes)):
                values: Dict[str, float] = dict(entry.overrides) if entry else {}
                values.update({axis.name: float(grid[i]) for axis, grid, i in zip(axes, grids, combo)})
                indices = ((s_index,) if entry else ()) + tuple(combo)
                tasks.append((indices, entry.name if entry else None, values))
        return tasks

    def echo(self) -> Dict[str, Any]:
        """配置回显，附带临界耦合 g_c = √(ωΔ)/2（ω、Δ 固定且两比特简并时给出数值）"""
        data = self.config.echo()
        model = self.config.model
        swept = {axis.name for axis in self.config.axes}
        swept.update(name for entry in self.config.sweep.series for name in entry.overrides)
        if swept & FREQUENCY_AXES or model.delta1 != model.delta2:
            data["critical_coupling"] = "sqrt(omega*delta)/2"
        else:
            data["critical_coupling"] = critical_coupling(model.omega, model.delta1)
        return data

    def run(self) -> SweepResult:
        tasks = self.tasks()
        record_timing = self.config.output.record_timing
        logger.info(f"开始扫描: {len(tasks)} 个网格点, workers={self.workers}")

        if self.workers > 1:
            outcomes = Parallel(n_jobs=self.workers, backend="loky")(
                delayed(_evaluate_point)(task, self.config, self.options, record_timing) for task in tasks
            )
        else:
            outcomes = [_evaluate_point(task, self.config, self.options, record_timing) for task in tasks]

        rows = sorted((o for o in outcomes if isinstance(o, SweepRow)), key=lambda row: row.indices)
        failures = sorted((o for o in outcomes if isinstance(o, FailureRecord)), key=lambda f: f.indices)

        if failures:
            logger.warning(f"⚠ 扫描完成: {len(rows)} 个成功, {len(failures)} 个失败")
        else:
            logger.info(f"✓ 扫描完成: {len(rows)} 个网格点")

        return SweepResult(
            rows=rows,
            config_echo=self.echo(),
            failures=failures,
            axis_names=[axis.name for axis in self.config.axes],
            quantifiers=list(self.config.quantifiers),
            include_gap=self.config.include_gap,
            series_names=[entry.name for entry in self.config.sweep.series],
            axis_points=[axis.points for axis in self.config.axes],
        )


def run_sweep(config: SweepConfig, workers: Optional[int] = None) -> SweepResult:
    """便捷函数"""
    return SweepService(config, workers).run()
