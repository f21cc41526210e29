"""
命令行入口

子命令：sweep / point / spectrum / gap / selftest
退出码：0 成功，1 配置或用法错误，2 计算失败（扫描中有失败点）
"""
import os
import sys
import logging
from typing import List, Optional

import click
import typer
from dotenv import load_dotenv

# ==================== 加载环境变量 ====================
load_dotenv()

# ==================== 路径配置 ====================
sys.path.insert(0, os.path.dirname(os.path.abspath(__file__)))

# 配置
MAX_FOCK = int(os.getenv("RABI_MAX_FOCK", "1024"))
WORKERS = int(os.getenv("RABI_WORKERS", "1"))
CONVERGENCE_TARGET = os.getenv("RABI_CONVERGENCE_TARGET", "n_photons")
LOG_LEVEL = os.getenv("LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"

from dissipator import compare_gaps
from diagnostics import run_selftest
from errors import ConfigError, RabiError
from exporters import emit_config_echo, emit_csv, emit_heatmap
from rabi_model import choose_cutoff, critical_coupling, solve
from schemas import BathParams, EvaluationOptions, ModelParams, SweepConfig, ThermalSpec
from service import evaluate_all, run_sweep
from thermal import populations

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_FAILURE = 2

app = typer.Typer(add_completion=False, help="两比特量子 Rabi 模型的热平衡关联计算")


def _params(omega: float, delta1: float, delta2: float, g1: float, g2: float) -> ModelParams:
    try:
        return ModelParams(omega=omega, delta1=delta1, delta2=delta2, g1=g1, g2=g2)
    except ValueError as e:
        raise click.BadParameter(str(e))


# ==================== 子命令 ====================

@app.command()
def sweep(
    config: str = typer.Option(..., "--config", help="扫描配置文件（JSON/YAML）"),
    out: Optional[str] = typer.Option(None, "--out", help="输出目录，缺省使用配置中的 output.dir"),
    workers: Optional[int] = typer.Option(None, "--workers", min=1, help="并行进程数"),
):
    """按配置文件做参数扫描，写出 CSV 和热图"""
    try:
        sweep_config = SweepConfig.from_file(config)
    except ConfigError as e:
        typer.echo(f"✗ {e}", err=True)
        raise typer.Exit(code=EXIT_CONFIG)

    sweep_config.sweep.max_fock = min(sweep_config.sweep.max_fock, MAX_FOCK)
    output_dir = out or sweep_config.output_dir
    if workers is None and "workers" not in sweep_config.sweep.model_fields_set:
        workers = WORKERS
    result = run_sweep(sweep_config, workers=workers)

    emit_csv(result, os.path.join(output_dir, sweep_config.output.csv_name))
    emit_config_echo(result, os.path.join(output_dir, "config_echo.json"))
    for field in sweep_config.output.heatmaps:
        series_names = result.series_names or [None]
        for series in series_names:
            suffix = f"_{series}" if series else ""
            emit_heatmap(result, field, os.path.join(output_dir, f"{field}{suffix}.pgm"), series)

    for failure in result.failures:
        typer.echo(f"✗ {failure.indices} {failure.axis_values}: [{failure.code}] {failure.message}", err=True)
    raise typer.Exit(code=EXIT_FAILURE if result.failures else EXIT_OK)


@app.command()
def point(
    omega: float = typer.Option(1.0, "--omega"),
    delta1: float = typer.Option(1.0, "--delta1"),
    delta2: float = typer.Option(1.0, "--delta2"),
    g1: float = typer.Option(0.0, "--g1"),
    g2: float = typer.Option(0.0, "--g2"),
    temp: float = typer.Option(0.1, "--temp", min=0.0),
    gap: bool = typer.Option(False, "--gap", help="同时计算 Liouvillian 能隙比"),
):
    """单点计算，输出一条 JSON 记录"""
    params = _params(omega, delta1, delta2, g1, g2)
    try:
        options = EvaluationOptions(include_gap=gap, convergence_target=CONVERGENCE_TARGET, max_fock=MAX_FOCK)
    except ValueError as e:
        raise click.BadParameter(str(e), param_hint="RABI_CONVERGENCE_TARGET")
    try:
        report = evaluate_all(params, BathParams.for_mode(omega, temp), temp, options)
    except RabiError as e:
        typer.echo(f"✗ {e}", err=True)
        raise typer.Exit(code=EXIT_FAILURE)
    typer.echo(report.model_dump_json())
    raise typer.Exit(code=EXIT_OK)


@app.command()
def spectrum(
    omega: float = typer.Option(1.0, "--omega"),
    delta1: float = typer.Option(1.0, "--delta1"),
    delta2: float = typer.Option(1.0, "--delta2"),
    g1: float = typer.Option(0.0, "--g1"),
    g2: float = typer.Option(0.0, "--g2"),
    levels: int = typer.Option(10, "--levels", min=1),
    temps: Optional[str] = typer.Option(None, "--temps", help="逗号分隔的温度列表，输出 P₀(T)"),
):
    """打印 E_k − E₀ 和宇称；可附带基态布居 P₀(T)"""
    params = _params(omega, delta1, delta2, g1, g2)
    try:
        temperatures: List[float] = [float(t) for t in temps.split(",")] if temps else []
    except ValueError:
        raise click.BadParameter(f"无法解析温度列表: {temps}", param_hint="--temps")
    if any(t < 0 for t in temperatures):
        raise click.BadParameter("温度不能为负", param_hint="--temps")

    try:
        n_fock = choose_cutoff(params, max(temperatures, default=0.0), target="spectrum", hard_max=MAX_FOCK)
        eigs = solve(params, n_fock)
    except RabiError as e:
        typer.echo(f"✗ {e}", err=True)
        raise typer.Exit(code=EXIT_FAILURE)

    annotation = f"  g_c={critical_coupling(omega, delta1)!r}" if delta1 == delta2 else ""
    typer.echo(f"# n_fock={n_fock}{annotation}")
    typer.echo("k\tE_k-E_0\tparity")
    for k in range(min(levels, eigs.size)):
        typer.echo(f"{k}\t{eigs.energies[k] - eigs.energies[0]!r}\t{int(eigs.parities[k]):+d}")
    if temperatures:
        typer.echo("T\tP0")
        for T in temperatures:
            typer.echo(f"{T!r}\t{float(populations(eigs, ThermalSpec(T=T))[0])!r}")
    raise typer.Exit(code=EXIT_OK)


@app.command()
def gap(
    omega: float = typer.Option(1.0, "--omega"),
    delta1: float = typer.Option(1.0, "--delta1"),
    delta2: float = typer.Option(1.0, "--delta2"),
    g1: float = typer.Option(0.0, "--g1"),
    g2: float = typer.Option(0.0, "--g2"),
    temp: float = typer.Option(0.1, "--temp", min=0.0),
    levels: Optional[int] = typer.Option(None, "--levels", min=2, help="本征基截断 M，缺省按热占据选取"),
):
    """打印 μ₁(g)、μ₁(g=0) 及其比值"""
    params = _params(omega, delta1, delta2, g1, g2)
    try:
        gaps = compare_gaps(params, BathParams.for_mode(omega, temp), M=levels, hard_max=MAX_FOCK)
        ratio = gaps.ratio
    except RabiError as e:
        typer.echo(f"✗ {e}", err=True)
        raise typer.Exit(code=EXIT_FAILURE)
    typer.echo(f"mu1={gaps.mu1!r}\nmu1_bare={gaps.mu1_bare!r}\nratio={ratio!r}\nM={gaps.M}\nn_fock={gaps.n_fock}"
               f"\nconverged={gaps.converged}")
    raise typer.Exit(code=EXIT_OK)


@app.command()
def selftest():
    """运行不变量自检"""
    raise typer.Exit(code=EXIT_OK if run_selftest() else EXIT_FAILURE)


# ==================== 入口 ====================

def cli_main(argv: Optional[List[str]] = None) -> int:
    """解析参数并执行；返回退出码，不调用 sys.exit"""
    logging.basicConfig(level=LOG_LEVEL.upper(), format=LOG_FORMAT)
    command = typer.main.get_command(app)
    try:
        code = command.main(args=list(argv) if argv is not None else sys.argv[1:],
                            prog_name="rabi", standalone_mode=False)
    except click.ClickException as e:
        e.show()
        return EXIT_CONFIG
    except click.exceptions.Abort:
        return EXIT_CONFIG
    return code if isinstance(code, int) else EXIT_OK


if __name__ == "__main__":
    sys.exit(cli_main())
