"""
结果输出模块

CSV：表头 + 固定列顺序，浮点数按最短可往返的十进制写出，无定义值留空
配置回显：JSON，记录单位、热浴缺省值与临界耦合
热图：二进制 PGM (P5, maxval 255) + `<name>.range.txt` 记录归一化区间
"""
import json
import logging
import math
import os
from typing import List, Optional

import numpy as np
import pandas as pd
from PIL import Image

from schemas import DIAGNOSTIC_FIELDS, QUANTIFIER_FIELDS, SweepResult

logger = logging.getLogger(__name__)


class ResultExporter:
    """扫描结果导出类"""

    @staticmethod
    def columns(result: SweepResult) -> List[str]:
        """[series] + 扫描轴 + 请求的物理量（声明顺序）+ 诊断量 + wall_ms"""
        columns = ["series"] if result.series_names else []
        columns += list(result.axis_names)
        requested = set(result.quantifiers)
        for name in QUANTIFIER_FIELDS:
            if name in requested:
                columns.append(name)
            if name == "P0" and result.include_gap:
                columns.append("gap_ratio")
        columns += list(DIAGNOSTIC_FIELDS) + ["wall_ms"]
        return columns

    @staticmethod
    def to_frame(result: SweepResult) -> pd.DataFrame:
        columns = ResultExporter.columns(result)
        records = []
        for row in result.rows:
            record = {"series": row.series, **row.axis_values, **row.report.model_dump(), "wall_ms": row.wall_ms}
            records.append({column: record.get(column) for column in columns})
        frame = pd.DataFrame.from_records(records, columns=columns)
        for column in DIAGNOSTIC_FIELDS:
            frame[column] = frame[column].astype("int64")
        return frame

    @staticmethod
    def write_csv(result: SweepResult, path: str) -> str:
        frame = ResultExporter.to_frame(result)
        try:
            directory = os.path.dirname(os.path.abspath(path))
            os.makedirs(directory, exist_ok=True)
            frame.to_csv(path, index=False, lineterminator="\n", na_rep="", encoding="utf-8")
        except OSError as e:
            logger.error(f"✗ CSV 写入失败: {path}: {e}")
            raise
        logger.info(f"✓ CSV 已写入: {path} ({len(frame)} 行)")
        return path

    @staticmethod
    def field_grid(result: SweepResult, field: str, series: Optional[str] = None) -> np.ndarray:
        """二维网格 [轴1下标, 轴2下标]；失败点和无定义值为 NaN"""
        if len(result.axis_names) != 2:
            raise ValueError(f"热图需要恰好两个扫描轴，当前为 {result.axis_names}")
        if result.series_names and series is None:
            raise ValueError(f"结果包含多条 series {result.series_names}，需要指定一条")

        grid = np.full(tuple(result.axis_points), np.nan)
        for row in result.rows:
            if row.series != series:
                continue
            value = getattr(row.report, field, None)
            if value is not None and math.isfinite(value):
                grid[row.indices[-2], row.indices[-1]] = value
        return grid

    @staticmethod
    def write_heatmap(result: SweepResult, field: str, path: str, series: Optional[str] = None) -> str:
        """
        宽 = 轴1点数，高 = 轴2点数；第一行对应轴2的最大值

        线性 min–max 归一化；无定义值为 0；常数场全部为 255
        """
        grid = ResultExporter.field_grid(result, field, series)
        image = grid.T[::-1, :]
        defined = np.isfinite(image)

        lines = []
        pixels = np.zeros(image.shape, dtype=np.uint8)
        if defined.any():
            lo, hi = float(image[defined].min()), float(image[defined].max())
            lines += [f"min={lo!r}", f"max={hi!r}"]
            if hi > lo:
                scaled = np.rint(255.0 * (image[defined] - lo) / (hi - lo))
                pixels[defined] = scaled.astype(np.uint8)
                lines.append("normalization=linear pixel=round(255*(v-min)/(max-min)); undefined=0")
            else:
                pixels[defined] = 255
                lines.append("normalization=degenerate range (min == max): defined pixels 255; undefined=0")
        else:
            lines += ["min=", "max=", "normalization=no finite values: all pixels 0"]

        root, _ = os.path.splitext(path)
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        Image.fromarray(pixels).save(path, format="PPM")
        with open(f"{root}.range.txt", "w", encoding="utf-8", newline="\n") as handle:
            handle.write(f"field={field}\n" + "\n".join(lines) + "\n")

        logger.info(f"✓ 热图已写入: {path} ({pixels.shape[1]}×{pixels.shape[0]})")
        return path

    @staticmethod
    def write_echo(result: SweepResult, path: str) -> str:
        os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
        with open(path, "w", encoding="utf-8", newline="\n") as handle:
            json.dump(result.config_echo, handle, ensure_ascii=False, indent=2, sort_keys=True)
            handle.write("\n")
        logger.info(f"✓ 配置回显已写入: {path}")
        return path


def emit_csv(result: SweepResult, path: str) -> str:
    """写 CSV"""
    return ResultExporter.write_csv(result, path)


def emit_heatmap(result: SweepResult, field: str, path: str, series: Optional[str] = None) -> str:
    """写 PGM 热图"""
    return ResultExporter.write_heatmap(result, field, path, series)


def emit_config_echo(result: SweepResult, path: str) -> str:
    """写配置回显 JSON"""
    return ResultExporter.write_echo(result, path)


def read_csv(path: str) -> pd.DataFrame:
    """按写出时的精度读回"""
    return pd.read_csv(path, float_precision="round_trip", keep_default_na=False, na_values=[""])
