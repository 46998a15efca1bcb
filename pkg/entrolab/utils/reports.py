"""
报告输出: 规范 JSON、CSV 与运行配置哈希

相同的配置（含种子）必须产生逐字节相同的报告，因此 JSON 一律排序键、固定缩进，
非有限浮点数写成 null，numpy 标量与数组转换为原生类型。
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from collections.abc import Iterable, Mapping
from pathlib import Path
from typing import Any

import numpy as np

from entrolab.logger import get_logger

logger = get_logger(__name__)

# 不参与配置哈希的键：worker 数与输出路径不影响结果
HASH_EXCLUDED: frozenset[str] = frozenset({"workers", "out", "csv", "svg", "log_level"})


def to_plain(value: Any) -> Any:
    """递归转换为 JSON 原生类型；NaN / ±inf → None。"""
    if isinstance(value, Mapping):
        return {str(k): to_plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [to_plain(v) for v in items]
    if isinstance(value, np.ndarray):
        return [to_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, (np.integer, int)):
        return int(value)
    if isinstance(value, (np.floating, float)):
        f = float(value)
        return f if math.isfinite(f) else None
    if isinstance(value, Path):
        return str(value)
    if hasattr(value, "to_dict"):
        return to_plain(value.to_dict())
    return value


def canonical_json(data: Any) -> str:
    return (
        json.dumps(to_plain(data), sort_keys=True, indent=2, ensure_ascii=False, allow_nan=False)
        + "\n"
    )


def config_hash(config: Mapping[str, Any]) -> str:
    """运行配置的 SHA-256（排除 HASH_EXCLUDED 中的键）"""
    payload = {k: v for k, v in config.items() if k not in HASH_EXCLUDED}
    blob = json.dumps(to_plain(payload), sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def write_json(path: str | Path, data: Any) -> Path:
    """
    写出规范 JSON 报告，必要时创建父目录。

    Raises:
        OSError: 输出路径不可写
    """
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(canonical_json(data), encoding="utf-8")
    logger.info(f"报告已写入: {out}")
    return out


def write_csv(
    path: str | Path, rows: Iterable[Mapping[str, Any]], columns: list[str] | None = None
) -> Path:
    """
    写出 CSV；列顺序为 columns，缺省时按首次出现的顺序收集所有键。
    """
    rows = [to_plain(r) for r in rows]
    if columns is None:
        columns = []
        for row in rows:
            columns.extend(k for k in row if k not in columns)
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: "" if row.get(k) is None else row.get(k) for k in columns})
    logger.info(f"CSV 已写入: {out} ({len(rows)} 行)")
    return out
