#!/usr/bin/env python3
"""
统一配置文件
首次导入时加载项目根目录下的 .env 文件，环境变量可覆盖下方可覆盖项。

环境变量说明（.env 或系统环境变量）:
  - 并行与数值积分:
    ENTROLAB_WORKERS, ENTROLAB_FLOW_STEPS, ENTROLAB_SEED
  - 采样分辨率（相对区域直径）:
    ENTROLAB_GEOM_RESOLUTION, ENTROLAB_CERT_RESOLUTION
  - 容差:
    ENTROLAB_TOL_CONFORMAL, ENTROLAB_TOL_ENERGY, ENTROLAB_TOL_ENTROPY
  - 输出与日志:
    ENTROLAB_OUTPUT_DIR, LOG_LEVEL
"""

from __future__ import annotations

import math
import os
from pathlib import Path

from dotenv import load_dotenv

# 加载 .env（项目根目录：entrolab 包的父目录）
_env_path = Path(__file__).resolve().parent.parent / ".env"
load_dotenv(_env_path)


def _positive_int(name: str, default: int) -> int:
    value = int(os.getenv(name, str(default)))
    if value < 1:
        raise ValueError(f"环境变量 {name} 必须为正整数，当前值: {value}")
    return value


def _positive_float(name: str, default: float) -> float:
    value = float(os.getenv(name, str(default)))
    if not value > 0:
        raise ValueError(f"环境变量 {name} 必须为正数，当前值: {value}")
    return value


# ---------------------------------------------------------------------------
# 并行与数值积分（可被环境变量覆盖）
# ---------------------------------------------------------------------------

_DEFAULT_WORKERS = 1
_DEFAULT_FLOW_STEPS = 64
_DEFAULT_SEED = 0

DEFAULT_WORKERS: int = _positive_int("ENTROLAB_WORKERS", _DEFAULT_WORKERS)
DEFAULT_FLOW_STEPS: int = _positive_int("ENTROLAB_FLOW_STEPS", _DEFAULT_FLOW_STEPS)
DEFAULT_SEED: int = int(os.getenv("ENTROLAB_SEED", str(_DEFAULT_SEED)))

# 分块大小只取决于数据规模，与 worker 数无关（保证结果逐位可复现）
PAIR_CHUNK: int = 256
POINT_CHUNK: int = 4096


# ---------------------------------------------------------------------------
# 采样分辨率（相对区域直径）
# ---------------------------------------------------------------------------

GEOM_RESOLUTION: float = _positive_float("ENTROLAB_GEOM_RESOLUTION", 1e-3)
CERT_RESOLUTION: float = _positive_float("ENTROLAB_CERT_RESOLUTION", 1e-3)


# ---------------------------------------------------------------------------
# 容差
# ---------------------------------------------------------------------------

TOL_CONFORMAL: float = _positive_float("ENTROLAB_TOL_CONFORMAL", 0.02)
TOL_ENERGY: float = _positive_float("ENTROLAB_TOL_ENERGY", 0.05)
TOL_ENTROPY: float = _positive_float("ENTROLAB_TOL_ENTROPY", 0.15)

# 不等式检验的绝对松弛量
INEQUALITY_SLACK: float = 1e-9
# 闭合残差上限
CLOSING_RESIDUAL: float = 1e-9


# ---------------------------------------------------------------------------
# 构造常数（固定，不通过环境变量覆盖）
# ---------------------------------------------------------------------------

# 细长邻域因子 c 与回归筛选的排除半径因子
CLOSING_C: float = 0.25
EXCLUSION_FACTOR: float = 0.75

# 熵估计默认 ε 序列: 2^-4, 2^-5, 2^-6
DEFAULT_EPS: tuple[float, ...] = (2.0**-4, 2.0**-5, 2.0**-6)
DEFAULT_N_RANGE: tuple[int, ...] = tuple(range(2, 9))
# 逃逸比例超过该值的运行标记为不可靠
ESCAPE_LIMIT: float = 0.01

GOLDEN_RATIO: float = (1.0 + math.sqrt(5.0)) / 2.0


# ---------------------------------------------------------------------------
# 输出与日志
# ---------------------------------------------------------------------------

DEFAULT_OUTPUT_DIR: str = os.getenv("ENTROLAB_OUTPUT_DIR", "reports")

_DEFAULT_LOG_LEVEL = "INFO"
DEFAULT_LOG_LEVEL: str = os.getenv("LOG_LEVEL", _DEFAULT_LOG_LEVEL).upper()

LOGS_DIR: str = "logs"
LOG_FORMAT: str = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT: str = "%Y-%m-%d %H:%M:%S"


def resolve_workers(workers: int | None) -> int:
    """显式参数优先，否则使用 ENTROLAB_WORKERS。"""
    if workers is None:
        return DEFAULT_WORKERS
    if workers < 1:
        raise ValueError(f"workers 必须为正整数，当前值: {workers}")
    return workers
