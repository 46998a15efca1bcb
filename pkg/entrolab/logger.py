#!/usr/bin/env python3
"""
统一日志配置模块
控制台输出经由 tqdm.write，进度条运行期间日志不会打断进度条；可选文件输出。
"""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Iterable
from pathlib import Path

from tqdm import tqdm

from entrolab.config import (
    DEFAULT_LOG_LEVEL,
    LOG_DATE_FORMAT,
    LOG_FORMAT,
)

BANNER_WIDTH = 60


class TqdmStreamHandler(logging.Handler):
    """把日志行交给 tqdm.write，与活动进度条共存。"""

    def emit(self, record: logging.LogRecord) -> None:
        try:
            tqdm.write(self.format(record), file=sys.stdout)
        except Exception:
            self.handleError(record)


# ---------------------------------------------------------------------------
# 日志配置函数
# ---------------------------------------------------------------------------


def _resolve_level(log_level: str | None) -> int:
    if log_level is None:
        log_level = os.getenv("LOG_LEVEL", DEFAULT_LOG_LEVEL).upper()
    level = logging.getLevelName(log_level.upper())
    if isinstance(level, int):
        return level
    print(
        f"警告: 无效的日志级别 '{log_level}'，使用默认级别 '{DEFAULT_LOG_LEVEL}'",
        file=sys.stderr,
    )
    return logging.getLevelName(DEFAULT_LOG_LEVEL)


def setup_logger(
    name: str | None = None,
    log_level: str | None = None,
    log_file: str | Path | None = None,
    console: bool = True,
) -> logging.Logger:
    """
    设置并返回配置好的 logger

    Args:
        name: Logger 名称（通常使用 __name__），None 时使用根 logger
        log_level: 日志级别，None 时从环境变量 LOG_LEVEL 读取
        log_file: 日志文件路径（例如 logs/<config_hash>.log），None 时不输出到文件
        console: 是否输出到控制台

    Returns:
        配置好的 Logger 实例
    """
    logger = logging.getLogger(name) if name else logging.root

    # 已配置过则直接返回
    if logger.handlers:
        return logger

    level = _resolve_level(log_level)
    logger.setLevel(level)
    formatter = logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATE_FORMAT)

    if console:
        console_handler = TqdmStreamHandler()
        console_handler.setLevel(level)
        console_handler.setFormatter(formatter)
        logger.addHandler(console_handler)

    if log_file:
        add_file_handler(logger, log_file, level)

    return logger


def add_file_handler(
    logger: logging.Logger, log_file: str | Path, level: int | None = None
) -> Path:
    """为已有 logger 追加文件输出（CLI 在得到配置哈希之后调用）。"""
    log_path = Path(log_file)
    log_path.parent.mkdir(parents=True, exist_ok=True)
    file_handler = logging.FileHandler(log_path, mode="a", encoding="utf-8")
    file_handler.setLevel(level if level is not None else logger.level)
    file_handler.setFormatter(logging.Formatter(fmt=LOG_FORMAT, datefmt=LOG_DATE_FORMAT))
    logger.addHandler(file_handler)
    return log_path


def get_logger(name: str | None = None) -> logging.Logger:
    """获取已配置的 logger（未配置时使用默认配置）。"""
    logger = logging.getLogger(name) if name else logging.root
    if not logger.handlers:
        setup_logger(name=name)
    return logger


def log_banner(logger: logging.Logger, title: str, lines: Iterable[str] = ()) -> None:
    """以 ==== 分隔块输出摘要。"""
    sep = "=" * BANNER_WIDTH
    logger.info(sep)
    logger.info(title)
    logger.info(sep)
    for line in lines:
        logger.info(line)
    logger.info(sep)
