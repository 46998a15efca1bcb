"""确定性的分块并行执行。"""

from __future__ import annotations

from collections.abc import Callable
from concurrent.futures import ThreadPoolExecutor
from typing import TypeVar

import numpy as np

from entrolab.config import POINT_CHUNK, resolve_workers

T = TypeVar("T")


def chunk_bounds(n: int, chunk: int) -> list[tuple[int, int]]:
    """[0, n) 的固定分块边界，只依赖 n 与 chunk。"""
    if chunk < 1:
        raise ValueError(f"chunk 必须为正整数，当前值: {chunk}")
    return [(start, min(start + chunk, n)) for start in range(0, n, chunk)]


def chunked_map(
    fn: Callable[[int, int], T],
    n: int,
    chunk: int,
    workers: int | None = None,
) -> list[T]:
    """
    对每个分块 [start, stop) 调用 fn，按分块顺序返回结果。

    分块与 worker 数无关，调用方按返回顺序归约即可得到逐位一致的结果。
    """
    bounds = chunk_bounds(n, chunk)
    n_workers = resolve_workers(workers)
    if n_workers == 1 or len(bounds) <= 1:
        return [fn(start, stop) for start, stop in bounds]
    with ThreadPoolExecutor(max_workers=n_workers) as pool:
        futures = [pool.submit(fn, start, stop) for start, stop in bounds]
        return [f.result() for f in futures]


def map_points(
    fn: Callable[[np.ndarray], np.ndarray],
    points: np.ndarray,
    chunk: int = POINT_CHUNK,
    workers: int | None = None,
) -> np.ndarray:
    """按行分块对点列求值并按原顺序拼接。"""
    if len(points) == 0:
        return np.empty((0, 2))
    parts = chunked_map(lambda start, stop: fn(points[start:stop]), len(points), chunk, workers)
    return np.vstack(parts)
