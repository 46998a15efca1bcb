#!/usr/bin/env python3
"""
Bowen 分离集熵估计

S(n, ε): 点云中 (n, ε)-分离子集的（贪心极大）基数，Bowen 度量
d_n(x, y) = max_{0<=k<n} |f^k(x) − f^k(y)|，只用正向迭代。
熵估计取 log S 对 n 的最小二乘斜率（n 范围的后一半），头条值为各 ε 斜率的最大值。
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.spatial import cKDTree
from tqdm import tqdm

from entrolab.config import (
    DEFAULT_EPS,
    DEFAULT_N_RANGE,
    DEFAULT_SEED,
    ESCAPE_LIMIT,
    PAIR_CHUNK,
    POINT_CHUNK,
    TOL_ENTROPY,
)
from entrolab.core.errors import ConstructionError
from entrolab.core.estimators import SamplingPlan
from entrolab.core.geometry import Array, Region, as_points
from entrolab.core.homeo import HomeoExpr
from entrolab.logger import get_logger
from entrolab.utils.parallel import map_points

logger = get_logger(__name__)


# ---------------------------------------------------------------------------
# 轨道表
# ---------------------------------------------------------------------------


class OrbitTable:
    """
    点云的正向轨道缓存，orbits[k] = f^k(点云)。
    escape[i] 为第 i 个点首次非有限或离开 domain 的步数（未逃逸为 n_max）。
    """

    def __init__(
        self,
        m: HomeoExpr,
        points: Array,
        domain: Region | None = None,
        workers: int | None = None,
        progress: bool = False,
    ) -> None:
        self.m = m
        self.domain = domain
        self.workers = workers
        self.progress = progress
        pts = np.asarray(points, dtype=np.float64)
        self._orbits: list[Array] = [pts]
        self._stack: Array = np.nan_to_num(pts)[None]
        self.escape = np.full(len(pts), np.iinfo(np.int64).max, dtype=np.int64)
        self._mark_escapes(0, pts)

    def __len__(self) -> int:
        return len(self._orbits[0])

    @property
    def depth(self) -> int:
        return len(self._orbits)

    def _mark_escapes(self, step: int, pts: Array) -> None:
        bad = ~np.all(np.isfinite(pts), axis=1)
        if self.domain is not None:
            bad |= ~self.domain.contains(np.nan_to_num(pts))
        newly = bad & (self.escape > step)
        self.escape[newly] = step

    def extend(self, n: int) -> None:
        """保证至少缓存 f^0 … f^{n−1}"""
        steps = range(self.depth, n)
        for step in tqdm(steps, desc="轨道表", disable=not self.progress or len(steps) == 0):
            prev = np.nan_to_num(self._orbits[-1])
            nxt = map_points(self.m.forward, prev, POINT_CHUNK, self.workers)
            self._mark_escapes(step, nxt)
            self._orbits.append(nxt)
        if len(self._stack) < self.depth:
            self._stack = np.nan_to_num(np.stack(self._orbits))

    def valid(self, n: int) -> Array:
        """前 n 个迭代都未逃逸的点"""
        return self.escape >= n

    def features(self, n: int) -> Array:
        """(P, 2n) 的拼接轨道坐标；其 Chebyshev 距离不超过 Bowen 距离"""
        self.extend(n)
        return np.concatenate(list(self._stack[:n]), axis=1)

    def bowen(self, n: int, i: int, idx: Array) -> Array:
        """点 i 与点集 idx 之间的 Bowen 距离"""
        self.extend(n)
        stack = self._stack[:n]
        diff = stack[:, idx, :] - stack[:, i : i + 1, :]
        return np.linalg.norm(diff, axis=2).max(axis=0)

    def pair_bowen(self, n: int, left: Array, right: Array) -> Array:
        """逐对 Bowen 距离 d_n(left[k], right[k])，按 PAIR_CHUNK 分块避免大中间数组"""
        self.extend(n)
        stack = self._stack[:n]
        out = np.empty(len(left), dtype=np.float64)
        step = PAIR_CHUNK * PAIR_CHUNK
        for start in range(0, len(left), step):
            a, b = left[start : start + step], right[start : start + step]
            out[start : start + step] = np.linalg.norm(stack[:, a] - stack[:, b], axis=2).max(
                axis=0
            )
        return out


def cloud_points(cloud: SamplingPlan | Array | None) -> Array:
    """采样计划或显式点列；None 为单位方块上的 128 × 128 网格"""
    if cloud is None:
        return SamplingPlan.grid(resolution=128).points()
    if isinstance(cloud, SamplingPlan):
        return cloud.points()
    return as_points(cloud)


# ---------------------------------------------------------------------------
# 分离集
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeparatedSet:
    indices: Array
    n: int
    eps: float
    escaped: int

    def __len__(self) -> int:
        return len(self.indices)


def separated_set(
    table: OrbitTable,
    n: int,
    eps: float,
    seed: int = DEFAULT_SEED,
    warm: Array | None = None,
) -> SeparatedSet:
    """
    在随机排列（seed 决定）上首次适配的贪心极大 (n, ε)-分离集。

    warm 为已知的 (n, ε)-分离下标集合，先整体选入再继续贪心。
    """
    if n < 1:
        raise ValueError(f"n 必须 >= 1，当前值: {n}")
    if not eps > 0:
        raise ValueError(f"ε 必须为正数，当前值: {eps}")
    feats = table.features(n)
    valid = table.valid(n)
    tree = cKDTree(feats)
    blocked = ~valid
    selected: list[int] = []

    def take(i: int) -> None:
        selected.append(i)
        cand = np.asarray(tree.query_ball_point(feats[i], r=eps, p=np.inf), dtype=np.int64)
        if cand.size:
            close = cand[table.bowen(n, i, cand) <= eps]
            blocked[close] = True
        blocked[i] = True

    if warm is not None:
        for i in warm:
            if valid[i] and not blocked[i]:
                take(int(i))
    order = np.random.default_rng(seed).permutation(len(table))
    for i in order:
        if not blocked[i]:
            take(int(i))
    escaped = int((~valid).sum())
    return SeparatedSet(np.asarray(selected, dtype=np.int64), n, eps, escaped)


def is_maximal(table: OrbitTable, result: SeparatedSet) -> bool:
    """
    事后检验：每个未选中的有效点都与某个选中点的 Bowen 距离 <= ε，
    且选中点之间两两距离 > ε。
    """
    n, eps = result.n, result.eps
    feats = table.features(n)
    valid = np.flatnonzero(table.valid(n))
    chosen = result.indices
    if chosen.size == 0:
        return valid.size == 0
    tree = cKDTree(feats[chosen])
    is_chosen = np.zeros(len(table), dtype=bool)
    is_chosen[chosen] = True
    near = tree.query_ball_point(feats[valid], r=eps, p=np.inf)
    sizes = np.fromiter((len(c) for c in near), dtype=np.int64, count=len(valid))
    left = np.repeat(valid, sizes)
    flat = np.concatenate([np.asarray(c, dtype=np.int64) for c in near] or [np.empty(0)])
    right = chosen[flat.astype(np.int64)]
    keep = left != right
    left, right = left[keep], right[keep]
    close = table.pair_bowen(n, left, right) <= eps
    hits = np.zeros(len(table), dtype=bool)
    hits[left[close]] = True
    # 选中点两两分离，未选中的有效点必被某个选中点覆盖
    if np.any(hits[chosen]):
        return False
    return bool(np.all(hits[valid[~is_chosen[valid]]]))


def separated_count(
    m: HomeoExpr,
    n: int,
    eps: float,
    cloud: SamplingPlan | Array,
    seed: int = DEFAULT_SEED,
    domain: Region | None = None,
    table: OrbitTable | None = None,
    workers: int | None = None,
) -> int:
    """贪心极大 (n, ε)-分离集的基数；逃逸点被剔除并计数"""
    table = table or OrbitTable(m, cloud_points(cloud), domain, workers)
    result = separated_set(table, n, eps, seed)
    if result.escaped:
        logger.info(f"n={n} 时有 {result.escaped} 个点逃逸，已剔除")
    return len(result)


# ---------------------------------------------------------------------------
# 熵估计
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EntropyEstimate:
    """S(n, ε) 表、每个 ε 的拟合斜率与头条估计"""

    n_range: tuple[int, ...]
    eps_list: tuple[float, ...]
    counts: dict[tuple[int, float], int]
    slopes: dict[float, float]
    headline: float
    degenerate: tuple[float, ...]
    escaped: int
    cloud_size: int
    seed: int = DEFAULT_SEED
    cert_bound: float | None = None
    lip_bound: float | None = None
    fit_window: tuple[int, ...] = field(default=())

    @property
    def unreliable(self) -> bool:
        return self.cloud_size > 0 and self.escaped / self.cloud_size > ESCAPE_LIMIT

    def count(self, n: int, eps: float) -> int:
        return self.counts[(n, eps)]

    def rows(self) -> list[dict[str, Any]]:
        """CSV 行: n, eps, S, slope"""
        return [
            {"n": n, "eps": eps, "S": self.counts[(n, eps)], "slope": self.slopes[eps]}
            for eps in self.eps_list
            for n in self.n_range
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "n_range": list(self.n_range),
            "eps": list(self.eps_list),
            "table": self.rows(),
            "slopes": {repr(e): s for e, s in self.slopes.items()},
            "headline": self.headline,
            "degenerate": list(self.degenerate),
            "escaped": self.escaped,
            "cloud_size": self.cloud_size,
            "unreliable": self.unreliable,
            "fit_window": list(self.fit_window),
            "seed": self.seed,
            "cert_bound": self.cert_bound,
            "lip_bound": self.lip_bound,
        }


def fit_slope(n_values: list[int], counts: list[int]) -> tuple[float, bool]:
    """
    log S 对 n 的最小二乘斜率，只用后 ceil(len/2) 个 n。
    返回 (斜率, 是否退化)；全部计数相等时斜率为 0 且标记退化。
    """
    half = math.ceil(len(n_values) / 2)
    ns = np.asarray(n_values[-half:], dtype=np.float64)
    logs = np.log(np.asarray(counts[-half:], dtype=np.float64))
    if np.all(logs == logs[0]):
        return 0.0, True
    slope = float(np.polyfit(ns, logs, 1)[0])
    if not math.isfinite(slope):
        return 0.0, True
    return slope, False


def entropy_estimate(
    m: HomeoExpr,
    n_range: tuple[int, ...] | list[int] = DEFAULT_N_RANGE,
    eps_list: tuple[float, ...] | list[float] = DEFAULT_EPS,
    cloud: SamplingPlan | Array | None = None,
    seed: int = DEFAULT_SEED,
    domain: Region | None = None,
    workers: int | None = None,
    progress: bool = False,
) -> EntropyEstimate:
    """
    填充 S(n, ε) 表并拟合斜率。

    同一次估计内 (n, ε) 的贪心以 (n−1, ε) 与 (n, ε_prev) 两个分离集中较大者为起点，
    两者都是 (n, ε)-分离的，因此表关于 n 单调不减、关于 ε 单调不增。
    """
    n_values = sorted(set(int(n) for n in n_range))
    if len(n_values) < 4:
        raise ValueError(f"n 范围至少需要 4 个值，当前: {n_values}")
    eps_values = sorted({float(e) for e in eps_list}, reverse=True)
    table = OrbitTable(m, cloud_points(cloud), domain, workers, progress)
    table.extend(n_values[-1])

    sets: dict[tuple[int, float], SeparatedSet] = {}
    jobs = [(eps, n) for eps in eps_values for n in n_values]
    for k, (eps, n) in enumerate(tqdm(jobs, desc="分离集", disable=not progress)):
        candidates = []
        prev_n = n_values[n_values.index(n) - 1] if n != n_values[0] else None
        if prev_n is not None:
            candidates.append(sets[(prev_n, eps)])
        if k >= len(n_values):
            prev_eps = eps_values[eps_values.index(eps) - 1]
            candidates.append(sets[(n, prev_eps)])
        warm = max(candidates, key=len).indices if candidates else None
        result = separated_set(table, n, eps, seed, warm)
        if not is_maximal(table, result):
            raise RuntimeError(f"(n={n}, ε={eps}) 的贪心分离集不是极大的")
        sets[(n, eps)] = result

    counts = {key: len(s) for key, s in sets.items()}
    slopes: dict[float, float] = {}
    degenerate = []
    for eps in eps_values:
        slope, flat = fit_slope(n_values, [counts[(n, eps)] for n in n_values])
        slopes[eps] = slope
        if flat:
            degenerate.append(eps)
    escaped = int((~table.valid(n_values[-1])).sum())
    estimate = EntropyEstimate(
        n_range=tuple(n_values),
        eps_list=tuple(eps_values),
        counts=counts,
        slopes=slopes,
        headline=max(slopes.values()),
        degenerate=tuple(degenerate),
        escaped=escaped,
        cloud_size=len(table),
        seed=seed,
        fit_window=tuple(n_values[-math.ceil(len(n_values) / 2) :]),
    )
    if estimate.unreliable:
        logger.warning(f"逃逸比例 {escaped}/{len(table)} 超过 {ESCAPE_LIMIT:.0%}，结果不可靠")
    logger.info(f"熵估计: 头条斜率 {estimate.headline:.4f}，各 ε 斜率 {slopes}")
    return estimate


# ---------------------------------------------------------------------------
# 上界与对账
# ---------------------------------------------------------------------------


def lipschitz_upper_bound(lip: float, hausdorff_dim: float) -> float:
    """h_top(f) <= dim · log⁺ L"""
    if not lip > 0:
        raise ValueError(f"Lipschitz 常数必须为正数，当前值: {lip}")
    if hausdorff_dim < 0:
        raise ValueError(f"维数必须非负，当前值: {hausdorff_dim}")
    return hausdorff_dim * max(math.log(lip), 0.0)


@dataclass(frozen=True)
class Verdict:
    passed: bool
    cert_bound: float
    estimate: float
    lip_bound: float
    tolerance: float

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "cert_bound": self.cert_bound,
            "estimate": self.estimate,
            "lip_bound": self.lip_bound,
            "tolerance": self.tolerance,
        }

    def summary(self) -> str:
        mark = "通过" if self.passed else "未通过"
        return (
            f"[{mark}] 证书下界 {self.cert_bound:.4f} <= 估计 {self.estimate:.4f} "
            f"<= Lipschitz 上界 {self.lip_bound:.4f}（容差 {self.tolerance:.4f}）"
        )


def reconcile(
    estimate: EntropyEstimate | float,
    cert_bound: float,
    lip_bound: float,
    tol: float | None = None,
) -> Verdict:
    """
    通过 ⇔ cert − tol <= 估计 <= lip + tol，默认 tol = TOL_ENTROPY·cert。

    Raises:
        ConstructionError: 证书下界超过 Lipschitz 上界（构造自相矛盾）
    """
    value = estimate.headline if isinstance(estimate, EntropyEstimate) else float(estimate)
    tolerance = TOL_ENTROPY * cert_bound + 1e-12 if tol is None else tol
    if cert_bound > lip_bound + tolerance:
        raise ConstructionError(
            f"证书下界 {cert_bound:.6f} 超过 Lipschitz 上界 {lip_bound:.6f}（容差 {tolerance:.2e}）"
        )
    passed = cert_bound - tolerance <= value <= lip_bound + tolerance
    return Verdict(
        passed=bool(passed),
        cert_bound=cert_bound,
        estimate=value,
        lip_bound=lip_bound,
        tolerance=tolerance,
    )
