#!/usr/bin/env python3
"""
命名构造

- 嵌套方块 Q_n = I_n × I_n（I_n = [2^{-n}, 2^{-(n-1)}]）上的无穷熵同胚：
  在 Q_n 上为 f_n = A_n ∘ g_n ∘ A_n⁻¹，其余位置为恒等，g_n 是支撑在 R = [1/3, 2/3]² 中的
  b(n) 分支马蹄；以及它的有限截断序列。
- 环形扭转 (r, θ) ↦ (r, θ + ω(r))，作为闭合引理与马蹄插入流程的回归基础动力系统。
"""

from __future__ import annotations

import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike

from entrolab.config import DEFAULT_EPS, DEFAULT_N_RANGE, DEFAULT_SEED, GOLDEN_RATIO
from entrolab.core.entropy import EntropyEstimate, entropy_estimate
from entrolab.core.errors import DomainError
from entrolab.core.geometry import Array, Box, Region, as_points
from entrolab.core.homeo import IDENTITY, Affine, HomeoExpr, Piecewise, twist
from entrolab.core.horseshoe import make_horseshoe
from entrolab.logger import get_logger
from entrolab.utils.parallel import map_points

logger = get_logger(__name__)

BranchSchedule = Callable[[int], int]

# 截断序列默认的最深方块
TRUNCATION_CAP = 6
# 连续模实验：每个十进位的最大比值相对上一个十进位允许的涨幅
MODULUS_DRIFT_LIMIT = 0.10

# 命名扭转的环形区域：ω 在 [0.2, 0.8] 上为常数，向 0.1 与 0.9 线性衰减到 0
ANNULUS = (0.1, 0.2, 0.8, 0.9)


def _default_branches(n: int) -> int:
    return n


# ---------------------------------------------------------------------------
# 嵌套方块
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NestedSquares:
    """Q_n、A_n 与 R_n = A_n(R)，n = 1..m_max"""

    m_max: int

    def __post_init__(self) -> None:
        if self.m_max < 1:
            raise ValueError(f"m_max 必须 >= 1，当前值: {self.m_max}")

    @staticmethod
    def interval(n: int) -> tuple[float, float]:
        return 2.0**-n, 2.0 ** -(n - 1)

    def square(self, n: int) -> Box:
        lo, hi = self.interval(n)
        return Box((lo, lo), (hi, hi))

    @staticmethod
    def affine(n: int) -> Affine:
        """A_n(x, y) = ((x+1)/2ⁿ, (y+1)/2ⁿ)，把 Q = [0,1]² 映到 Q_n"""
        s = 2.0**-n
        return Affine(((s, 0.0), (0.0, s)), (s, s))

    @staticmethod
    def reference() -> Box:
        """R = [1/3, 2/3]²"""
        return Box((1.0 / 3.0, 1.0 / 3.0), (2.0 / 3.0, 2.0 / 3.0))

    def inner(self, n: int) -> Box:
        corners = self.affine(n).forward(np.array([self.reference().lo, self.reference().hi]))
        return Box(tuple(corners[0]), tuple(corners[1]))

    def square_index(self, points: ArrayLike) -> Array:
        """
        每个点所在方块的下标 n（1..m_max），不在 ∪Q_n 中为 0。
        相邻方块共享的边界点归较小的 n。
        """
        pts = as_points(points)
        out = np.zeros(len(pts), dtype=np.int64)
        positive = np.all(pts > 0.0, axis=1) & np.all(pts <= 1.0, axis=1)
        if not np.any(positive):
            return out
        levels = np.ceil(-np.log2(pts[positive])).astype(np.int64)
        n = np.maximum(levels[:, 0], 1)
        n = np.maximum(n, np.maximum(levels[:, 1], 1))
        lo = 2.0 ** (-n.astype(np.float64))
        inside = (
            np.all(pts[positive] >= lo[:, np.newaxis], axis=1)
            & np.all(pts[positive] <= 2.0 * lo[:, np.newaxis], axis=1)
            & (n <= self.m_max)
        )
        idx = np.flatnonzero(positive)
        out[idx[inside]] = n[inside]
        return out


@dataclass(frozen=True)
class NestedSquaresMap(Piecewise):
    """
    分片依次为 Q_n（n ∈ levels）上的 f_n、其余位置为恒等的拼接映射。
    点的分派走 NestedSquares.square_index 的 log₂ 查表，每个点只求值一个分片。
    """

    kind: ClassVar[str] = "nested_squares"

    levels: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        super().__post_init__()
        object.__setattr__(self, "levels", tuple(int(n) for n in self.levels))
        if not self.levels or len(self.levels) != len(self.parts):
            raise ValueError(
                f"levels 必须与分片一一对应: {len(self.levels)} 个层级，{len(self.parts)} 个分片"
            )
        if self.default != IDENTITY:
            raise ValueError("嵌套方块映射在方块之外必须是恒等")

    def _dispatch(self, points: Array, inverse: bool) -> Array:
        pts = as_points(points)
        out = np.array(pts, dtype=np.float64)
        index = NestedSquares(max(self.levels)).square_index(pts)
        for n, (_, m) in zip(self.levels, self.parts, strict=True):
            mask = index == n
            if np.any(mask):
                out[mask] = m.backward(pts[mask]) if inverse else m.forward(pts[mask])
        return out

    def to_dict(self) -> dict[str, Any]:
        return {**super().to_dict(), "levels": list(self.levels)}


def _sewn_map(levels: Sequence[int], branch_of: BranchSchedule) -> HomeoExpr:
    """把 Q_n（n ∈ levels，升序）上的 f_n 与恒等拼接"""
    levels = sorted(levels)
    if not levels:
        return IDENTITY
    squares = NestedSquares(max(levels))
    parts = []
    for n in levels:
        branches = branch_of(n)
        if branches < 1:
            raise ValueError(f"第 {n} 个方块的分支数必须 >= 1，当前值: {branches}")
        horseshoe, _ = make_horseshoe(branches, squares.inner(n))
        parts.append((squares.square(n), horseshoe))
    # 各 f_n 支撑在 R_n 内部，Q_n 的公共边界上都是恒等
    return NestedSquaresMap(tuple(parts), levels=tuple(levels))


def appendix_a_map(m_max: int, branch_of: BranchSchedule | None = None) -> HomeoExpr:
    """
    在 Q_n（n <= m_max）上等于 f_n = A_n ∘ g_n ∘ A_n⁻¹、其余位置为恒等的同胚，
    g_n 为 R 上的 branch_of(n) 分支马蹄（默认 n 分支，h_top(g_n) = log n）。
    """
    if m_max < 1:
        raise ValueError(f"m_max 必须 >= 1，当前值: {m_max}")
    return _sewn_map(range(1, m_max + 1), branch_of or _default_branches)


def truncation_sequence(
    m: int, m_cap: int = TRUNCATION_CAP, branch_of: BranchSchedule | None = None
) -> HomeoExpr:
    """只保留 Q_m, …, Q_{m_cap} 上的 f_n；m > m_cap 时为恒等。m 增大时逼近恒等映射。"""
    if m < 1:
        raise ValueError(f"m 必须 >= 1，当前值: {m}")
    return _sewn_map(range(m, m_cap + 1), branch_of or _default_branches)


# ---------------------------------------------------------------------------
# 环形扭转
# ---------------------------------------------------------------------------


def annulus_twist(
    radii: Sequence[float],
    angles: Sequence[float],
    center: ArrayLike = (0.0, 0.0),
    domain: Region | None = None,
) -> HomeoExpr:
    """
    (r, θ) ↦ (r, θ + ω(r))，ω 在节点上分段线性、在环形区域两端为 0。
    每个半径上都是圆周旋转，因此每条轨道都回归。

    Raises:
        DomainError: 扭转支撑圆盘超出 domain
    """
    m = twist(center, radii, angles)
    if domain is not None and m is not IDENTITY:
        disk = m.support
        cloud = disk.boundary_cloud(disk.radius * 1e-2)
        if not np.all(domain.contains(cloud)):
            raise DomainError(f"扭转支撑 {disk} 超出定义域 {domain}")
    return m


def constant_twist(angle: float, center: ArrayLike = (0.0, 0.0)) -> HomeoExpr:
    """在 [0.2, 0.8] 上旋转 angle 的环形扭转"""
    return annulus_twist(ANNULUS, (0.0, angle, angle, 0.0), center)


def golden_twist(center: ArrayLike = (0.0, 0.0)) -> HomeoExpr:
    """旋转数为黄金分割 (√5 − 1)/2 的扭转；回归时间为 Fibonacci 数"""
    return constant_twist(2.0 * math.pi * (GOLDEN_RATIO - 1.0), center)


def rational_twist(p: int, q: int, center: ArrayLike = (0.0, 0.0)) -> HomeoExpr:
    """旋转数 p/q 的扭转：常数区内每个点的周期都是 q / gcd(p, q)"""
    if q < 1:
        raise ValueError(f"q 必须 >= 1，当前值: {q}")
    return constant_twist(2.0 * math.pi * p / q, center)


# ---------------------------------------------------------------------------
# 连续模实验
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModulusProfile:
    """
    比值 |f(z) − f(w)| / (t·(log 1/t)^p)，t = |z − w| ∈ [1e-6, δ] 的按十进位最大值。
    drift 见 modulus_drift；constant 为全部十进位的最大值。
    """

    p: float
    delta: float
    constant: float
    histogram: dict[int, float]
    drift: float
    pairs: int
    seed: int = DEFAULT_SEED
    limit: float = MODULUS_DRIFT_LIMIT

    @property
    def passed(self) -> bool:
        return math.isfinite(self.constant) and self.drift < self.limit

    def __bool__(self) -> bool:
        return self.passed

    def rows(self) -> list[dict[str, Any]]:
        return [{"decade": d, "max_ratio": v} for d, v in sorted(self.histogram.items())]

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "delta": self.delta,
            "constant": self.constant,
            "histogram": {str(d): v for d, v in sorted(self.histogram.items())},
            "drift": self.drift,
            "pairs": self.pairs,
            "seed": self.seed,
            "limit": self.limit,
            "passed": self.passed,
        }


def modulus_drift(histogram: dict[int, float]) -> float:
    """
    尺度最小的 ⌈D/2⌉ 个十进位内（D 为十进位总数，与熵拟合的窗口取法相同），
    向小尺度方向相邻十进位最大比值的最大相对涨幅；没有涨幅时为 0
    """
    decades = sorted(histogram, reverse=True)
    tail = decades[len(decades) // 2 :]
    drift = 0.0
    for big, small in zip(tail, tail[1:], strict=False):
        base = histogram[big]
        if base > 0:
            drift = max(drift, (histogram[small] - base) / base)
    return drift


def modulus_profile(
    f: HomeoExpr,
    p: float,
    pairs: int = 100_000,
    seed: int = DEFAULT_SEED,
    m_max: int = 4,
    workers: int | None = None,
) -> ModulusProfile:
    """
    在 ∪_{n<=m_max} Q_n 中采样点对：z 在随机选取的 Q_n 中均匀分布，
    w = z + t·(cos θ, sin θ)，t ∈ [1e-6, δ]，δ = min(1/16, e^{-p})。

    每个十进位用同一批 (z, θ, 尾数 u)，t = 10^{d+u}（最高的十进位截在 δ），
    于是各十进位的最大值只随 t 变化。
    """
    if not p > 0:
        raise ValueError(f"p 必须为正数，当前值: {p}")
    if pairs < 1:
        raise ValueError(f"点对数量必须为正，当前值: {pairs}")
    delta = min(1.0 / 16.0, math.exp(-p))
    top = math.log10(delta)
    decades = list(range(-6, math.ceil(top)))
    if not decades:
        raise ValueError(f"δ = {delta:g} 小于 1e-6，没有可采样的尺度")
    per = max(1, pairs // len(decades))

    rng = np.random.default_rng(seed)
    levels = rng.integers(1, m_max + 1, size=per)
    lo = 2.0 ** -levels.astype(np.float64)
    z = lo[:, np.newaxis] * (1.0 + rng.uniform(0.0, 1.0, size=(per, 2)))
    u = rng.uniform(0.0, 1.0, size=per)
    theta = rng.uniform(0.0, 2.0 * math.pi, size=per)
    direction = np.column_stack([np.cos(theta), np.sin(theta)])

    fz = map_points(f.forward, z, workers=workers)
    histogram: dict[int, float] = {}
    for d in decades:
        t = 10.0 ** (d + u * min(1.0, top - d))
        fw = map_points(f.forward, z + t[:, np.newaxis] * direction, workers=workers)
        ratio = np.linalg.norm(fz - fw, axis=1) / (t * np.log(1.0 / t) ** p)
        histogram[d] = float(ratio.max())
    profile = ModulusProfile(
        p=p,
        delta=delta,
        constant=max(histogram.values()),
        histogram=histogram,
        drift=modulus_drift(histogram),
        pairs=per * len(decades),
        seed=seed,
    )
    logger.info(
        f"连续模 p={p}: C = {profile.constant:.4f}，十进位涨幅 {profile.drift:.2%}"
    )
    return profile


# ---------------------------------------------------------------------------
# 分方块熵
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerSquareEntropy:
    """每个方块上 h_top(f_n) 的估计与它们的最大值"""

    m_max: int
    per_square: dict[int, EntropyEstimate] = field(default_factory=dict)

    @property
    def value(self) -> float:
        return max(est.headline for est in self.per_square.values())

    def to_dict(self) -> dict[str, Any]:
        return {
            "m_max": self.m_max,
            "value": self.value,
            "per_square": {str(n): est.to_dict() for n, est in self.per_square.items()},
        }


def appendix_entropy(
    m_max: int,
    n_range: Sequence[int] = DEFAULT_N_RANGE,
    eps_list: Sequence[float] = DEFAULT_EPS,
    resolution: int = 128,
    seed: int = DEFAULT_SEED,
    branch_of: BranchSchedule | None = None,
    workers: int | None = None,
    progress: bool = False,
) -> PerSquareEntropy:
    """
    逐方块估计：点云是 R_n 中马蹄核心上的斜格点云，ε 按 R_n 的边长 2^{-n}/3 缩放
    （单位方块上的马蹄对应边长 1）。A_n 是相似变换，因此这等于 g_n 的估计；
    逃逸按离开 Q_n 计，整体的值取 n <= m_max 的最大值。
    """
    branch_of = branch_of or _default_branches
    f = appendix_a_map(m_max, branch_of)
    squares = NestedSquares(m_max)
    out: dict[int, EntropyEstimate] = {}
    for n in range(1, m_max + 1):
        _, spec = make_horseshoe(branch_of(n), squares.inner(n))
        scale = 2.0**-n / 3.0
        out[n] = entropy_estimate(
            f,
            n_range=tuple(n_range),
            eps_list=tuple(e * scale for e in eps_list),
            cloud=spec.core_cloud(resolution),
            seed=seed,
            domain=squares.square(n),
            workers=workers,
            progress=progress,
        )
        logger.info(f"Q_{n}: 熵估计 {out[n].headline:.4f}（log {n} = {math.log(n):.4f}）")
    return PerSquareEntropy(m_max, out)
