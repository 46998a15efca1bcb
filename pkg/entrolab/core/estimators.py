#!/usr/bin/env python3
"""
映射的数值度量

Hölder / Lipschitz 半范数、连续模、Sobolev 能量与距离、畸变、Jacobian，
以及若干解析不等式的采样检验。

采样得到的半范数是真实值的下界，因此所有不等式都以“测得左端 <= 右端 + 松弛量”检验：
报告的违例一定是真违例。所有归约（max / 求和）按固定分块顺序进行，结果与 worker 数无关。
"""

from __future__ import annotations

import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any, Literal

import numpy as np
from numpy.typing import ArrayLike

from entrolab.config import (
    DEFAULT_SEED,
    INEQUALITY_SLACK,
    PAIR_CHUNK,
    POINT_CHUNK,
    TOL_CONFORMAL,
)
from entrolab.core.errors import DomainError
from entrolab.core.geometry import (
    Array,
    Ball,
    Box,
    Region,
    RegionSet,
    as_point,
    cloud_diameter,
    well_positioned_ratio,
)
from entrolab.core.homeo import HomeoExpr, Piecewise
from entrolab.logger import get_logger
from entrolab.utils.parallel import chunked_map, map_points

logger = get_logger(__name__)

Alpha = float | Literal["Lip"]
ValuesFn = Callable[[Array], Array]
LabelsFn = Callable[[Array], Array]


def _alpha_value(alpha: Alpha) -> float:
    """'Lip' 即 α = 1；α = 0 为振幅（不除以距离）"""
    if alpha == "Lip":
        return 1.0
    a = float(alpha)
    if not 0.0 <= a <= 1.0:
        raise ValueError(f"Hölder 指数必须位于 [0, 1] 或为 'Lip'，当前值: {alpha}")
    return a


# ---------------------------------------------------------------------------
# 采样计划
# ---------------------------------------------------------------------------


def grid_cells(domain: Box, h: float) -> tuple[Array, float]:
    """步长约为 h 的网格单元中心及单元面积（中点公式）"""
    if not h > 0:
        raise ValueError(f"网格步长必须为正数，当前值: {h}")
    (x0, y0), (x1, y1) = domain.lo, domain.hi
    nx = max(1, round((x1 - x0) / h))
    ny = max(1, round((y1 - y0) / h))
    hx, hy = (x1 - x0) / nx, (y1 - y0) / ny
    xs = x0 + hx * (np.arange(nx) + 0.5)
    ys = y0 + hy * (np.arange(ny) + 0.5)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return np.column_stack([gx.ravel(), gy.ravel()]), hx * hy


@dataclass(frozen=True)
class SamplingPlan:
    """
    确定性的采样计划:
      - grid: 区域上 resolution × resolution 的网格（含端点），取全部点对；
      - pairs: count 个随机点对（一半均匀、一半按对数均匀尺度的近邻对），由 seed 决定；
      - refined: 在 base 的基础上围绕最大点对做 rounds 轮放大采样。
    """

    kind: Literal["grid", "pairs", "refined"]
    domain: Box = field(default_factory=Box.unit)
    resolution: int = 33
    count: int = 20_000
    seed: int = DEFAULT_SEED
    base: SamplingPlan | None = None
    rounds: int = 2
    zoom_count: int = 2048

    def __post_init__(self) -> None:
        if self.kind not in ("grid", "pairs", "refined"):
            raise ValueError(f"未知的采样计划类型: {self.kind}")
        if self.kind == "refined" and self.base is None:
            raise ValueError("refined 计划需要 base 计划")
        if self.kind == "grid" and self.resolution < 2:
            raise ValueError(f"网格分辨率至少为 2，当前值: {self.resolution}")
        if self.kind == "pairs" and self.count < 1:
            raise ValueError(f"点对数量必须为正，当前值: {self.count}")

    @classmethod
    def grid(cls, domain: Box | None = None, resolution: int = 33) -> SamplingPlan:
        return cls("grid", domain or Box.unit(), resolution=resolution)

    @classmethod
    def pairs(
        cls, domain: Box | None = None, count: int = 20_000, seed: int = DEFAULT_SEED
    ) -> SamplingPlan:
        return cls("pairs", domain or Box.unit(), count=count, seed=seed)

    @classmethod
    def refined(cls, base: SamplingPlan, rounds: int = 2, zoom_count: int = 2048) -> SamplingPlan:
        return cls(
            "refined", base.domain, seed=base.seed, base=base, rounds=rounds, zoom_count=zoom_count
        )

    @property
    def root(self) -> SamplingPlan:
        plan = self
        while plan.base is not None:
            plan = plan.base
        return plan

    def points(self) -> Array:
        """计划的全部采样点"""
        root = self.root
        if root.kind == "grid":
            (x0, y0), (x1, y1) = root.domain.lo, root.domain.hi
            xs = np.linspace(x0, x1, root.resolution)
            ys = np.linspace(y0, y1, root.resolution)
            gx, gy = np.meshgrid(xs, ys, indexing="ij")
            return np.column_stack([gx.ravel(), gy.ravel()])
        p, q = root._random_pairs()
        return np.vstack([p, q])

    def pair_indices(self) -> tuple[Array, Array, Array]:
        """(点, 左端下标, 右端下标)"""
        root = self.root
        pts = self.points()
        if root.kind == "grid":
            i, j = np.triu_indices(len(pts), k=1)
            return pts, i, j
        k = root.count
        return pts, np.arange(k), np.arange(k, 2 * k)

    def _random_pairs(self) -> tuple[Array, Array]:
        rng = np.random.default_rng(self.seed)
        lo, hi = np.asarray(self.domain.lo), np.asarray(self.domain.hi)
        n_uniform = self.count // 2
        n_local = self.count - n_uniform
        p_uni = rng.uniform(lo, hi, size=(n_uniform, 2))
        q_uni = rng.uniform(lo, hi, size=(n_uniform, 2))
        diam = self.domain.diameter
        z = rng.uniform(lo, hi, size=(n_local, 2))
        t = 10.0 ** rng.uniform(math.log10(1e-6 * diam), math.log10(diam / 4.0), size=n_local)
        theta = rng.uniform(0.0, 2.0 * math.pi, size=n_local)
        w = np.clip(z + t[:, np.newaxis] * np.column_stack([np.cos(theta), np.sin(theta)]), lo, hi)
        return np.vstack([p_uni, z]), np.vstack([q_uni, w])

    def cells(self, h: float) -> tuple[Array, float]:
        return grid_cells(self.domain, h)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"kind": self.kind, "domain": self.domain.to_dict()}
        if self.kind == "grid":
            out["resolution"] = self.resolution
        elif self.kind == "pairs":
            out.update(count=self.count, seed=self.seed)
        else:
            out.update(base=self.base.to_dict(), rounds=self.rounds, zoom_count=self.zoom_count)
        return out


# ---------------------------------------------------------------------------
# 点对差商
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SeminormReport:
    """采样半范数：value 是所有采样差商的最大值，pair 复现该值"""

    alpha: Alpha
    value: float
    pair: tuple[tuple[float, float], tuple[float, float]] | None
    pair_count: int
    histogram: dict[int, float]
    skipped: int = 0

    def rows(self) -> list[dict[str, Any]]:
        """按尺度（log10 |x−y| 的整数部分）一行"""
        return [
            {"decade": d, "max_quotient": q} for d, q in sorted(self.histogram.items())
        ]

    def to_dict(self) -> dict[str, Any]:
        return {
            "alpha": self.alpha,
            "value": self.value,
            "pair": [list(p) for p in self.pair] if self.pair is not None else None,
            "pair_count": self.pair_count,
            "histogram": {str(k): v for k, v in sorted(self.histogram.items())},
            "skipped": self.skipped,
        }


@dataclass
class _PairMax:
    value: float = 0.0
    index: int = -1
    count: int = 0
    skipped: int = 0
    histogram: dict[int, float] = field(default_factory=dict)

    def merge(self, other: _PairMax, offset: int = 0) -> None:
        # 严格大于：并列时保留最早的点对
        if other.index >= 0 and (self.index < 0 or other.value > self.value):
            self.value = other.value
            self.index = other.index + offset
        self.count += other.count
        self.skipped += other.skipped
        for decade, q in other.histogram.items():
            if q > self.histogram.get(decade, -math.inf):
                self.histogram[decade] = q


def _scan_pairs(
    xp: Array, xq: Array, vp: Array, vq: Array, alpha: float, workers: int | None
) -> _PairMax:
    """逐块求 |v(x)−v(y)| / |x−y|^α 的最大值与按尺度的直方图"""

    def chunk(start: int, stop: int) -> _PairMax:
        den = np.linalg.norm(xp[start:stop] - xq[start:stop], axis=1)
        num = np.linalg.norm(vp[start:stop] - vq[start:stop], axis=1)
        valid = den > 0.0
        out = _PairMax(count=int(valid.sum()), skipped=int((~valid).sum()))
        if not np.any(valid):
            return out
        quot = np.full(len(den), -np.inf)
        quot[valid] = num[valid] / den[valid] ** alpha
        idx = int(np.argmax(quot))
        out.value, out.index = float(quot[idx]), start + idx
        decades = np.floor(np.log10(den[valid])).astype(int)
        qv = quot[valid]
        for d in np.unique(decades):
            out.histogram[int(d)] = float(qv[decades == d].max())
        return out

    total = _PairMax()
    for part in chunked_map(chunk, len(xp), PAIR_CHUNK * 64, workers):
        total.merge(part)
    return total


def _report(
    alpha: Alpha, acc: _PairMax, xp: Array, xq: Array
) -> SeminormReport:
    pair = None
    if acc.index >= 0:
        pair = (tuple(map(float, xp[acc.index])), tuple(map(float, xq[acc.index])))
    if acc.skipped:
        logger.warning(f"跳过 {acc.skipped} 个重合点对")
    return SeminormReport(
        alpha=alpha,
        value=acc.value,
        pair=pair,
        pair_count=acc.count,
        histogram=dict(acc.histogram),
        skipped=acc.skipped,
    )


def _zoom_pairs(
    pair: tuple[Array, Array], radius: float, domain: Box, count: int, seed: int
) -> tuple[Array, Array]:
    rng = np.random.default_rng(seed)
    lo, hi = np.asarray(domain.lo), np.asarray(domain.hi)

    def disk(center: Array) -> Array:
        r = radius * np.sqrt(rng.uniform(0.0, 1.0, count))
        theta = rng.uniform(0.0, 2.0 * math.pi, count)
        return np.clip(center + np.column_stack([r * np.cos(theta), r * np.sin(theta)]), lo, hi)

    return disk(pair[0]), disk(pair[1])


def sup_quotient(
    values_fn: ValuesFn,
    alpha: Alpha,
    plan: SamplingPlan,
    workers: int | None = None,
) -> SeminormReport:
    """
    计划上 |v(x)−v(y)| / |x−y|^α 的最大值，v 为任意向量值函数（映射或映射之差）。
    refined 计划在 base 的最大点对周围放大 rounds 轮，结果取全部候选的最大值。
    """
    a = _alpha_value(alpha)
    if plan.kind == "refined":
        base = sup_quotient(values_fn, alpha, plan.base, workers)
        acc = _PairMax(
            value=base.value,
            index=0 if base.pair is not None else -1,
            count=base.pair_count,
            skipped=base.skipped,
            histogram=dict(base.histogram),
        )
        best = base.pair
        for k in range(plan.rounds):
            if best is None:
                break
            x, y = np.asarray(best[0]), np.asarray(best[1])
            radius = float(np.linalg.norm(x - y)) / 4.0 ** (k + 1)
            if radius == 0.0:
                break
            xp, xq = _zoom_pairs((x, y), radius, plan.domain, plan.zoom_count, plan.seed + k + 1)
            vp = map_points(values_fn, xp, POINT_CHUNK, workers)
            vq = map_points(values_fn, xq, POINT_CHUNK, workers)
            part = _scan_pairs(xp, xq, vp, vq, a, workers)
            if part.index >= 0 and part.value > acc.value:
                best = (tuple(map(float, xp[part.index])), tuple(map(float, xq[part.index])))
            acc.merge(part)
        return SeminormReport(
            alpha=alpha,
            value=acc.value,
            pair=best,
            pair_count=acc.count,
            histogram=acc.histogram,
            skipped=acc.skipped,
        )

    pts, i, j = plan.pair_indices()
    if len(pts) < 2:
        raise ValueError("采样计划至少需要 2 个点")
    values = map_points(values_fn, pts, POINT_CHUNK, workers)
    acc = _scan_pairs(pts[i], pts[j], values[i], values[j], a, workers)
    return _report(alpha, acc, pts[i], pts[j])


def holder_seminorm(
    m: HomeoExpr, alpha: Alpha, plan: SamplingPlan, workers: int | None = None
) -> SeminormReport:
    """[m]_α：采样点对上 |m(x)−m(y)| / |x−y|^α 的最大值（α = 'Lip' 为 Lipschitz 常数）"""
    return sup_quotient(m.forward, alpha, plan, workers)


def holder_distance(
    f: HomeoExpr,
    g: HomeoExpr,
    alpha: Alpha,
    plan: SamplingPlan,
    workers: int | None = None,
) -> float:
    """‖f − g‖_{C^α} = sup|f − g| + [f − g]_α（采样）"""

    def diff(points: Array) -> Array:
        return f.forward(points) - g.forward(points)

    pts = plan.points()
    sup = float(np.linalg.norm(map_points(diff, pts, POINT_CHUNK, workers), axis=1).max())
    return sup + sup_quotient(diff, alpha, plan, workers).value


def bi_lipschitz_constant(m: HomeoExpr, plan: SamplingPlan, workers: int | None = None) -> float:
    """max([m]_Lip, [m⁻¹]_Lip)，逆映射在计划点的像上测量"""
    forward = holder_seminorm(m, "Lip", plan, workers).value
    pts, i, j = plan.root.pair_indices()
    img = map_points(m.forward, pts, POINT_CHUNK, workers)
    back = _scan_pairs(img[i], img[j], pts[i], pts[j], 1.0, workers).value
    return max(forward, back)


def little_holder_profile(
    m: HomeoExpr,
    alpha: Alpha,
    x: ArrayLike,
    radii: list[float],
    resolution: int = 41,
    domain: Region | None = None,
    workers: int | None = None,
) -> list[float]:
    """
    各半径 r 上的局部半范数 [m]_{α, B(x, r)}（网格与边界圆上的采样）。

    Raises:
        DomainError: 给定 domain 且某个球不在其中
    """
    a = _alpha_value(alpha)
    center = as_point(x)
    out = []
    for r in radii:
        if not r > 0:
            raise ValueError(f"半径必须为正数，当前值: {r}")
        ball = Ball(tuple(center), r)
        if domain is not None and np.any(domain.signed_distance(ball.boundary_cloud(r / 16)) > 0):
            raise DomainError(f"球 B({center}, {r}) 不在定义域内")
        box = Box.square(center, r)
        grid = SamplingPlan.grid(box, resolution).points()
        grid = grid[np.linalg.norm(grid - center, axis=1) <= r]
        theta = np.linspace(0.0, 2.0 * math.pi, 64, endpoint=False)
        rim = center + r * np.column_stack([np.cos(theta), np.sin(theta)])
        pts = np.vstack([grid, rim])
        i, j = np.triu_indices(len(pts), k=1)
        values = map_points(m.forward, pts, POINT_CHUNK, workers)
        out.append(_scan_pairs(pts[i], pts[j], values[i], values[j], a, workers).value)
    return out


# ---------------------------------------------------------------------------
# Jacobian 与能量
# ---------------------------------------------------------------------------


def piece_labels(m: HomeoExpr, points: Array) -> Array:
    """顶层分片映射的分片编号（区域外为 -1）；其他映射全部为 0"""
    labels = np.zeros(len(points), dtype=int)
    if isinstance(m, Piecewise):
        labels[:] = -1
        for idx, (region, _) in enumerate(m.parts):
            mask = region.contains(points) & (labels == -1)
            labels[mask] = idx
    return labels


def jacobians(
    fn: ValuesFn, points: Array, h: float, labels: LabelsFn | None = None
) -> Array:
    """
    有限差分 Jacobian，形状 (n, 2, 2)，J[:, i, j] = ∂fn_i/∂x_j。

    两侧邻点与中心同属一个分片时用中心差分，否则用与中心同片一侧的单侧差分。
    """
    points = np.asarray(points, dtype=np.float64)
    n = len(points)
    labels = labels or (lambda p: np.zeros(len(p), dtype=int))
    jac = np.empty((n, 2, 2))
    center_val = fn(points)
    center_lab = labels(points)
    for j in range(2):
        step = np.zeros(2)
        step[j] = h
        plus, minus = points + step, points - step
        f_plus, f_minus = fn(plus), fn(minus)
        lab_plus, lab_minus = labels(plus), labels(minus)
        central = (lab_plus == center_lab) & (lab_minus == center_lab)
        fwd = ~central & (lab_plus == center_lab)
        bwd = ~central & ~fwd
        col = np.empty((n, 2))
        col[central] = (f_plus[central] - f_minus[central]) / (2.0 * h)
        col[fwd] = (f_plus[fwd] - center_val[fwd]) / h
        col[bwd] = (center_val[bwd] - f_minus[bwd]) / h
        jac[:, :, j] = col
    if not np.all(np.isfinite(jac)):
        raise DomainError("差商出现非有限值")
    return jac


def map_jacobians(m: HomeoExpr, points: Array, h: float) -> Array:
    return jacobians(m.forward, points, h, lambda p: piece_labels(m, p))


def _cell_jacobians(
    fn: ValuesFn, labels: LabelsFn | None, domain: Box, h: float, workers: int | None
) -> tuple[Array, Array, float]:
    centers, area = grid_cells(domain, h)
    step = h / 2.0

    def chunk(start: int, stop: int) -> Array:
        return jacobians(fn, centers[start:stop], step, labels)

    parts = chunked_map(chunk, len(centers), POINT_CHUNK, workers)
    return centers, np.concatenate(parts), area


def _map_cells(
    m: HomeoExpr, domain: Box, h: float, workers: int | None
) -> tuple[Array, Array, float]:
    return _cell_jacobians(m.forward, lambda p: piece_labels(m, p), domain, h, workers)


def _integrate(values: Array, area: float) -> float:
    # 分块求和后用 fsum 合并，顺序固定
    starts = range(0, len(values), POINT_CHUNK)
    chunks = [float(np.sum(values[s : s + POINT_CHUNK])) for s in starts]
    return math.fsum(chunks) * area


def matrix_norm(jac: Array) -> Array:
    """|Df| = Σ_{i,j} |∂_j f_i|"""
    return np.abs(jac).sum(axis=(1, 2))


@dataclass(frozen=True)
class EnergyReport:
    """E_p = ∫|∇u|^p + |∇v|^p，Df_p = ∫|Df|^p，jacobian = ∫ det Df"""

    p: float
    h: float
    e_p: float
    df_p: float
    jacobian: float
    cells: int

    @property
    def c_p(self) -> float:
        return 2.0 ** (1.5 * self.p)

    def double_inequality_holds(self, slack: float = INEQUALITY_SLACK) -> bool:
        """E_p <= ∫|Df|^p <= 2^{3p/2} E_p"""
        return self.e_p <= self.df_p + slack and self.df_p <= self.c_p * self.e_p + slack

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "h": self.h,
            "E_p": self.e_p,
            "Df_p": self.df_p,
            "jacobian": self.jacobian,
            "cells": self.cells,
        }


def sobolev_energy(
    m: HomeoExpr,
    p: float,
    h: float,
    domain: Box | None = None,
    workers: int | None = None,
) -> EnergyReport:
    """中点公式下的 p-能量与 |Df|^p 积分"""
    if p < 1:
        raise ValueError(f"p 必须 >= 1，当前值: {p}")
    domain = domain or Box.unit()
    _, jac, area = _map_cells(m, domain, h, workers)
    grad = np.linalg.norm(jac, axis=2)
    e_p = _integrate(grad[:, 0] ** p + grad[:, 1] ** p, area)
    df_p = _integrate(matrix_norm(jac) ** p, area)
    det = np.linalg.det(jac)
    jacobian = _integrate(det, area)
    return EnergyReport(p=p, h=h, e_p=e_p, df_p=df_p, jacobian=jacobian, cells=len(jac))


def _w1p_difference(
    f: HomeoExpr, g: HomeoExpr, p: float, h: float, domain: Box, inverse: bool, workers: int | None
) -> float:
    """‖u‖_{L^p} + ‖Du‖_{L^p}，u = f − g（inverse 时为 f⁻¹ − g⁻¹）"""
    f_fn = f.backward if inverse else f.forward
    g_fn = g.backward if inverse else g.forward

    def diff(points: Array) -> Array:
        return f_fn(points) - g_fn(points)

    def labels(points: Array) -> Array:
        # 两个映射的分片编号配对
        return piece_labels(f, points) * 100_003 + piece_labels(g, points)

    centers, jac, area = _cell_jacobians(diff, labels, domain, h, workers)
    values = np.linalg.norm(map_points(diff, centers, POINT_CHUNK, workers), axis=1)
    lp = _integrate(values**p, area) ** (1.0 / p)
    dlp = _integrate(matrix_norm(jac) ** p, area) ** (1.0 / p)
    return lp + dlp


def sobolev_distance(
    f: HomeoExpr,
    g: HomeoExpr,
    p: float,
    p_star: float | None = None,
    h: float = 1.0 / 64,
    domain: Box | None = None,
    workers: int | None = None,
    inverse_domain: Box | None = None,
) -> float:
    """
    ρ(f, g) = ‖f − g‖_{W^{1,p}} + ‖f⁻¹ − g⁻¹‖_{W^{1,p*}}（默认 p* = p）。
    inverse_domain 为逆映射项的积分区域（默认与 domain 相同）。
    """
    if p < 1:
        raise ValueError(f"p 必须 >= 1，当前值: {p}")
    domain = domain or Box.unit()
    q = p if p_star is None else p_star
    forward = _w1p_difference(f, g, p, h, domain, False, workers)
    return forward + _w1p_difference(f, g, q, h, inverse_domain or domain, True, workers)


# ---------------------------------------------------------------------------
# 畸变与逐点不等式
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DistortionField:
    """每个单元的畸变 K = (|m_z| + |m_z̄|) / (|m_z| − |m_z̄|)，finite 为有限畸变标记"""

    centers: Array
    k: Array
    finite: Array
    tolerance: float = TOL_CONFORMAL

    @property
    def max_k(self) -> float:
        return float(self.k[self.finite].max()) if np.any(self.finite) else math.inf

    def __bool__(self) -> bool:
        return bool(np.all(self.finite))

    def to_dict(self) -> dict[str, Any]:
        return {
            "cells": len(self.k),
            "finite_cells": int(self.finite.sum()),
            "max_k": self.max_k if np.any(self.finite) else None,
            "mean_k": float(self.k[self.finite].mean()) if np.any(self.finite) else None,
            "tolerance": self.tolerance,
        }


def wirtinger(jac: Array) -> tuple[Array, Array]:
    """实 2×2 矩阵 [[a, b], [c, d]] 的 Wirtinger 导数 (f_z, f_z̄)"""
    a, b = jac[:, 0, 0], jac[:, 0, 1]
    c, d = jac[:, 1, 0], jac[:, 1, 1]
    f_z = ((a + d) + 1j * (c - b)) / 2.0
    f_zbar = ((a - d) + 1j * (c + b)) / 2.0
    return f_z, f_zbar


def distortion_field(
    m: HomeoExpr,
    h: float,
    domain: Box | None = None,
    tolerance: float = 1e-12,
    workers: int | None = None,
) -> DistortionField:
    domain = domain or Box.unit()
    centers, jac, _ = _map_cells(m, domain, h, workers)
    f_z, f_zbar = wirtinger(jac)
    num = np.abs(f_z) + np.abs(f_zbar)
    den = np.abs(f_z) - np.abs(f_zbar)
    finite = den > tolerance
    k = np.full(len(den), math.inf)
    k[finite] = num[finite] / den[finite]
    return DistortionField(centers=centers, k=k, finite=finite)


@dataclass(frozen=True)
class JacobianCheck:
    passed: bool
    worst_ratio: float
    cells: int

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "worst_ratio": self.worst_ratio, "cells": self.cells}


def jacobian_bound_check(
    m: HomeoExpr,
    h: float,
    d: int = 2,
    domain: Box | None = None,
    workers: int | None = None,
) -> JacobianCheck:
    """逐单元检验 |J_m| <= d!·|Dm|^d"""
    domain = domain or Box.unit()
    _, jac, _ = _map_cells(m, domain, h, workers)
    lhs = np.abs(np.linalg.det(jac))
    rhs = math.factorial(d) * matrix_norm(jac) ** d
    ratio = lhs / np.maximum(rhs, np.finfo(float).tiny)
    passed = bool(np.all(lhs <= rhs + INEQUALITY_SLACK))
    return JacobianCheck(passed=passed, worst_ratio=float(ratio.max()), cells=len(jac))


@dataclass(frozen=True)
class GvCheck:
    """|m(z)−m(w)|² <= 2π·∫_{2D}|Dm|² / log(e + diam D / |z−w|) 的最坏比值"""

    passed: bool
    worst_ratio: float
    energy: float
    pairs: int

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "worst_ratio": self.worst_ratio,
            "energy_2D": self.energy,
            "pairs": self.pairs,
        }


def gv_inequality_check(
    m: HomeoExpr,
    disk: Ball,
    pairs: int = 10_000,
    h: float | None = None,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> GvCheck:
    double = Ball(disk.center, 2.0 * disk.radius)
    h = h or double.diameter / 256.0
    lo, hi = double.bounds()
    centers, area = grid_cells(Box(tuple(lo), tuple(hi)), h)
    centers = centers[double.contains(centers)]
    jac = np.concatenate(
        chunked_map(
            lambda s, e: map_jacobians(m, centers[s:e], h / 2.0),
            len(centers),
            POINT_CHUNK,
            workers,
        )
    )
    energy = _integrate(matrix_norm(jac) ** 2, area)

    rng = np.random.default_rng(seed)
    c = np.asarray(disk.center)

    def in_disk(k: int) -> Array:
        r = disk.radius * np.sqrt(rng.uniform(0.0, 1.0, k))
        theta = rng.uniform(0.0, 2.0 * math.pi, k)
        return c + np.column_stack([r * np.cos(theta), r * np.sin(theta)])

    z, w = in_disk(pairs), in_disk(pairs)
    # 一条直径作为最大间距的点对
    z[0], w[0] = c - (disk.radius, 0.0), c + (disk.radius, 0.0)
    dist = np.linalg.norm(z - w, axis=1)
    keep = dist > 0.0
    lhs = np.sum((m.forward(z[keep]) - m.forward(w[keep])) ** 2, axis=1)
    rhs = 2.0 * math.pi * energy / np.log(math.e + disk.diameter / dist[keep])
    ratio = lhs / rhs
    passed = bool(np.all(lhs <= rhs + INEQUALITY_SLACK))
    return GvCheck(
        passed=passed, worst_ratio=float(ratio.max()), energy=energy, pairs=int(keep.sum())
    )


@dataclass(frozen=True)
class InverseEnergyCheck:
    """E₁(m⁻¹ on m(D)) <= 4·Area(D)^{1−1/p}·E_p(m on D)^{1/p}"""

    passed: bool
    lhs: float
    rhs: float

    @property
    def slack(self) -> float:
        return self.rhs - self.lhs

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "lhs": self.lhs, "rhs": self.rhs, "slack": self.slack}


def inverse_energy_check(
    m: HomeoExpr,
    region: Box,
    p: float,
    h: float = 1.0 / 64,
    tol: float = 0.0,
    workers: int | None = None,
) -> InverseEnergyCheck:
    """
    左端经换元在 D 上计算: ∫_D (|row₀ Dm⁻¹| + |row₁ Dm⁻¹|)·|det Dm| dx，
    其中 Dm⁻¹(m(x)) = (Dm(x))⁻¹。
    """
    if p < 1:
        raise ValueError(f"p 必须 >= 1，当前值: {p}")
    _, jac, area = _map_cells(m, region, h, workers)
    det = np.linalg.det(jac)
    if np.any(det == 0.0):
        raise DomainError("Jacobian 退化，映射在网格上不是微分同胚")
    inv = np.linalg.inv(jac)
    grad_inv = np.linalg.norm(inv, axis=2)
    lhs = _integrate((grad_inv[:, 0] + grad_inv[:, 1]) * np.abs(det), area)
    grad = np.linalg.norm(jac, axis=2)
    e_p = _integrate(grad[:, 0] ** p + grad[:, 1] ** p, area)
    rhs = 4.0 * region.area ** (1.0 - 1.0 / p) * e_p ** (1.0 / p)
    passed = lhs <= rhs * (1.0 + tol) + INEQUALITY_SLACK
    return InverseEnergyCheck(passed=bool(passed), lhs=lhs, rhs=rhs)


@dataclass(frozen=True)
class RescalingCheck:
    passed: bool
    lhs: float
    rhs: float
    factors: dict[str, float] = field(default_factory=dict)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {"passed": self.passed, "lhs": self.lhs, "rhs": self.rhs, "factors": self.factors}


def rescaling_bound_check(
    f: HomeoExpr,
    phi0: HomeoExpr,
    phi1: HomeoExpr,
    alpha: Alpha,
    beta: Alpha,
    plan: SamplingPlan,
    workers: int | None = None,
) -> RescalingCheck:
    """
    [φ1∘f∘φ0⁻¹]_α <= [φ1]_Lip·[f]_β·[φ0⁻¹]_Lip^β·diam(Ω0)^{β−α}，Ω0 = φ0(Ω)。
    所有因子都在同一组经搬运的点对上测量。
    """
    a, b = _alpha_value(alpha), _alpha_value(beta)
    if b < a:
        raise ValueError(f"需要 β >= α，当前: α={a}, β={b}")
    pts, i, j = plan.root.pair_indices()
    y = map_points(phi0.forward, pts, POINT_CHUNK, workers)
    fx = map_points(f.forward, pts, POINT_CHUNK, workers)
    conj = map_points(phi1.forward, fx, POINT_CHUNK, workers)

    lhs = _scan_pairs(y[i], y[j], conj[i], conj[j], a, workers).value
    lip1 = _scan_pairs(fx[i], fx[j], conj[i], conj[j], 1.0, workers).value
    f_beta = _scan_pairs(pts[i], pts[j], fx[i], fx[j], b, workers).value
    lip0_inv = _scan_pairs(y[i], y[j], pts[i], pts[j], 1.0, workers).value
    diam = cloud_diameter(y)
    rhs = lip1 * f_beta * lip0_inv**b * diam ** (b - a)
    return RescalingCheck(
        passed=bool(lhs <= rhs + INEQUALITY_SLACK),
        lhs=lhs,
        rhs=rhs,
        factors={"phi1_lip": lip1, "f_beta": f_beta, "phi0_inv_lip": lip0_inv, "diam": diam},
    )


@dataclass(frozen=True)
class GluingCheck:
    passed: bool
    k_emp: float
    bound: float
    kappa: float
    total: float
    per_piece: tuple[float, ...]

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "passed": self.passed,
            "K_emp": self.k_emp,
            "K_bound": self.bound,
            "kappa": self.kappa,
            "total": self.total,
            "per_piece": list(self.per_piece),
        }


def gluing_bound_check(
    glued: Piecewise,
    alpha: Alpha,
    plan: SamplingPlan,
    workers: int | None = None,
) -> GluingCheck:
    """
    [glued]_α <= K(α, κ)·max_i [glued]_{α, Ω_i}，K = 1 + 2κ^α；
    分片为各区域与其补集，单个区域时取 κ = 1。
    """
    if not isinstance(glued, Piecewise):
        raise ValueError("gluing_bound_check 需要 piecewise 构造的映射")
    a = _alpha_value(alpha)
    regions = tuple(r for r, _ in glued.parts)
    kappa = well_positioned_ratio(RegionSet(regions)) if len(regions) >= 2 else 1.0
    bound = 1.0 + 2.0 * kappa**a

    pts, i, j = plan.root.pair_indices()
    values = map_points(glued.forward, pts, POINT_CHUNK, workers)
    total = _scan_pairs(pts[i], pts[j], values[i], values[j], a, workers).value
    labels = piece_labels(glued, pts)
    per_piece = []
    for lab in np.unique(labels):
        same = (labels[i] == lab) & (labels[j] == lab)
        if np.any(same):
            ii, jj = i[same], j[same]
            piece = _scan_pairs(pts[ii], pts[jj], values[ii], values[jj], a, workers)
            per_piece.append(piece.value)
    max_piece = max(per_piece) if per_piece else 0.0
    k_emp = total / max_piece if max_piece > 0 else 1.0
    return GluingCheck(
        passed=bool(total <= bound * max_piece + INEQUALITY_SLACK),
        k_emp=k_emp,
        bound=bound,
        kappa=kappa,
        total=total,
        per_piece=tuple(per_piece),
    )
