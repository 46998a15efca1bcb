#!/usr/bin/env python3
"""
N 分支马蹄同胚的构造与“穿越”条件的采样验证

标准标架 [-1,1]² 中的构造 g_std = V ∘ S ∘ T:
  - T: 扭转，半径 0.72 以内整体旋转 −π/2，到半径 0.98 线性衰减为 0；
  - S: 纤维方向（竖直）的分段线性压缩，把核心的竖直范围压到 [−e, e]，
       横向用 λ(x) 与恒等映射混合，|x| = 1 处回到恒等；
  - V: 纤维方向的锯齿平移 y ↦ y + s(x)，s 有 N 条斜率 ±2A/δ 的“腿”，腿之间是窄的平台。
每条腿把核心的一条水平窄带纵向拉过整个核心；N 条窄带几乎铺满核心，
拉伸率 2A/δ 与 N 同阶。三个部件在方块外都是恒等映射。
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, ClassVar

import numpy as np

from entrolab.config import CERT_RESOLUTION
from entrolab.core.geometry import (
    Array,
    Box,
    Region,
    SolidCylinder,
    TopologicalCylinder,
    as_points,
    segment_distance,
)
from entrolab.core.homeo import Affine, HomeoExpr, Twist, cylinder_chart
from entrolab.logger import get_logger
from entrolab.utils.parallel import map_points

logger = get_logger(__name__)


# ---------------------------------------------------------------------------
# 标准标架中的构造常数
# ---------------------------------------------------------------------------

# 核心（目标圆柱）：横向半宽 CORE_LATERAL，轴向（竖直）半长 CORE_HALF
CORE_HALF = 0.5
CORE_LATERAL = 0.48

# 扭转：整体旋转半径与衰减外半径
TWIST_INNER = 0.72
TWIST_OUTER = 0.98
TWIST_ANGLE = -math.pi / 2

# 压缩：核心竖直范围压到 [−SQUEEZE, SQUEEZE]；|x| <= SQUEEZE_FLAT 时完全压缩
SQUEEZE = 0.02
SQUEEZE_FLAT = 0.55

# 锯齿：腿分布在 [−LEG_SPAN, LEG_SPAN]，平台宽为腿宽的 FLAT_RATIO 倍，振幅 AMPLITUDE；
# 平移窗口半宽 SHIFT_WINDOW。窄带的像横向落在 |x| <= LEG_SPAN < CORE_LATERAL 内
LEG_SPAN = 0.46
FLAT_RATIO = 0.05
AMPLITUDE = 0.57
SHIFT_WINDOW = 0.04

# 窄带端面被送到的高度（位于振幅与核心边缘之间）
STRIP_EXIT = (AMPLITUDE + CORE_HALF + SQUEEZE) / 2.0


def _fibre_pl(y: Array, knots_in: Array, knots_out: Array) -> Array:
    """
    逐点的分段线性映射：第 i 个点用第 i 行节点 knots_in[i] → knots_out[i]。
    节点外（|y| > 1）保持不变。
    """
    out = np.array(y, dtype=np.float64)
    for k in range(knots_in.shape[1] - 1):
        lo, hi = knots_in[:, k], knots_in[:, k + 1]
        mask = (y >= lo) & (y <= hi)
        if np.any(mask):
            t = (y[mask] - lo[mask]) / (hi[mask] - lo[mask])
            out[mask] = knots_out[mask, k] + t * (knots_out[mask, k + 1] - knots_out[mask, k])
    return out


@dataclass(frozen=True)
class StandardHorseshoe:
    """标准标架中 N 分支马蹄的三个部件"""

    n: int

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"分支数 N 必须 >= 1，当前值: {self.n}")

    # -- 几何参数 --------------------------------------------------------

    @property
    def leg_width(self) -> float:
        return 2.0 * LEG_SPAN / (self.n + (self.n - 1) * FLAT_RATIO)

    @property
    def stretch(self) -> float:
        """窄带沿轴向的拉伸率"""
        return 2.0 * AMPLITUDE / self.leg_width

    @property
    def shift_knots(self) -> tuple[Array, Array]:
        """锯齿 s(x) 的节点 (x_k, s_k)；相邻两条腿之间的平台上 s 为常数"""
        delta = self.leg_width
        pitch = delta * (1.0 + FLAT_RATIO)
        xs = [-1.0]
        vals = [0.0]
        for j in range(self.n):
            start = -LEG_SPAN + j * pitch
            sigma = (-1.0) ** j
            xs += [start, start + delta]
            vals += [-sigma * AMPLITUDE, sigma * AMPLITUDE]
        xs.append(1.0)
        vals.append(0.0)
        return np.asarray(xs), np.asarray(vals)

    def strip_bounds(self) -> list[tuple[float, float]]:
        """第 j 条窄带的竖直范围 [lo, hi]；两端恰好被送到高度 ±STRIP_EXIT"""
        xs, _ = self.shift_knots
        trim = self.leg_width * (AMPLITUDE - STRIP_EXIT) / (2.0 * AMPLITUDE)
        return [(xs[1 + 2 * j] + trim, xs[2 + 2 * j] - trim) for j in range(self.n)]

    def strips(self) -> list[SolidCylinder]:
        """窄带圆柱；奇数编号的腿方向相反，端面标记随之交换以保证 C⁻ 从底部离开"""
        out = []
        for j, (lo, hi) in enumerate(self.strip_bounds()):
            a, b = (0.0, lo), (0.0, hi)
            if j % 2 == 1:
                a, b = b, a
            out.append(SolidCylinder(a, b, CORE_LATERAL))
        return out

    @staticmethod
    def core() -> SolidCylinder:
        return SolidCylinder((0.0, -CORE_HALF), (0.0, CORE_HALF), CORE_LATERAL)

    # -- 部件 ------------------------------------------------------------

    @staticmethod
    def twist() -> Twist:
        return Twist((0.0, 0.0), (0.0, TWIST_INNER, TWIST_OUTER), (TWIST_ANGLE, TWIST_ANGLE, 0.0))

    @staticmethod
    def _squeeze_knots(x: Array) -> tuple[Array, Array]:
        lam = np.clip((1.0 - np.abs(x)) / (1.0 - SQUEEZE_FLAT), 0.0, 1.0)
        base = np.array([-1.0, -CORE_HALF, CORE_HALF, 1.0])
        target = np.array([-1.0, -SQUEEZE, SQUEEZE, 1.0])
        knots_in = np.broadcast_to(base, (len(x), 4))
        knots_out = (1.0 - lam)[:, np.newaxis] * base + lam[:, np.newaxis] * target
        return knots_in, knots_out

    def _shift_knots(self, x: Array) -> tuple[Array, Array]:
        xs, vals = self.shift_knots
        s = np.interp(x, xs, vals)
        base = np.array([-1.0, -SHIFT_WINDOW, SHIFT_WINDOW, 1.0])
        knots_in = np.broadcast_to(base, (len(x), 4))
        knots_out = np.column_stack(
            [np.full_like(s, -1.0), -SHIFT_WINDOW + s, SHIFT_WINDOW + s, np.ones_like(s)]
        )
        return knots_in, knots_out

    def forward(self, std: Array) -> Array:
        out = self.twist().forward(std)
        knots_in, knots_out = self._squeeze_knots(out[:, 0])
        out[:, 1] = _fibre_pl(out[:, 1], knots_in, knots_out)
        knots_in, knots_out = self._shift_knots(out[:, 0])
        out[:, 1] = _fibre_pl(out[:, 1], knots_in, knots_out)
        return out

    def backward(self, std: Array) -> Array:
        out = np.array(std, dtype=np.float64)
        knots_in, knots_out = self._shift_knots(out[:, 0])
        out[:, 1] = _fibre_pl(out[:, 1], knots_out, knots_in)
        knots_in, knots_out = self._squeeze_knots(out[:, 0])
        out[:, 1] = _fibre_pl(out[:, 1], knots_out, knots_in)
        return self.twist().backward(out)

    # -- Lipschitz 上界 ----------------------------------------------------

    def _shift_derivative_bounds(self) -> tuple[float, float, float]:
        """V 的 (|∂y/∂x| 上界, ∂y/∂y 上界, ∂y/∂y 下界)"""
        slope = self.stretch
        lo = (1.0 - SHIFT_WINDOW - AMPLITUDE) / (1.0 - SHIFT_WINDOW)
        hi = (1.0 - SHIFT_WINDOW + AMPLITUDE) / (1.0 - SHIFT_WINDOW)
        return slope, max(hi, 1.0), min(lo, 1.0)

    @staticmethod
    def _squeeze_derivative_bounds() -> tuple[float, float, float]:
        """S 的 (|∂y/∂x| 上界, ∂y/∂y 上界, ∂y/∂y 下界)"""
        cross = (CORE_HALF - SQUEEZE) / (1.0 - SQUEEZE_FLAT)
        outer = (1.0 - SQUEEZE) / (1.0 - CORE_HALF)
        inner = SQUEEZE / CORE_HALF
        return cross, max(outer, 1.0), inner

    def lipschitz_bound(self) -> float:
        """各部件微分（下三角 [[1,0],[a,b]]）Frobenius 范数之积"""
        total = self.twist().lipschitz_bound
        for a, b_hi, _ in (self._squeeze_derivative_bounds(), self._shift_derivative_bounds()):
            total *= math.sqrt(1.0 + a**2 + b_hi**2)
        return total

    def inverse_lipschitz_bound(self) -> float:
        # 逆的微分为 [[1,0],[−a/b, 1/b]]
        total = self.twist().lipschitz_bound
        for a, _, b_lo in (self._squeeze_derivative_bounds(), self._shift_derivative_bounds()):
            total *= math.sqrt(1.0 + (a / b_lo) ** 2 + (1.0 / b_lo) ** 2)
        return total


# ---------------------------------------------------------------------------
# 马蹄节点
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Horseshoe(HomeoExpr):
    """标准马蹄经仿射标架 frame 共轭: frame ∘ g_std ∘ frame⁻¹，标架像之外为恒等"""

    kind: ClassVar[str] = "horseshoe"

    n: int
    frame: Affine

    def __post_init__(self) -> None:
        object.__setattr__(self, "_std", StandardHorseshoe(self.n))
        m = self.frame.m
        if abs(float(m[:, 0] @ m[:, 1])) > 1e-12 * float(np.abs(m).max()) ** 2:
            raise ValueError("马蹄标架的两列必须正交")

    @property
    def standard(self) -> StandardHorseshoe:
        return self._std

    def _apply(self, points: Array, inverse: bool) -> Array:
        pts = as_points(points)
        std = self.frame.backward(pts)
        inside = np.max(np.abs(std), axis=1) <= 1.0
        out = np.array(pts, dtype=np.float64)
        if np.any(inside):
            moved = self._std.backward(std[inside]) if inverse else self._std.forward(std[inside])
            out[inside] = self.frame.forward(moved)
        return out

    def forward(self, points: Array) -> Array:
        return self._apply(points, inverse=False)

    def backward(self, points: Array) -> Array:
        return self._apply(points, inverse=True)

    @property
    def support(self) -> Region:
        m = self.frame.m
        bottom = self.frame.forward(np.array([[0.0, -1.0]]))[0]
        top = self.frame.forward(np.array([[0.0, 1.0]]))[0]
        return SolidCylinder(tuple(bottom), tuple(top), float(np.linalg.norm(m[:, 0])))

    @property
    def lipschitz_bound(self) -> float:
        return self.frame.lipschitz_bound * self.frame.inverse_lipschitz_bound * (
            self._std.lipschitz_bound()
        )

    @property
    def inverse_lipschitz_bound(self) -> float:
        return self.frame.lipschitz_bound * self.frame.inverse_lipschitz_bound * (
            self._std.inverse_lipschitz_bound()
        )

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "n": self.n, "frame": self.frame.to_dict()}


@dataclass(frozen=True)
class HorseshoeSpec:
    """马蹄的几何记录：支撑方块、核心圆柱与 N 条互不相交的窄带"""

    n: int
    frame: Affine
    core: SolidCylinder
    strips: tuple[SolidCylinder, ...]
    square: Box | None = None

    def core_cloud(self, resolution: int = 128) -> Array:
        """
        核心上 resolution × resolution 的斜格点云。

        第 i 列的轴向坐标整体平移 i/resolution 个格距，于是全部点的轴向坐标两两不同、
        间距为格距的 1/resolution；轴向正是窄带被拉伸的方向。
        """
        if resolution < 2:
            raise ValueError(f"网格分辨率至少为 2，当前值: {resolution}")
        i, j = np.meshgrid(np.arange(resolution), np.arange(resolution), indexing="ij")
        u = CORE_LATERAL * (2.0 * i / (resolution - 1) - 1.0)
        v = CORE_HALF * (2.0 * (j + i / resolution) / resolution - 1.0)
        return self.frame.forward(np.column_stack([u.ravel(), v.ravel()]))

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "frame": self.frame.to_dict(),
            "core": self.core.to_dict(),
            "strips": [s.to_dict() for s in self.strips],
            "square": self.square.to_dict() if self.square is not None else None,
        }


def _world_cylinder(frame: Affine, cyl: SolidCylinder, lateral_scale: float) -> SolidCylinder:
    ends = frame.forward(np.array([cyl.a, cyl.b]))
    return SolidCylinder(tuple(ends[0]), tuple(ends[1]), cyl.rho * lateral_scale)


def _spec_for(n: int, frame: Affine, square: Box | None) -> tuple[Horseshoe, HorseshoeSpec]:
    std = StandardHorseshoe(n)
    lateral_scale = float(np.linalg.norm(frame.m[:, 0]))
    spec = HorseshoeSpec(
        n=n,
        frame=frame,
        core=_world_cylinder(frame, std.core(), lateral_scale),
        strips=tuple(_world_cylinder(frame, s, lateral_scale) for s in std.strips()),
        square=square,
    )
    logger.debug(f"构造 {n} 分支马蹄，核心 {spec.core}")
    return Horseshoe(n, frame), spec


def make_horseshoe(n: int, square: Box) -> tuple[Horseshoe, HorseshoeSpec]:
    """支撑在方块 square 内的 N 分支马蹄"""
    if n < 1:
        raise ValueError(f"分支数 N 必须 >= 1，当前值: {n}")
    frame = Affine.from_arrays(np.diag(square.half), square.center)
    return _spec_for(n, frame, square)


def horseshoe_on_cylinder(n: int, c: SolidCylinder) -> tuple[Horseshoe, HorseshoeSpec]:
    """核心恰为刚性圆柱 c 的 N 分支马蹄（c 的标记端面即核心的 C^±）"""
    if n < 1:
        raise ValueError(f"分支数 N 必须 >= 1，当前值: {n}")
    matrix = np.column_stack(
        [c.normal * (c.rho / CORE_LATERAL), c.axis * (c.length / (2.0 * CORE_HALF))]
    )
    return _spec_for(n, Affine.from_arrays(matrix, c.center), None)


def spec_of(h: Horseshoe) -> HorseshoeSpec:
    """从马蹄节点（例如 JSON 还原的节点）重建几何记录"""
    return _spec_for(h.n, h.frame, None)[1]


# ---------------------------------------------------------------------------
# 穿越证书
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CrossingCertificate:
    """
    四个穿越条件在分辨率 h 下的采样结果:
      (1) 像与目标内部相交；(2) 像避开目标侧面；
      (3) 标记端面的像避开目标闭包；(4) C⁻ / C⁺ 的像分别位于目标轴向的负端 / 正端之外。
    margin 为观察到的最小间隙，通过 ⇔ 四个条件都成立且 margin > 0。
    """

    conditions: tuple[bool, bool, bool, bool]
    resolution: float
    margin: float
    samples: int = 0

    @property
    def passed(self) -> bool:
        return all(self.conditions) and self.margin > 0.0

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "conditions": list(self.conditions),
            "resolution": self.resolution,
            "margin": self.margin,
            "samples": self.samples,
            "passed": self.passed,
        }


def as_topological(c: SolidCylinder | TopologicalCylinder) -> TopologicalCylinder:
    if isinstance(c, TopologicalCylinder):
        return c
    return TopologicalCylinder(cylinder_chart(c))


def _lateral_distance(target: SolidCylinder, points: Array) -> Array:
    """到目标两条侧边（v = ±ρ, |u| <= len/2）的距离"""
    matrix, center = target.frame()
    dists = []
    for side in (-1.0, 1.0):
        a = center + matrix @ np.array([side, -1.0])
        b = center + matrix @ np.array([side, 1.0])
        dists.append(segment_distance(points, a, b))
    return np.minimum(*dists)


def _adaptive_count(sample: Any, h: float, base: int = 256, cap: int = 1 << 18) -> int:
    """每边采样数：使像上相邻采样点间距不超过 h"""
    n = base
    while n < cap:
        pts = sample(n)
        gap = float(np.max(np.linalg.norm(np.diff(pts, axis=0), axis=1)))
        if gap <= h:
            break
        n = min(cap, max(2 * n, math.ceil(n * gap / h) + 1))
    return n


def check_crossing(
    m: HomeoExpr,
    c: SolidCylinder | TopologicalCylinder,
    target: SolidCylinder,
    resolution: float = CERT_RESOLUTION,
    workers: int | None = None,
) -> CrossingCertificate:
    """
    在分辨率 h = resolution·diam(target) 下验证 m 把 c “穿越” target。

    条件 (4) 在目标的拉直坐标中检查：C^± 像的轴向坐标必须越过对应端面至少 h，
    且中轴的像首次进入目标之前、最后离开目标之后分别位于负端与正端。
    """
    if not resolution > 0:
        raise ValueError(f"分辨率必须为正数，当前值: {resolution}")
    if target.rho >= target.length / 2.0:
        raise ValueError(
            f"目标圆柱退化: rho={target.rho} >= len/2={target.length / 2.0}，标记端面无法区分"
        )
    src = as_topological(c)
    h = resolution * target.diameter
    half_len = target.length / 2.0

    def image(std_points: Array) -> Array:
        return map_points(m.forward, src.chart.forward(std_points), workers=workers)

    def side(fixed: int, value: float, n: int) -> Array:
        t = np.linspace(-1.0, 1.0, n)
        std = np.empty((n, 2))
        std[:, fixed] = value
        std[:, 1 - fixed] = t
        return std

    # 条件 (1): 中轴的像进入目标内部
    n_axis = _adaptive_count(lambda n: image(side(0, 0.0, n)), h)
    trace = image(side(0, 0.0, n_axis))
    trace_sd = target.signed_distance(trace)
    inside = np.flatnonzero(trace_sd < 0.0)
    cond1 = inside.size > 0
    depth = float(-trace_sd.min()) if cond1 else 0.0

    # 条件 (2): 目标侧面的原像不在 c 内；c 边界的像与侧面保持正距离
    matrix, center = target.frame()
    n_side = math.ceil(target.length / h) + 1
    t = np.linspace(-1.0, 1.0, n_side)[:, np.newaxis]
    lateral = np.vstack([center + t * matrix[:, 1] + sign * matrix[:, 0] for sign in (-1.0, 1.0)])
    pre = src.chart.backward(map_points(m.backward, lateral, workers=workers))
    lateral_hits = np.max(np.abs(pre), axis=1) <= 1.0
    n_bnd = max(
        _adaptive_count(lambda n, s=s, f=f: image(side(f, s, n)), h)
        for f in (0, 1)
        for s in (-1.0, 1.0)
    )
    boundary_img = np.vstack([image(side(f, s, n_bnd)) for f in (0, 1) for s in (-1.0, 1.0)])
    lateral_clearance = float(_lateral_distance(target, boundary_img).min())
    cond2 = not np.any(lateral_hits) and lateral_clearance > 0.0

    # 条件 (3): 标记端面的像在目标闭包之外
    face_minus = image(side(1, -1.0, n_bnd))
    face_plus = image(side(1, 1.0, n_bnd))
    face_clearance = float(
        min(target.signed_distance(face_minus).min(), target.signed_distance(face_plus).min())
    )
    cond3 = face_clearance > 0.0

    # 条件 (4): 轴向分量
    u_minus = target.to_local(face_minus)[:, 1]
    u_plus = target.to_local(face_plus)[:, 1]
    axial_clearance = float(min((-half_len - u_minus).min(), (u_plus - half_len).min()))
    cond4 = axial_clearance >= h
    if cond1 and cond4:
        u_trace = target.to_local(trace)[:, 1]
        first, last = inside[0], inside[-1]
        if first > 0 and u_trace[first - 1] >= 0.0:
            cond4 = False
        if last < len(trace) - 1 and u_trace[last + 1] <= 0.0:
            cond4 = False

    margin = min(depth, lateral_clearance, face_clearance, axial_clearance)
    cert = CrossingCertificate(
        conditions=(bool(cond1), bool(cond2), bool(cond3), bool(cond4)),
        resolution=h,
        margin=float(margin),
        samples=int(n_axis + len(lateral) + 4 * n_bnd),
    )
    logger.debug(f"穿越证书: 条件={cert.conditions}, margin={cert.margin:.3e}, h={h:.3e}")
    return cert


def strip_certificates(
    m: HomeoExpr,
    spec: HorseshoeSpec,
    resolution: float = CERT_RESOLUTION,
    workers: int | None = None,
) -> list[CrossingCertificate]:
    """每条窄带相对核心的穿越证书"""
    return [check_crossing(m, strip, spec.core, resolution, workers) for strip in spec.strips]


def branch_certificate(
    m: HomeoExpr,
    spec: HorseshoeSpec,
    resolution: float = CERT_RESOLUTION,
    workers: int | None = None,
) -> tuple[bool, float | None]:
    """
    全部 N 条窄带都通过时返回 (True, log N)，即拓扑熵下界 h_top >= log N；否则 (False, None)。
    """
    certs = strip_certificates(m, spec, resolution, workers)
    passed = all(certs)
    if not passed:
        failed = [i for i, cert in enumerate(certs) if not cert]
        logger.info(f"马蹄分支证书未通过，失败窄带: {failed}")
        return False, None
    return True, math.log(spec.n)

