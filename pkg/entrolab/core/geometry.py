#!/usr/bin/env python3
"""
平面几何原语
点、开球、闭方块、细长邻域 E(p,q;r)、实心圆柱 C(a,b;ρ)（平面中为带标记端面的矩形）、
区域族的 Hausdorff 距离与 well-positioned 比值。

所有区域都是凸集：既有闭式的成员判定（signed_distance），也能离散为边界点云。
凸集之间的 Hausdorff 距离、直径与相交性都由边界决定，因此点云只取边界。
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from typing import TYPE_CHECKING, Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.spatial import ConvexHull, QhullError, cKDTree
from scipy.spatial.distance import pdist

from entrolab.config import GEOM_RESOLUTION
from entrolab.core.errors import PreconditionError

if TYPE_CHECKING:
    from entrolab.core.homeo import HomeoExpr

Array = NDArray[np.float64]


# ---------------------------------------------------------------------------
# 点
# ---------------------------------------------------------------------------


def as_points(x: ArrayLike) -> Array:
    """把单点或点列规范为 (n, 2) 的 float64 数组。"""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2 or arr.shape[1] != 2:
        raise ValueError(f"点的形状必须为 (2,) 或 (n, 2)，当前: {arr.shape}")
    return arr


def as_point(x: ArrayLike) -> Array:
    """单个平面点，坐标必须有限。"""
    arr = np.asarray(x, dtype=np.float64).reshape(-1)
    if arr.shape != (2,):
        raise ValueError(f"点必须有两个坐标，当前: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"点坐标必须有限: {arr}")
    return arr


def _pair(x: ArrayLike) -> tuple[float, float]:
    p = as_point(x)
    return (float(p[0]), float(p[1]))


def cross2(u: ArrayLike, v: ArrayLike) -> float:
    """平面向量的叉积（标量）"""
    return float(u[0] * v[1] - u[1] * v[0])


def segment_distance(points: ArrayLike, p: ArrayLike, q: ArrayLike) -> Array:
    """
    点到线段 [p, q] 的距离（正交投影的三种情形）。

    t <= 0 时最近点为 p，t >= 1 时为 q，否则为投影点 p + t(q - p)。
    """
    pts = as_points(points)
    p_ = np.asarray(p, dtype=np.float64)
    q_ = np.asarray(q, dtype=np.float64)
    d = q_ - p_
    length2 = float(d @ d)
    if length2 == 0.0:
        return np.linalg.norm(pts - p_, axis=1)
    t = ((pts - p_) @ d) / length2
    t = np.clip(t, 0.0, 1.0)
    nearest = p_ + t[:, np.newaxis] * d
    return np.linalg.norm(pts - nearest, axis=1)


def _arc(center: Array, radius: float, start: float, stop: float, h: float) -> Array:
    n = max(8, math.ceil(abs(stop - start) * radius / h))
    theta = np.linspace(start, stop, n, endpoint=False)
    return center + radius * np.column_stack([np.cos(theta), np.sin(theta)])


def _polyline(vertices: Array, h: float) -> Array:
    """闭合折线的等距采样（不含重复端点）。"""
    out = []
    for i in range(len(vertices)):
        v0 = vertices[i]
        v1 = vertices[(i + 1) % len(vertices)]
        n = max(2, math.ceil(float(np.linalg.norm(v1 - v0)) / h))
        t = np.linspace(0.0, 1.0, n, endpoint=False)[:, np.newaxis]
        out.append(v0 + t * (v1 - v0))
    return np.vstack(out)


# ---------------------------------------------------------------------------
# 区域
# ---------------------------------------------------------------------------


class Region(ABC):
    """凸区域。closed 决定边界点是否属于区域。"""

    kind: ClassVar[str]
    closed: ClassVar[bool]

    @abstractmethod
    def signed_distance(self, points: ArrayLike) -> Array:
        """区域内部为负、外部为正、边界上为零（方块/圆柱内部取到边界的负距离）。"""

    @abstractmethod
    def bounds(self) -> tuple[Array, Array]:
        """轴对齐包围盒 (lo, hi)。"""

    @abstractmethod
    def boundary_cloud(self, h: float) -> Array:
        """步长约为 h 的边界点云。"""

    @property
    @abstractmethod
    def diameter(self) -> float: ...

    @property
    @abstractmethod
    def area(self) -> float: ...

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        sd = self.signed_distance(points)
        return sd <= 0.0 if self.closed else sd < 0.0

    def interior_contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        return self.signed_distance(points) < 0.0

    def cloud(self, resolution: float = GEOM_RESOLUTION) -> Array:
        """相对分辨率 resolution（乘以直径）下的边界点云。"""
        return self.boundary_cloud(resolution * self.diameter)


@dataclass(frozen=True)
class Ball(Region):
    """开球 B(center, radius)"""

    kind: ClassVar[str] = "ball"
    closed: ClassVar[bool] = False

    center: tuple[float, float]
    radius: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", _pair(self.center))
        if not (math.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"球半径必须为正数，当前值: {self.radius}")

    def signed_distance(self, points: ArrayLike) -> Array:
        return np.linalg.norm(as_points(points) - np.asarray(self.center), axis=1) - self.radius

    def bounds(self) -> tuple[Array, Array]:
        c = np.asarray(self.center)
        return c - self.radius, c + self.radius

    def boundary_cloud(self, h: float) -> Array:
        return _arc(np.asarray(self.center), self.radius, 0.0, 2 * math.pi, h)

    @property
    def diameter(self) -> float:
        return 2.0 * self.radius

    @property
    def area(self) -> float:
        return math.pi * self.radius**2

    def scaled(self, factor: float) -> Ball:
        return Ball(self.center, self.radius * factor)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "center": list(self.center), "radius": self.radius}


@dataclass(frozen=True)
class Box(Region):
    """闭的轴对齐方块 [lo_x, hi_x] × [lo_y, hi_y]"""

    kind: ClassVar[str] = "box"
    closed: ClassVar[bool] = True

    lo: tuple[float, float]
    hi: tuple[float, float]

    def __post_init__(self) -> None:
        object.__setattr__(self, "lo", _pair(self.lo))
        object.__setattr__(self, "hi", _pair(self.hi))
        if not (self.hi[0] > self.lo[0] and self.hi[1] > self.lo[1]):
            raise ValueError(f"方块上界必须严格大于下界: lo={self.lo}, hi={self.hi}")

    @classmethod
    def square(cls, center: ArrayLike, half: float) -> Box:
        c = as_point(center)
        return cls(tuple(c - half), tuple(c + half))

    @classmethod
    def unit(cls) -> Box:
        return cls((0.0, 0.0), (1.0, 1.0))

    @property
    def center(self) -> Array:
        return (np.asarray(self.lo) + np.asarray(self.hi)) / 2.0

    @property
    def half(self) -> Array:
        return (np.asarray(self.hi) - np.asarray(self.lo)) / 2.0

    def signed_distance(self, points: ArrayLike) -> Array:
        q = np.abs(as_points(points) - self.center) - self.half
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def bounds(self) -> tuple[Array, Array]:
        return np.asarray(self.lo), np.asarray(self.hi)

    def corners(self) -> Array:
        (x0, y0), (x1, y1) = self.lo, self.hi
        return np.array([[x0, y0], [x1, y0], [x1, y1], [x0, y1]])

    def boundary_cloud(self, h: float) -> Array:
        return _polyline(self.corners(), h)

    @property
    def diameter(self) -> float:
        return float(2.0 * np.linalg.norm(self.half))

    @property
    def area(self) -> float:
        w, hgt = 2.0 * self.half
        return float(w * hgt)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "lo": list(self.lo), "hi": list(self.hi)}


@dataclass(frozen=True)
class ElongatedNbhd(Region):
    """细长邻域 E(p,q;r) = {x : dist(x, [p,q]) < r}"""

    kind: ClassVar[str] = "elongated"
    closed: ClassVar[bool] = False

    p: tuple[float, float]
    q: tuple[float, float]
    r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", _pair(self.p))
        object.__setattr__(self, "q", _pair(self.q))
        if not (math.isfinite(self.r) and self.r > 0):
            raise ValueError(f"细长邻域半径必须为正数，当前值: {self.r}")

    def signed_distance(self, points: ArrayLike) -> Array:
        return segment_distance(points, self.p, self.q) - self.r

    def bounds(self) -> tuple[Array, Array]:
        ends = np.array([self.p, self.q])
        return ends.min(axis=0) - self.r, ends.max(axis=0) + self.r

    def boundary_cloud(self, h: float) -> Array:
        p, q = np.asarray(self.p), np.asarray(self.q)
        d = q - p
        length = float(np.linalg.norm(d))
        if length == 0.0:
            return _arc(p, self.r, 0.0, 2 * math.pi, h)
        e = d / length
        n = np.array([-e[1], e[0]])
        phi = math.atan2(e[1], e[0])
        n_side = max(2, math.ceil(length / h))
        t = np.linspace(0.0, 1.0, n_side, endpoint=False)[:, np.newaxis]
        side_a = p - self.r * n + t * d
        side_b = q + self.r * n - t * d
        cap_q = _arc(q, self.r, phi - math.pi / 2, phi + math.pi / 2, h)
        cap_p = _arc(p, self.r, phi + math.pi / 2, phi + 3 * math.pi / 2, h)
        return np.vstack([side_a, cap_q, side_b, cap_p])

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.q, self.p)))

    @property
    def diameter(self) -> float:
        return self.length + 2.0 * self.r

    @property
    def area(self) -> float:
        return 2.0 * self.r * self.length + math.pi * self.r**2

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "p": list(self.p), "q": list(self.q), "r": self.r}


@dataclass(frozen=True)
class SolidCylinder(Region):
    """
    实心圆柱 C(a,b;ρ)：轴为 [a,b]、共轴半径 ρ 的闭矩形，
    端面 C⁻（过 a）与 C⁺（过 b）为标记的边界球。

    局部（拉直）坐标 (v, u)：v 为横向偏移，u 为沿轴偏移，原点在中心。
    标准坐标把 [-1,1]² 映到矩形：x = c + v·ρ·n + u·(len/2)·e。
    """

    kind: ClassVar[str] = "cylinder"
    closed: ClassVar[bool] = True

    a: tuple[float, float]
    b: tuple[float, float]
    rho: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _pair(self.a))
        object.__setattr__(self, "b", _pair(self.b))
        if self.a == self.b:
            raise ValueError(f"圆柱轴端点必须不同: a=b={self.a}")
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"圆柱半径必须为正数，当前值: {self.rho}")

    @classmethod
    def from_center(
        cls, center: ArrayLike, direction: ArrayLike, length: float, rho: float
    ) -> SolidCylinder:
        c = as_point(center)
        d = as_point(direction)
        e = d / np.linalg.norm(d)
        return cls(tuple(c - e * length / 2), tuple(c + e * length / 2), rho)

    @property
    def center(self) -> Array:
        return (np.asarray(self.a) + np.asarray(self.b)) / 2.0

    @property
    def length(self) -> float:
        return float(np.linalg.norm(np.subtract(self.b, self.a)))

    @property
    def axis(self) -> Array:
        return np.subtract(self.b, self.a) / self.length

    @property
    def normal(self) -> Array:
        # (n, e) 构成正定向标架
        e = self.axis
        return np.array([e[1], -e[0]])

    def frame(self) -> tuple[Array, Array]:
        """标准坐标 (v, u) ∈ [-1,1]² 到矩形的仿射映射 (矩阵, 平移)。"""
        matrix = np.column_stack([self.rho * self.normal, (self.length / 2.0) * self.axis])
        return matrix, self.center

    def to_local(self, points: ArrayLike) -> Array:
        rel = as_points(points) - self.center
        return np.column_stack([rel @ self.normal, rel @ self.axis])

    def signed_distance(self, points: ArrayLike) -> Array:
        q = np.abs(self.to_local(points)) - np.array([self.rho, self.length / 2.0])
        outside = np.linalg.norm(np.maximum(q, 0.0), axis=1)
        inside = np.minimum(np.max(q, axis=1), 0.0)
        return outside + inside

    def corners(self) -> Array:
        matrix, c = self.frame()
        std = np.array([[-1.0, -1.0], [1.0, -1.0], [1.0, 1.0], [-1.0, 1.0]])
        return std @ matrix.T + c

    def bounds(self) -> tuple[Array, Array]:
        corners = self.corners()
        return corners.min(axis=0), corners.max(axis=0)

    def boundary_cloud(self, h: float) -> Array:
        return _polyline(self.corners(), h)

    def face(self, sign: int, h: float) -> Array:
        """标记端面 C^±（sign = -1 为 C⁻，+1 为 C⁺）的采样。"""
        end = np.asarray(self.a if sign < 0 else self.b)
        n = max(2, math.ceil(2.0 * self.rho / h) + 1)
        v = np.linspace(-self.rho, self.rho, n)[:, np.newaxis]
        return end + v * self.normal

    def boundary_balls_separated(self) -> bool:
        """两个标记端面位于 [a,b] 垂直平分线的两侧，并且 ρ < len/2。"""
        if not self.rho < self.length / 2.0:
            return False
        h = self.rho / 8.0
        u_minus = self.to_local(self.face(-1, h))[:, 1]
        u_plus = self.to_local(self.face(+1, h))[:, 1]
        return bool(np.all(u_minus < 0.0) and np.all(u_plus > 0.0))

    def is_isometric_to(self, other: SolidCylinder, tol: float = 1e-12) -> bool:
        scale = max(self.length, other.length, 1.0)
        return (
            abs(self.length - other.length) <= tol * scale
            and abs(self.rho - other.rho) <= tol * scale
        )

    @property
    def enclosing_radius(self) -> float:
        """以中心为圆心、包含整个圆柱的最小球半径。"""
        return math.hypot(self.length / 2.0, self.rho)

    @property
    def diameter(self) -> float:
        return 2.0 * self.enclosing_radius

    @property
    def area(self) -> float:
        return 2.0 * self.rho * self.length

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "a": list(self.a), "b": list(self.b), "rho": self.rho}


@dataclass(frozen=True)
class TopologicalCylinder:
    """
    拓扑圆柱：标准方块 [-1,1]²（坐标 (v, u)）在同胚 chart 下的像，
    标记端面为 u = -1（C⁻）与 u = +1（C⁺）。刚性圆柱是 chart 为仿射映射的特例。
    """

    chart: HomeoExpr

    def _std_side(self, fixed: int, value: float, n: int) -> Array:
        t = np.linspace(-1.0, 1.0, n)
        std = np.empty((n, 2))
        std[:, fixed] = value
        std[:, 1 - fixed] = t
        return std

    def face(self, sign: int, n: int) -> Array:
        return self.chart.forward(self._std_side(1, float(np.sign(sign)), n))

    def axis_trace(self, n: int) -> Array:
        """中轴 v = 0，u 从 -1 到 +1"""
        return self.chart.forward(self._std_side(0, 0.0, n))

    def boundary(self, n: int) -> Array:
        """四条边各 n 个采样点"""
        sides = [self._std_side(1, s, n) for s in (-1.0, 1.0)]
        sides += [self._std_side(0, s, n) for s in (-1.0, 1.0)]
        return self.chart.forward(np.vstack(sides))

    def std_coords(self, points: ArrayLike) -> Array:
        return self.chart.backward(as_points(points))

    def contains(self, points: ArrayLike) -> NDArray[np.bool_]:
        std = self.std_coords(points)
        return np.max(np.abs(std), axis=1) <= 1.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": "topological_cylinder", "chart": self.chart.to_dict()}


_REGION_TYPES: dict[str, type[Region]] = {
    cls.kind: cls for cls in (Ball, Box, ElongatedNbhd, SolidCylinder)
}


def region_from_dict(data: dict[str, Any]) -> Region:
    """按 kind 字段还原区域。"""
    kind = data.get("kind")
    if kind == "ball":
        return Ball(tuple(data["center"]), float(data["radius"]))
    if kind == "box":
        return Box(tuple(data["lo"]), tuple(data["hi"]))
    if kind == "elongated":
        return ElongatedNbhd(tuple(data["p"]), tuple(data["q"]), float(data["r"]))
    if kind == "cylinder":
        return SolidCylinder(tuple(data["a"]), tuple(data["b"]), float(data["rho"]))
    raise ValueError(f"未知的区域类型: {kind!r}（可选: {sorted(_REGION_TYPES)}）")


def contains(region: Region, x: ArrayLike) -> bool | NDArray[np.bool_]:
    """闭式成员判定；单点返回 bool，点列返回布尔数组。"""
    inside = region.contains(x)
    if np.asarray(x).ndim == 1:
        return bool(inside[0])
    return inside


# ---------------------------------------------------------------------------
# 区域族
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RegionSet:
    """两两不交的有界区域 Ω_1, Ω_2, …（不交性按分辨率采样检验）"""

    regions: tuple[Region, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "regions", tuple(self.regions))

    def __len__(self) -> int:
        return len(self.regions)

    def clouds(self, resolution: float = GEOM_RESOLUTION) -> list[Array]:
        return [region.cloud(resolution) for region in self.regions]

    def check_disjoint(self, resolution: float = GEOM_RESOLUTION) -> None:
        """
        两个凸区域的内部相交，当且仅当其中一个的边界点落在另一个的内部；
        共享边界（如相邻的闭方块）不算相交。
        """
        clouds = self.clouds(resolution)
        for i, region_i in enumerate(self.regions):
            for j, region_j in enumerate(self.regions):
                if i == j:
                    continue
                if np.any(region_j.interior_contains(clouds[i])):
                    raise PreconditionError(f"区域 {i} 与区域 {j} 重叠", index=j)


def hausdorff_distance(s0: ArrayLike, s1: ArrayLike) -> float:
    """两个点云之间的 Hausdorff 距离（两个有向 sup-inf 距离的最大值）。"""
    a = np.asarray(s0, dtype=np.float64)
    b = np.asarray(s1, dtype=np.float64)
    if a.size == 0 or b.size == 0:
        raise ValueError("Hausdorff 距离需要两个非空点云")
    a, b = as_points(a), as_points(b)
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return float(max(d_ab.max(), d_ba.max()))


def cloud_diameter(cloud: ArrayLike) -> float:
    """点云直径：先取凸包顶点再两两比较。"""
    pts = as_points(cloud)
    if len(pts) < 2:
        return 0.0
    if len(pts) >= 3:
        try:
            pts = pts[ConvexHull(pts).vertices]
        except QhullError:  # 退化（共线）点云直接两两比较
            pass
    return float(pdist(pts).max())


def well_positioned_ratio(
    rs: RegionSet | Sequence[ArrayLike], resolution: float = GEOM_RESOLUTION
) -> float:
    """
    κ = max_m diam(Ω_m) / min_{i<j} dist_H(Ω_i, Ω_j)，在采样点云上计算。
    """
    clouds = rs.clouds(resolution) if isinstance(rs, RegionSet) else [as_points(c) for c in rs]
    if len(clouds) < 2:
        raise ValueError("well-positioned 比值至少需要两个区域")
    if isinstance(rs, RegionSet):
        rs.check_disjoint(resolution)
    max_diam = max(cloud_diameter(c) for c in clouds)
    min_dist = min(
        hausdorff_distance(clouds[i], clouds[j])
        for i in range(len(clouds))
        for j in range(i + 1, len(clouds))
    )
    if min_dist <= 0.0:
        raise PreconditionError("区域在采样分辨率下相接触（Hausdorff 距离为 0）")
    return max_diam / min_dist
