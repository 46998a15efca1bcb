#!/usr/bin/env python3
"""
可组合的同胚表达式代数

节点种类: Identity、Affine、三种 bump 流移动（平移、旋转、圆柱仿射）、极坐标扭转 Twist、
分片拼接 Piecewise、复合 Compose、求逆 Inverse（马蹄节点见 horseshoe 模块）。

每个节点都是不可变值对象，提供向量化的 forward / backward（输入输出均为 (n, 2) 数组），
以及声明的支撑区域 support 与 Lipschitz 上界（未知时为 None）。
流移动是显式自治向量场的时间一映射：固定步数 RK4 积分，逆映射为时间反向积分。
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from typing import Any, ClassVar

import numpy as np
from numpy.typing import ArrayLike

from entrolab.config import DEFAULT_FLOW_STEPS, GEOM_RESOLUTION
from entrolab.core.errors import DomainError, OrbitEscapeError, PreconditionError
from entrolab.core.geometry import (
    Array,
    Ball,
    ElongatedNbhd,
    Region,
    RegionSet,
    SolidCylinder,
    as_point,
    as_points,
    cross2,
    segment_distance,
)
from entrolab.logger import get_logger

logger = get_logger(__name__)

# 五次 bump 轮廓的最大斜率系数：max 30ζ²(1−ζ)² = 15/8
BUMP_SLOPE = 15.0 / 8.0

# 旋转移动场的 Lipschitz 系数：1 + 2r·(15/8)/r
ROTATION_FIELD_LIP = 1.0 + 2.0 * BUMP_SLOPE

# 分片拼接的边界泄漏判定容差（相对区域直径）
LEAK_TOL = 1e-9


# ---------------------------------------------------------------------------
# Bump 轮廓
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpProfile:
    """t <= r1 时为 1，t >= r2 时为 0，中间为单调递减的五次多项式。"""

    r1: float
    r2: float

    def __post_init__(self) -> None:
        if not (self.r1 > 0 and self.r2 > self.r1 and math.isfinite(self.r2)):
            raise ValueError(f"bump 轮廓需要 0 < r1 < r2，当前: r1={self.r1}, r2={self.r2}")

    @property
    def max_slope(self) -> float:
        return BUMP_SLOPE / (self.r2 - self.r1)

    def __call__(self, t: ArrayLike) -> Array:
        zeta = np.clip((np.asarray(t, dtype=np.float64) - self.r1) / (self.r2 - self.r1), 0.0, 1.0)
        # 1 − ∫(s−r1)²(r2−s)² 归一化后的积分
        return 1.0 - zeta**3 * (10.0 - 15.0 * zeta + 6.0 * zeta**2)


def bump(profile: BumpProfile, t: float | ArrayLike) -> float | Array:
    """归一化五次 bump；标量输入返回 float。"""
    arr = np.asarray(t, dtype=np.float64)
    if np.any(arr < 0):
        raise ValueError(f"bump 的自变量必须非负，当前值: {t}")
    value = profile(arr)
    return float(value) if value.ndim == 0 else value


# ---------------------------------------------------------------------------
# 表达式节点
# ---------------------------------------------------------------------------


class HomeoExpr(ABC):
    """平面同胚表达式的基类"""

    kind: ClassVar[str]

    @abstractmethod
    def forward(self, points: Array) -> Array: ...

    @abstractmethod
    def backward(self, points: Array) -> Array: ...

    @property
    def support(self) -> Region | None:
        """声明的支撑区域；None 表示未知"""
        return None

    @property
    def lipschitz_bound(self) -> float | None:
        return None

    @property
    def inverse_lipschitz_bound(self) -> float | None:
        return None

    @abstractmethod
    def to_dict(self) -> dict[str, Any]: ...


@dataclass(frozen=True)
class Identity(HomeoExpr):
    kind: ClassVar[str] = "identity"

    def forward(self, points: Array) -> Array:
        return np.array(points, dtype=np.float64)

    def backward(self, points: Array) -> Array:
        return np.array(points, dtype=np.float64)

    @property
    def lipschitz_bound(self) -> float:
        return 1.0

    @property
    def inverse_lipschitz_bound(self) -> float:
        return 1.0

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind}


IDENTITY = Identity()


@dataclass(frozen=True)
class Affine(HomeoExpr):
    """x ↦ M x + b，M 可逆"""

    kind: ClassVar[str] = "affine"

    matrix: tuple[tuple[float, float], tuple[float, float]]
    offset: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.shape != (2, 2) or not np.all(np.isfinite(m)):
            raise ValueError(f"仿射矩阵必须是有限的 2×2 矩阵: {self.matrix}")
        if abs(np.linalg.det(m)) < 1e-300:
            raise ValueError(f"仿射矩阵不可逆: {self.matrix}")
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in row) for row in m))
        object.__setattr__(self, "offset", tuple(float(v) for v in as_point(self.offset)))

    @classmethod
    def from_arrays(cls, matrix: ArrayLike, offset: ArrayLike = (0.0, 0.0)) -> Affine:
        return cls(tuple(map(tuple, np.asarray(matrix, dtype=np.float64))), tuple(offset))

    @property
    def m(self) -> Array:
        return np.asarray(self.matrix)

    @property
    def b(self) -> Array:
        return np.asarray(self.offset)

    def forward(self, points: Array) -> Array:
        return as_points(points) @ self.m.T + self.b

    def backward(self, points: Array) -> Array:
        return np.linalg.solve(self.m, (as_points(points) - self.b).T).T

    def inverted(self) -> Affine:
        inv = np.linalg.inv(self.m)
        return Affine.from_arrays(inv, -inv @ self.b)

    @property
    def lipschitz_bound(self) -> float:
        return float(np.linalg.norm(self.m, 2))

    @property
    def inverse_lipschitz_bound(self) -> float:
        return float(np.linalg.norm(np.linalg.inv(self.m), 2))

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "matrix": [list(r) for r in self.matrix],
            "offset": list(self.offset),
        }


class FlowMove(HomeoExpr):
    """
    自治向量场的时间一映射。支撑外的点被屏蔽，原样返回（逐位不变）。
    """

    steps: int

    @abstractmethod
    def field(self, points: Array) -> Array: ...

    @property
    def field_lipschitz(self) -> float:
        raise NotImplementedError

    def _integrate(self, points: Array, direction: float) -> Array:
        out = np.array(as_points(points), dtype=np.float64)
        if not np.all(np.isfinite(out)):
            raise DomainError(f"{self.kind} 的输入包含非有限坐标")
        support = self.support
        active = support.interior_contains(out) if support is not None else np.ones(len(out), bool)
        if not np.any(active):
            return out
        y = out[active]
        dt = direction / self.steps
        for _ in range(self.steps):
            k1 = self.field(y)
            k2 = self.field(y + 0.5 * dt * k1)
            k3 = self.field(y + 0.5 * dt * k2)
            k4 = self.field(y + dt * k3)
            y = y + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(y)):
            raise DomainError(f"{self.kind} 的积分产生了非有限值")
        out[active] = y
        return out

    def forward(self, points: Array) -> Array:
        return self._integrate(points, 1.0)

    def backward(self, points: Array) -> Array:
        return self._integrate(points, -1.0)

    @property
    def lipschitz_bound(self) -> float:
        # Grönwall: Lip(φ) ≤ 1 + M·e^M，M 为场的 Lipschitz 常数
        m = self.field_lipschitz
        return 1.0 + m * math.exp(m)

    @property
    def inverse_lipschitz_bound(self) -> float:
        return self.lipschitz_bound


@dataclass(frozen=True)
class TranslationMove(FlowMove):
    """X(x) = b(dist(x, [p,q]))·(q − p)，支撑在 E(p,q;r2) 的闭包内"""

    kind: ClassVar[str] = "translation"

    p: tuple[float, float]
    q: tuple[float, float]
    r1: float
    r2: float
    steps: int = DEFAULT_FLOW_STEPS

    def __post_init__(self) -> None:
        object.__setattr__(self, "p", tuple(float(v) for v in as_point(self.p)))
        object.__setattr__(self, "q", tuple(float(v) for v in as_point(self.q)))
        object.__setattr__(self, "_profile", BumpProfile(self.r1, self.r2))
        _check_steps(self.steps)

    def field(self, points: Array) -> Array:
        weight = self._profile(segment_distance(points, self.p, self.q))
        return weight[:, np.newaxis] * (np.asarray(self.q) - np.asarray(self.p))

    @property
    def displacement(self) -> float:
        return float(np.linalg.norm(np.subtract(self.q, self.p)))

    @property
    def field_lipschitz(self) -> float:
        return BUMP_SLOPE * self.displacement / (self.r2 - self.r1)

    @property
    def support(self) -> Region:
        return ElongatedNbhd(self.p, self.q, self.r2)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "p": list(self.p),
            "q": list(self.q),
            "r1": self.r1,
            "r2": self.r2,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class RotationMove(HomeoExpr):
    """
    X(x) = b(|x−c|; r, 2r)·angle·J(x−c)。场处处与以 c 为心的圆相切，
    流保持 |x−c| 不变，时间一映射有闭式: 绕 c 旋转 angle·b(|x−c|)。
    """

    kind: ClassVar[str] = "rotation"

    center: tuple[float, float]
    angle: float
    r: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(v) for v in as_point(self.center)))
        object.__setattr__(self, "_profile", BumpProfile(self.r, 2.0 * self.r))

    def _rotate(self, points: Array, sign: float) -> Array:
        pts = as_points(points)
        rel = pts - np.asarray(self.center)
        theta = sign * self.angle * self._profile(np.linalg.norm(rel, axis=1))
        cos, sin = np.cos(theta), np.sin(theta)
        out = np.array(pts, dtype=np.float64)
        moved = theta != 0.0
        out[moved, 0] = self.center[0] + cos[moved] * rel[moved, 0] - sin[moved] * rel[moved, 1]
        out[moved, 1] = self.center[1] + sin[moved] * rel[moved, 0] + cos[moved] * rel[moved, 1]
        return out

    def forward(self, points: Array) -> Array:
        return self._rotate(points, 1.0)

    def backward(self, points: Array) -> Array:
        return self._rotate(points, -1.0)

    @property
    def support(self) -> Region:
        return Ball(self.center, 2.0 * self.r)

    @property
    def lipschitz_bound(self) -> float:
        return math.exp(ROTATION_FIELD_LIP * abs(self.angle))

    @property
    def inverse_lipschitz_bound(self) -> float:
        return self.lipschitz_bound

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "center": list(self.center), "angle": self.angle, "r": self.r}


@dataclass(frozen=True)
class AffinityMove(FlowMove):
    """
    共轴同心圆柱之间的仿射移动。圆柱标架中 A = diag(横向因子, 轴向因子)，
    场 X(x) = b(dist(x, 轴段))·L(x − c)，L = log A；在 b ≡ 1 的区域上时间一映射就是 A。

    margin > 0 时轴向多拉伸 (1+margin)、横向多压缩 (1−margin)，使源圆柱“穿越”目标圆柱；
    margin = 0 时源圆柱恰好映到目标圆柱上。
    """

    kind: ClassVar[str] = "affinity"

    source: SolidCylinder
    target: SolidCylinder
    margin: float = 0.25
    steps: int = DEFAULT_FLOW_STEPS
    _cache: dict[str, Any] = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        _check_steps(self.steps)
        if not 0.0 <= self.margin < 1.0:
            raise ValueError(f"margin 必须位于 [0, 1)，当前值: {self.margin}")
        s, t = self.source, self.target
        scale = max(s.diameter, t.diameter)
        if np.linalg.norm(s.center - t.center) > 1e-9 * scale:
            raise ValueError("仿射移动要求源圆柱与目标圆柱同心")
        if abs(cross2(s.axis, t.axis)) > 1e-9:
            raise ValueError("仿射移动要求源圆柱与目标圆柱共轴")

        lateral = t.rho / s.rho * (1.0 - self.margin)
        axial = t.length / s.length * (1.0 + self.margin)
        frame = np.column_stack([s.normal, s.axis])
        log_a = frame @ np.diag([math.log(lateral), math.log(axial)]) @ frame.T
        half_axis = max(1.0, axial) * s.length / 2.0
        r1 = max(1.0, lateral) * s.rho
        r2 = r1 + s.diameter
        self._cache.update(
            log_a=log_a,
            factors=(lateral, axial),
            a=s.center - half_axis * s.axis,
            b=s.center + half_axis * s.axis,
            profile=BumpProfile(r1, r2),
        )

    @property
    def factors(self) -> tuple[float, float]:
        """(横向因子, 轴向因子)"""
        return self._cache["factors"]

    def field(self, points: Array) -> Array:
        c = self.source.center
        dist = segment_distance(points, self._cache["a"], self._cache["b"])
        weight = self._cache["profile"](dist)
        return weight[:, np.newaxis] * ((points - c) @ self._cache["log_a"].T)

    @property
    def field_lipschitz(self) -> float:
        profile: BumpProfile = self._cache["profile"]
        norm_l = float(np.linalg.norm(self._cache["log_a"], 2))
        half_axis = float(np.linalg.norm(self._cache["b"] - self.source.center))
        reach = half_axis + profile.r2
        return norm_l * (1.0 + reach * profile.max_slope)

    @property
    def support(self) -> Region:
        cache = self._cache
        return ElongatedNbhd(tuple(cache["a"]), tuple(cache["b"]), cache["profile"].r2)

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "source": self.source.to_dict(),
            "target": self.target.to_dict(),
            "margin": self.margin,
            "steps": self.steps,
        }


@dataclass(frozen=True)
class Twist(HomeoExpr):
    """
    极坐标扭转 (r, θ) ↦ (r, θ + ω(r))，ω 在节点 radii 上分段线性，
    区间 [radii[0], radii[-1]] 之外为 0（端点角度为 0 以保证连续，radii[0] = 0 时内端不受限）。
    """

    kind: ClassVar[str] = "twist"

    center: tuple[float, float]
    radii: tuple[float, ...]
    angles: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "center", tuple(float(v) for v in as_point(self.center)))
        radii = tuple(float(r) for r in self.radii)
        angles = tuple(float(a) for a in self.angles)
        if len(radii) < 2 or len(radii) != len(angles):
            raise ValueError("扭转需要至少两个节点，且 radii 与 angles 等长")
        if radii[0] < 0 or any(b <= a for a, b in zip(radii, radii[1:], strict=False)):
            raise ValueError(f"扭转半径必须非负且严格递增: {radii}")
        # 内端半径为 0 时中心处可取任意角；否则两端角度都必须为 0
        if angles[-1] != 0.0 or (radii[0] > 0.0 and angles[0] != 0.0):
            raise ValueError("扭转角在环形区域两端必须为 0")
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "angles", angles)

    def omega(self, r: ArrayLike) -> Array:
        return np.interp(r, self.radii, self.angles, left=0.0, right=0.0)

    def _turn(self, points: Array, sign: float) -> Array:
        pts = as_points(points)
        rel = pts - np.asarray(self.center)
        theta = sign * self.omega(np.linalg.norm(rel, axis=1))
        cos, sin = np.cos(theta), np.sin(theta)
        out = np.array(pts, dtype=np.float64)
        moved = theta != 0.0
        out[moved, 0] = self.center[0] + cos[moved] * rel[moved, 0] - sin[moved] * rel[moved, 1]
        out[moved, 1] = self.center[1] + sin[moved] * rel[moved, 0] + cos[moved] * rel[moved, 1]
        return out

    def forward(self, points: Array) -> Array:
        return self._turn(points, 1.0)

    def backward(self, points: Array) -> Array:
        return self._turn(points, -1.0)

    @property
    def support(self) -> Region:
        return Ball(self.center, self.radii[-1])

    @property
    def lipschitz_bound(self) -> float:
        # 极坐标标架中微分为 [[1, 0], [r·ω′, 1]]
        slopes = [
            r_hi * abs((a_hi - a_lo) / (r_hi - r_lo))
            for r_lo, r_hi, a_lo, a_hi in zip(
                self.radii, self.radii[1:], self.angles, self.angles[1:], strict=False
            )
        ]
        return 1.0 + max(slopes)

    @property
    def inverse_lipschitz_bound(self) -> float:
        return self.lipschitz_bound

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "center": list(self.center),
            "radii": list(self.radii),
            "angles": list(self.angles),
        }


@dataclass(frozen=True)
class Piecewise(HomeoExpr):
    """
    区域内按对应分片求值，其余位置用 default。分片按顺序首个匹配（边界归前一个分片）。
    每个分片映射都保持自己的区域，因此逆映射也按区域分派。
    """

    kind: ClassVar[str] = "piecewise"

    parts: tuple[tuple[Region, HomeoExpr], ...]
    default: HomeoExpr = IDENTITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "parts", tuple((r, m) for r, m in self.parts))

    def _dispatch(self, points: Array, inverse: bool) -> Array:
        pts = as_points(points)
        out = self.default.backward(pts) if inverse else self.default.forward(pts)
        assigned = np.zeros(len(pts), dtype=bool)
        for region, m in self.parts:
            mask = region.contains(pts) & ~assigned
            if np.any(mask):
                out[mask] = m.backward(pts[mask]) if inverse else m.forward(pts[mask])
                assigned |= mask
        return out

    def forward(self, points: Array) -> Array:
        return self._dispatch(points, inverse=False)

    def backward(self, points: Array) -> Array:
        return self._dispatch(points, inverse=True)

    @property
    def lipschitz_bound(self) -> float | None:
        # 各分片在区域边界上与恒等一致；沿任意线段分段估计即得最大值
        if not isinstance(self.default, Identity):
            return None
        bounds = [m.lipschitz_bound for _, m in self.parts]
        return None if any(b is None for b in bounds) else max([1.0, *bounds])

    @property
    def inverse_lipschitz_bound(self) -> float | None:
        if not isinstance(self.default, Identity):
            return None
        bounds = [m.inverse_lipschitz_bound for _, m in self.parts]
        return None if any(b is None for b in bounds) else max([1.0, *bounds])

    def to_dict(self) -> dict[str, Any]:
        return {
            "kind": self.kind,
            "parts": [{"region": r.to_dict(), "map": m.to_dict()} for r, m in self.parts],
            "default": self.default.to_dict(),
        }


@dataclass(frozen=True)
class Compose(HomeoExpr):
    """数学顺序的复合: Compose((f, g)) = f ∘ g，最右侧先作用"""

    kind: ClassVar[str] = "compose"

    maps: tuple[HomeoExpr, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "maps", tuple(self.maps))

    def forward(self, points: Array) -> Array:
        out = as_points(points)
        for m in reversed(self.maps):
            out = m.forward(out)
        return out

    def backward(self, points: Array) -> Array:
        out = as_points(points)
        for m in self.maps:
            out = m.backward(out)
        return out

    @property
    def lipschitz_bound(self) -> float | None:
        return _product(m.lipschitz_bound for m in self.maps)

    @property
    def inverse_lipschitz_bound(self) -> float | None:
        return _product(m.inverse_lipschitz_bound for m in self.maps)

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "maps": [m.to_dict() for m in self.maps]}


@dataclass(frozen=True)
class Inverse(HomeoExpr):
    kind: ClassVar[str] = "inverse"

    child: HomeoExpr

    def forward(self, points: Array) -> Array:
        return self.child.backward(points)

    def backward(self, points: Array) -> Array:
        return self.child.forward(points)

    @property
    def support(self) -> Region | None:
        return self.child.support

    @property
    def lipschitz_bound(self) -> float | None:
        return self.child.inverse_lipschitz_bound

    @property
    def inverse_lipschitz_bound(self) -> float | None:
        return self.child.lipschitz_bound

    def to_dict(self) -> dict[str, Any]:
        return {"kind": self.kind, "child": self.child.to_dict()}


def _product(values: Iterable[float | None]) -> float | None:
    out = 1.0
    for v in values:
        if v is None:
            return None
        out *= v
    return out


def _check_steps(steps: int) -> None:
    if steps < 1:
        raise ValueError(f"积分步数必须为正整数，当前值: {steps}")


# ---------------------------------------------------------------------------
# 求值
# ---------------------------------------------------------------------------


def _evaluate(m: HomeoExpr, x: ArrayLike, inverse: bool) -> Array:
    arr = np.asarray(x, dtype=np.float64)
    pts = as_points(arr)
    if not np.all(np.isfinite(pts)):
        raise DomainError(f"输入点包含非有限坐标: {pts[~np.all(np.isfinite(pts), axis=1)][:3]}")
    out = m.backward(pts) if inverse else m.forward(pts)
    if not np.all(np.isfinite(out)):
        raise DomainError(f"{m.kind} 求值产生了非有限值")
    return out[0] if arr.ndim == 1 else out


def eval_map(m: HomeoExpr, x: ArrayLike) -> Array:
    """m(x)；单点输入返回形状 (2,)，点列输入返回 (n, 2)。"""
    return _evaluate(m, x, inverse=False)


def eval_inv(m: HomeoExpr, y: ArrayLike) -> Array:
    """m⁻¹(y)"""
    return _evaluate(m, y, inverse=True)


def iterate(m: HomeoExpr, x: ArrayLike, k: int, domain: Region | None = None) -> Array:
    """
    轨道 x, m(x), …, m^k(x)，形状 (k+1, 2)。

    Raises:
        OrbitEscapeError: 第 j 步的点非有限，或离开给定 domain
    """
    if k < 0:
        raise ValueError(f"迭代次数必须非负，当前值: {k}")
    orbit = np.empty((k + 1, 2))
    orbit[0] = as_point(x)
    if domain is not None and not domain.contains(orbit[0])[0]:
        raise OrbitEscapeError(0)
    for j in range(k):
        nxt = m.forward(orbit[j : j + 1])[0]
        if not np.all(np.isfinite(nxt)) or (domain is not None and not domain.contains(nxt)[0]):
            raise OrbitEscapeError(j + 1)
        orbit[j + 1] = nxt
    return orbit


# ---------------------------------------------------------------------------
# 构造函数
# ---------------------------------------------------------------------------


def compose(*maps: HomeoExpr) -> HomeoExpr:
    """数学顺序复合，展平嵌套复合并丢弃恒等映射。"""
    flat: list[HomeoExpr] = []
    for m in maps:
        if isinstance(m, Compose):
            flat.extend(m.maps)
        elif not isinstance(m, Identity):
            flat.append(m)
    if not flat:
        return IDENTITY
    if len(flat) == 1:
        return flat[0]
    return Compose(tuple(flat))


def inverse(m: HomeoExpr) -> HomeoExpr:
    """m⁻¹；Inverse(Inverse(m)) 化简为 m。"""
    if isinstance(m, Inverse):
        return m.child
    if isinstance(m, Identity):
        return m
    return Inverse(m)


def translation_move(
    p: ArrayLike, q: ArrayLike, r1: float, r2: float, steps: int = DEFAULT_FLOW_STEPS
) -> HomeoExpr:
    """把 p 推到 q 的 E-扰动；p = q 时为恒等"""
    if not 0 < r1 < r2:
        raise ValueError(f"平移移动需要 0 < r1 < r2，当前: r1={r1}, r2={r2}")
    p_, q_ = as_point(p), as_point(q)
    if np.array_equal(p_, q_):
        return IDENTITY
    return TranslationMove(tuple(p_), tuple(q_), float(r1), float(r2), steps)


def translate_to_origin(c: SolidCylinder, steps: int = DEFAULT_FLOW_STEPS) -> HomeoExpr:
    """沿 [c, 0] 把圆柱中心平移到原点，支撑在 E(0, c; r + |c|) 内"""
    center = c.center
    dist = float(np.linalg.norm(center))
    if dist == 0.0:
        return IDENTITY
    r = c.enclosing_radius
    return translation_move(center, (0.0, 0.0), r, r + dist, steps)


def rotation_move(center: ArrayLike, angle: float, r: float) -> HomeoExpr:
    """B(center, r) 上的精确旋转，支撑在 B(center, 2r) 内"""
    if not r > 0:
        raise ValueError(f"旋转半径必须为正数，当前值: {r}")
    if angle == 0.0:
        return IDENTITY
    return RotationMove(tuple(as_point(center)), float(angle), float(r))


def affinity_move(
    cs: SolidCylinder, ct: SolidCylinder, margin: float = 0.25, steps: int = DEFAULT_FLOW_STEPS
) -> HomeoExpr:
    """共轴同心圆柱的仿射移动；cs == ct 时为恒等"""
    if cs == ct:
        return IDENTITY
    return AffinityMove(cs, ct, margin, steps)


def twist(center: ArrayLike, radii: Sequence[float], angles: Sequence[float]) -> HomeoExpr:
    if all(a == 0.0 for a in angles):
        return IDENTITY
    return Twist(tuple(as_point(center)), tuple(radii), tuple(angles))


def _axis_angle(c: SolidCylinder, c2: SolidCylinder) -> float:
    e, e2 = c.axis, c2.axis
    return math.atan2(cross2(e, e2), float(e @ e2))


def cylinder_isometry(
    c: SolidCylinder,
    c2: SolidCylinder,
    p: ArrayLike,
    r: float,
    steps: int = DEFAULT_FLOW_STEPS,
) -> HomeoExpr:
    """
    把 c 等距地映到 c2（标记端面对应），两者都在 B(p, r) 内。
    分解为: 平移 c→p，绕 p 的旋转，平移 p→c2 的中心；支撑在 B(p, 3r) 内。
    """
    if not c.is_isometric_to(c2):
        raise ValueError(
            f"圆柱不等距: len {c.length} vs {c2.length}, rho {c.rho} vs {c2.rho}"
        )
    if c == c2:
        return IDENTITY
    p_ = as_point(p)
    for idx, cyl in enumerate((c, c2)):
        if np.max(np.linalg.norm(cyl.corners() - p_, axis=1)) > r * (1.0 + 1e-12):
            raise PreconditionError(f"圆柱 {idx} 不在球 B(p, r) 内", index=idx)
    rho_c = c.enclosing_radius
    reach = max(2.0 * r, 2.0 * rho_c)
    return compose(
        translation_move(p_, c2.center, rho_c, reach, steps),
        rotation_move(p_, _axis_angle(c, c2), rho_c),
        translation_move(c.center, p_, rho_c, reach, steps),
    )


def cylinder_transport(
    cp: SolidCylinder,
    cq: SolidCylinder,
    p: ArrayLike,
    q: ArrayLike,
    r: float,
    steps: int = DEFAULT_FLOW_STEPS,
) -> HomeoExpr:
    """
    B(p, r) 中的 cp 到 B(q, r) 中的等距圆柱 cq：先在 B(p, r) 内等距摆放，
    再把整个球从 p 平移到 q。支撑在 E(p, q; 10r) 内。
    """
    p_, q_ = as_point(p), as_point(q)
    if np.array_equal(p_, q_):
        return cylinder_isometry(cp, cq, p_, r, steps)
    shift = q_ - p_
    cq_at_p = SolidCylinder(
        tuple(np.asarray(cq.a) - shift), tuple(np.asarray(cq.b) - shift), cq.rho
    )
    return compose(
        translation_move(p_, q_, r, 10.0 * r, steps),
        cylinder_isometry(cp, cq_at_p, p_, r, steps),
    )


def piecewise(
    parts: Sequence[tuple[Region, HomeoExpr]],
    default: HomeoExpr = IDENTITY,
    resolution: float = GEOM_RESOLUTION,
    check: bool = True,
) -> HomeoExpr:
    """
    不交支撑扰动的拼接。

    Raises:
        PreconditionError: 区域重叠，或分片映射在区域边界上不是恒等（泄漏到区域之外）
    """
    parts = [(region, m) for region, m in parts if not isinstance(m, Identity)]
    if not parts:
        return default
    if check:
        RegionSet(tuple(r for r, _ in parts)).check_disjoint(resolution)
        for idx, (region, m) in enumerate(parts):
            cloud = region.cloud(resolution)
            drift = np.max(np.linalg.norm(m.forward(cloud) - cloud, axis=1))
            if drift > LEAK_TOL * region.diameter:
                raise PreconditionError(
                    f"分片 {idx} 的映射在区域边界上移动了 {drift:.3e}，泄漏到区域之外",
                    index=idx,
                )
    logger.debug(f"拼接 {len(parts)} 个不交分片")
    return Piecewise(tuple(parts), default)


def local_affine(m: HomeoExpr, chart: Affine) -> Affine:
    """
    m ∘ chart 在标准方块三个顶点上的仿射拟合；m 在 chart 像上为仿射时精确。
    """
    std = np.array([[-1.0, -1.0], [1.0, -1.0], [-1.0, 1.0]])
    y = m.forward(chart.forward(std))
    matrix = np.column_stack([(y[1] - y[0]) / 2.0, (y[2] - y[0]) / 2.0])
    offset = y[0] + matrix @ np.array([1.0, 1.0])
    return Affine.from_arrays(matrix, offset)


def cylinder_chart(c: SolidCylinder) -> Affine:
    """标准方块 [-1,1]²（坐标 (v, u)）到刚性圆柱的仿射图卡"""
    matrix, offset = c.frame()
    return Affine.from_arrays(matrix, offset)
