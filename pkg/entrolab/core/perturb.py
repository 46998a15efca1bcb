#!/usr/bin/env python3
"""
两条扰动流程

闭合引理：在 y 附近找一段几乎回归的轨道 x⁰ … x^k，再用把 x^k 推到 x⁰ 的平移流移动 φ
（支撑在细长邻域 E(x^k, x⁰; cρ) 内）得到 g = f ∘ φ，使 x^k 成为 g 的周期点。

马蹄插入：沿周期轨道摆放一串等距小圆柱 C_j，在每个 f(C_j) 附近后复合一个修正
ψ = H ∘ τ（τ 把 f(C_j) 的刚性拟合等距送到 C_{j+1}，H 是核心为 C_{j+1} 的 N 分支马蹄），
于是 g = Ψ ∘ f 把 C_j 中的 N 条子圆柱各自“穿越” C_{j+1}，h_top(g) >= log N。
"""

from __future__ import annotations

import itertools
import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
from numpy.typing import ArrayLike

from entrolab.config import (
    CERT_RESOLUTION,
    CLOSING_C,
    CLOSING_RESIDUAL,
    DEFAULT_EPS,
    DEFAULT_FLOW_STEPS,
    DEFAULT_N_RANGE,
    DEFAULT_SEED,
    EXCLUSION_FACTOR,
)
from entrolab.core.entropy import EntropyEstimate, entropy_estimate
from entrolab.core.errors import CertificateError, NoReturnError, PreconditionError
from entrolab.core.estimators import (
    Alpha,
    SamplingPlan,
    bi_lipschitz_constant,
    holder_distance,
    sobolev_distance,
)
from entrolab.core.geometry import (
    Array,
    Ball,
    Box,
    ElongatedNbhd,
    Region,
    SolidCylinder,
    TopologicalCylinder,
    as_point,
)
from entrolab.core.homeo import (
    Affine,
    HomeoExpr,
    compose,
    cylinder_chart,
    cylinder_isometry,
    cylinder_transport,
    inverse,
    iterate,
    piecewise,
    translation_move,
)
from entrolab.core.horseshoe import (
    CrossingCertificate,
    HorseshoeSpec,
    check_crossing,
    horseshoe_on_cylinder,
)
from entrolab.logger import get_logger

logger = get_logger(__name__)

# 三个支撑尺度（相对 cρ）
SUPPORT_SCALES = (1.0, 0.5, 0.25)
# 闭合后 g = f 的外部采样点数
EXTERIOR_SAMPLES = 1000
# 链条允许显式枚举的最大路径数
MAX_ITINERARIES = 27


# ---------------------------------------------------------------------------
# 回归段
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReturnSegment:
    """
    x⁰ = orbit[0]，x^k = orbit[k]，ρ = |x⁰ − x^k|；中间点 x^j（0 < j < k）都不在
    B(x⁰, ¾ρ) ∪ B(x^k, ¾ρ) 中。
    """

    y: tuple[float, float]
    eta: float
    orbit: Array
    exclusion: float = EXCLUSION_FACTOR

    @property
    def k(self) -> int:
        return len(self.orbit) - 1

    @property
    def x(self) -> Array:
        return self.orbit[0]

    @property
    def end(self) -> Array:
        return self.orbit[-1]

    @property
    def rho(self) -> float:
        return float(np.linalg.norm(self.end - self.x))

    def exclusion_violations(self) -> list[int]:
        """落在两个排除球中的中间点下标"""
        mids = self.orbit[1:-1]
        if len(mids) == 0 or self.rho == 0.0:
            return []
        reach = self.exclusion * self.rho
        bad = (np.linalg.norm(mids - self.x, axis=1) < reach) | (
            np.linalg.norm(mids - self.end, axis=1) < reach
        )
        return [int(j) + 1 for j in np.flatnonzero(bad)]

    def to_dict(self) -> dict[str, Any]:
        return {
            "y": list(self.y),
            "eta": self.eta,
            "k": self.k,
            "rho": self.rho,
            "x0": self.x.tolist(),
            "xk": self.end.tolist(),
            "exclusion": self.exclusion,
            "orbit": self.orbit.tolist(),
        }


def _orbit_until_return(
    f: HomeoExpr, start: Array, y: Array, radius: float, max_iter: int
) -> Array | None:
    orbit = [start]
    z = start
    for _ in range(max_iter):
        z = f.forward(z[np.newaxis, :])[0]
        if not np.all(np.isfinite(z)):
            return None
        orbit.append(z)
        if np.linalg.norm(z - y) < radius:
            return np.asarray(orbit)
    return None


def _refine_pair(orbit: Array, exclusion: float) -> tuple[int, int]:
    """中间点落入 ¾ρ 球时换成更近的一对；ρ 每步至少缩小到 ¾"""
    a, b = 0, len(orbit) - 1
    while True:
        rho = float(np.linalg.norm(orbit[b] - orbit[a]))
        if rho == 0.0 or b - a < 2:
            return a, b
        mids = np.arange(a + 1, b)
        da = np.linalg.norm(orbit[mids] - orbit[a], axis=1)
        db = np.linalg.norm(orbit[mids] - orbit[b], axis=1)
        reach = exclusion * rho
        options = [(float(d), a, int(j)) for d, j in zip(da, mids, strict=True) if d < reach]
        options += [(float(d), int(j), b) for d, j in zip(db, mids, strict=True) if d < reach]
        if not options:
            return a, b
        _, a, b = min(options)
        assert b - a >= 1, "回归对的细化越过了轨道长度"


def find_return(
    f: HomeoExpr,
    y: ArrayLike,
    eta: float,
    max_iter: int = 10_000,
    exclusion: float = EXCLUSION_FACTOR,
) -> ReturnSegment:
    """
    从 y 以及 y 附近的 8 个点出发迭代，直到回到 B(y, η/10)；再细化回归对，
    得到满足排除条件的回归段（选出的点对位于 B(y, η) 内）。

    Raises:
        NoReturnError: max_iter 步内没有回归
    """
    if not eta > 0:
        raise ValueError(f"η 必须为正数，当前值: {eta}")
    y_ = as_point(y)
    theta = np.linspace(0.0, 2.0 * math.pi, 8, endpoint=False)
    starts = [y_, *(y_ + (eta / 20.0) * np.column_stack([np.cos(theta), np.sin(theta)]))]
    for start in starts:
        orbit = _orbit_until_return(f, start, y_, eta / 10.0, max_iter)
        if orbit is not None:
            break
    else:
        raise NoReturnError(f"{max_iter} 步内没有回到 B({y_.tolist()}, {eta / 10.0:g})")
    a, b = _refine_pair(orbit, exclusion)
    seg = ReturnSegment(tuple(y_.tolist()), eta, orbit[a : b + 1].copy(), exclusion)
    logger.info(f"回归段: k = {seg.k}，ρ = {seg.rho:.3e}（初始回归 {len(orbit) - 1} 步）")
    return seg


# ---------------------------------------------------------------------------
# 闭合扰动
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PerturbationSize:
    """某个支撑尺度上测得的扰动大小"""

    scale: float
    radius: float
    holder: dict[str, float]
    sobolev: dict[str, float]

    def to_dict(self) -> dict[str, Any]:
        return {
            "scale": self.scale,
            "radius": self.radius,
            "holder": dict(self.holder),
            "sobolev": dict(self.sobolev),
        }


def strictly_decreasing(sizes: Sequence[PerturbationSize]) -> bool:
    """每个 α 与 p 的测量值都随支撑缩小严格递减"""
    if len(sizes) < 2:
        return True
    keys_h = sizes[0].holder.keys()
    keys_s = sizes[0].sobolev.keys()
    for big, small in zip(sizes, sizes[1:], strict=False):
        if any(not small.holder[k] < big.holder[k] for k in keys_h):
            return False
        if any(not small.sobolev[k] < big.sobolev[k] for k in keys_s):
            return False
    return True


@dataclass(frozen=True)
class ClosingReport:
    g: HomeoExpr
    segment: ReturnSegment
    c: float
    support: ElongatedNbhd | None
    residual: float
    exterior_samples: int
    exterior_agrees: bool
    sizes: tuple[PerturbationSize, ...] = ()

    @property
    def passed(self) -> bool:
        return self.residual <= CLOSING_RESIDUAL and self.exterior_agrees

    @property
    def sizes_decreasing(self) -> bool:
        return strictly_decreasing(self.sizes)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment": self.segment.to_dict(),
            "c": self.c,
            "support": self.support.to_dict() if self.support is not None else None,
            "residual": self.residual,
            "exterior_samples": self.exterior_samples,
            "exterior_agrees": self.exterior_agrees,
            "sizes": [s.to_dict() for s in self.sizes],
            "sizes_decreasing": self.sizes_decreasing,
            "passed": self.passed,
            "map": self.g.to_dict(),
        }


def closing_move(
    seg: ReturnSegment, c: float = CLOSING_C, scale: float = 1.0, steps: int = DEFAULT_FLOW_STEPS
) -> HomeoExpr:
    """
    把 x⁰ + s(x^k − x⁰) 推到 x⁰ 的平移移动，内外半径 s·cρ/2 与 s·cρ；
    s = 1 即闭合扰动 φ，较小的 s 是闭合构型关于 x⁰ 的缩放。
    """
    start = seg.x + scale * (seg.end - seg.x)
    r = scale * c * seg.rho
    return translation_move(start, seg.x, r / 2.0, r, steps)


def _local_box(regions: Sequence[Region], pad: float = 0.25) -> Box:
    lo = np.min([r.bounds()[0] for r in regions], axis=0)
    hi = np.max([r.bounds()[1] for r in regions], axis=0)
    half = float(np.max(hi - lo)) * (0.5 + pad)
    return Box.square((lo + hi) / 2.0, half)


def _image_box(f: HomeoExpr, region: Region, pad: float = 0.25) -> Box:
    cloud = f.forward(region.cloud(1e-2))
    lo, hi = cloud.min(axis=0), cloud.max(axis=0)
    half = float(np.max(hi - lo)) * (0.5 + pad)
    return Box.square((lo + hi) / 2.0, half)


def _alpha_key(alpha: Alpha) -> str:
    return "Lip" if alpha == "Lip" else f"{float(alpha):g}"


def measure_sizes(
    f: HomeoExpr,
    seg: ReturnSegment,
    c: float = CLOSING_C,
    alphas: Sequence[Alpha] = (0.5,),
    ps: Sequence[float] = (2.0,),
    pairs: int = 8000,
    cells: int = 96,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> tuple[PerturbationSize, ...]:
    """在支撑半径 cρ、cρ/2、cρ/4 上测量 ‖f − f∘φ_s‖_{C^α} 与 Sobolev 距离"""
    support = ElongatedNbhd(tuple(seg.end), tuple(seg.x), c * seg.rho)
    box = _local_box([support])
    inv_box = _image_box(f, support)
    plan = SamplingPlan.pairs(box, count=pairs, seed=seed)
    h = 2.0 * float(box.half[0]) / cells
    out = []
    for s in SUPPORT_SCALES:
        g_s = compose(f, closing_move(seg, c, s))
        holder = {
            _alpha_key(a): holder_distance(f, g_s, a, plan, workers) for a in alphas
        }
        sob = {
            f"{p:g}": sobolev_distance(
                f, g_s, p, h=h, domain=box, workers=workers, inverse_domain=inv_box
            )
            for p in ps
        }
        out.append(PerturbationSize(s, s * c * seg.rho, holder, sob))
        logger.debug(f"支撑尺度 {s}: Hölder {holder}，Sobolev {sob}")
    return tuple(out)


def close_orbit(
    f: HomeoExpr,
    seg: ReturnSegment,
    c: float = CLOSING_C,
    measure: bool = True,
    alphas: Sequence[Alpha] = (0.5,),
    ps: Sequence[float] = (2.0,),
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> ClosingReport:
    """
    g = f ∘ φ，φ = translation_move(x^k, x⁰, cρ/2, cρ)；g 在 E 之外等于 f，g^k(x^k) = x^k。

    Raises:
        PreconditionError: 某个中间点 x^j 落在 E(x⁰, x^k; cρ) 内（index = j）
    """
    if not c > 0:
        raise ValueError(f"c 必须为正数，当前值: {c}")
    if seg.rho == 0.0:
        logger.info("回归段已是周期轨道，g = f")
        return ClosingReport(f, seg, c, None, 0.0, 0, True)

    support = ElongatedNbhd(tuple(seg.end), tuple(seg.x), c * seg.rho)
    mids = seg.orbit[1:-1]
    if len(mids):
        inside = np.flatnonzero(support.contains(mids))
        if inside.size:
            j = int(inside[0]) + 1
            raise PreconditionError(f"中间点 x^{j} 落在闭合邻域 E 内", index=j)

    phi = closing_move(seg, c)
    g = compose(f, phi)
    orbit = iterate(g, seg.end, seg.k)
    residual = float(np.linalg.norm(orbit[-1] - seg.end))

    rng = np.random.default_rng(seed)
    box = _local_box([support], pad=1.0)
    samples = rng.uniform(box.lo, box.hi, size=(4 * EXTERIOR_SAMPLES, 2))
    samples = samples[~support.contains(samples)][:EXTERIOR_SAMPLES]
    agrees = bool(np.array_equal(g.forward(samples), f.forward(samples)))

    sizes = measure_sizes(f, seg, c, alphas, ps, seed=seed, workers=workers) if measure else ()
    report = ClosingReport(g, seg, c, support, residual, len(samples), agrees, sizes)
    level = logger.info if report.passed else logger.warning
    level(f"闭合: 残差 {residual:.3e}，外部一致 {agrees}，周期 {seg.k}")
    return report


def closing_pipeline(
    f: HomeoExpr,
    y: ArrayLike,
    eta: float,
    c: float = CLOSING_C,
    retries: int = 3,
    max_iter: int = 10_000,
    measure: bool = True,
    alphas: Sequence[Alpha] = (0.5,),
    ps: Sequence[float] = (2.0,),
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> ClosingReport:
    """find_return + close_orbit；前提不满足时以 η/2 重试，最多 retries 次"""
    current, attempt = eta, 0
    while True:
        seg = find_return(f, y, current, max_iter)
        try:
            return close_orbit(f, seg, c, measure, alphas, ps, seed, workers)
        except PreconditionError as e:
            if attempt >= retries:
                raise
            attempt += 1
            current /= 2.0
            logger.warning(f"{e}；第 {attempt} 次重试，η = {current:g}")


# ---------------------------------------------------------------------------
# 马蹄插入链
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainRadii:
    """r2 = r1 / (20(1 + K1))，r3 = r2 / κ，K0 = 1 / (3κ²)，K1 = κ"""

    r1: float
    kappa: float

    @property
    def k1(self) -> float:
        return self.kappa

    @property
    def k0(self) -> float:
        return 1.0 / (3.0 * self.kappa**2)

    @property
    def r2(self) -> float:
        return self.r1 / (20.0 * (1.0 + self.k1))

    @property
    def r3(self) -> float:
        return self.r2 / self.kappa

    @property
    def length(self) -> float:
        """圆柱长度；连同马蹄标架一起落在 B(x^j, r3) 内"""
        return self.r3 / 2.0

    @property
    def rho(self) -> float:
        return self.k0 * self.length

    @property
    def transport(self) -> float:
        """等距 / 输运移动使用的球半径"""
        return self.r2 / 3.0

    def to_dict(self) -> dict[str, Any]:
        return {
            "r1": self.r1,
            "r2": self.r2,
            "r3": self.r3,
            "kappa": self.kappa,
            "K0": self.k0,
            "K1": self.k1,
            "length": self.length,
            "rho": self.rho,
        }


@dataclass(frozen=True)
class LinkReport:
    """第 link 条链路：C_link 中 N 条子圆柱对 C_target 的穿越证书与包含检验"""

    link: int
    target: int
    certificates: tuple[CrossingCertificate, ...]
    contained: bool
    containment_margin: float

    @property
    def passed(self) -> bool:
        return self.contained and all(self.certificates)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "link": self.link,
            "target": self.target,
            "certificates": [c.to_dict() for c in self.certificates],
            "contained": self.contained,
            "containment_margin": self.containment_margin,
            "passed": self.passed,
        }


@dataclass(frozen=True)
class LinkSize:
    link: int
    holder: float
    sobolev: float

    def to_dict(self) -> dict[str, Any]:
        return {"link": self.link, "holder": self.holder, "sobolev": self.sobolev}


@dataclass(frozen=True)
class ChainReport:
    g: HomeoExpr
    f: HomeoExpr
    segment: ReturnSegment
    n_branches: int
    radii: ChainRadii
    cylinders: tuple[SolidCylinder, ...]
    specs: tuple[HorseshoeSpec, ...]
    corrections: tuple[HomeoExpr, ...]
    links: tuple[LinkReport, ...]
    closure: CrossingCertificate | None = None
    closure_contained: bool = False
    sizes: tuple[LinkSize, ...] = ()
    resolution: float = CERT_RESOLUTION

    @property
    def period(self) -> int:
        return len(self.cylinders)

    @property
    def passed(self) -> bool:
        return (
            all(self.links)
            and self.closure is not None
            and bool(self.closure)
            and self.closure_contained
        )

    @property
    def certificate_count(self) -> int:
        return len(self.links) + (self.closure is not None)

    @property
    def lower_bound(self) -> float | None:
        """全部证书通过时的熵下界 log N"""
        return math.log(self.n_branches) if self.passed else None

    def target_of(self, link: int) -> int:
        return (link + 1) % self.period

    def branch_chart(self, link: int, branch: int) -> HomeoExpr:
        """C_link 中第 branch 条子圆柱的图卡: (τ ∘ f)⁻¹ ∘ chart(S_branch)"""
        spec = self.specs[self.target_of(link)]
        return compose(
            inverse(self.f),
            inverse(self.corrections[link]),
            cylinder_chart(spec.strips[branch]),
        )

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "segment": self.segment.to_dict(),
            "N": self.n_branches,
            "period": self.period,
            "radii": self.radii.to_dict(),
            "cylinders": [c.to_dict() for c in self.cylinders],
            "links": [link.to_dict() for link in self.links],
            "closure": self.closure.to_dict() if self.closure is not None else None,
            "closure_contained": self.closure_contained,
            "certificate_count": self.certificate_count,
            "sizes": [s.to_dict() for s in self.sizes],
            "resolution": self.resolution,
            "passed": self.passed,
            "lower_bound": self.lower_bound,
            "map": self.g.to_dict(),
        }


def _containment(cyl: SolidCylinder, sub: TopologicalCylinder, n: int = 64) -> tuple[bool, float]:
    # 子圆柱与母圆柱共享侧边，按直径的 1e-9 容忍舍入
    sd = cyl.signed_distance(sub.boundary(n))
    return bool(np.all(sd <= 1e-9 * cyl.diameter)), float(-sd.max())


def _std_fit(fn: Any) -> Affine:
    """fn 在标准方块中心附近的三点仿射拟合"""
    d = 0.25
    std = np.array([[0.0, 0.0], [d, 0.0], [0.0, d]])
    y = fn(std)
    matrix = np.column_stack([(y[1] - y[0]) / d, (y[2] - y[0]) / d])
    return Affine.from_arrays(matrix, y[0])


def _pullback(base: HomeoExpr, target_chart: HomeoExpr, g: HomeoExpr, link: int) -> HomeoExpr:
    """
    base 标准方块中 g 的像落在 target_chart 轴向范围 |u| <= 1 内的平行四边形子带。
    新图卡 (s, t) ↦ base(s, u)，u 由拟合的轴向分量 L_u(s, u) = t 解出。
    """
    fit = _std_fit(lambda std: target_chart.backward(g.forward(base.forward(std))))
    a_s, a_u = fit.m[1]
    c_u = fit.b[1]
    if abs(a_u) < 1e-12:
        raise CertificateError(link, "拉回的平行四边形退化：g 没有沿轴向拉伸")
    strip = Affine(((1.0, 0.0), (-a_s / a_u, 1.0 / a_u)), (0.0, -c_u / a_u))
    return compose(base, strip)


def itinerary_chart(report: ChainReport, itinerary: Sequence[int]) -> HomeoExpr:
    """
    C_0 中依次经过 itinerary 所指分支的子圆柱图卡（逐级平行四边形拉回）：
    g^j 把它送进 C_j 的第 itinerary[j] 条子圆柱。
    """
    if len(itinerary) != report.period:
        raise ValueError(f"路径长度必须等于周期 {report.period}，当前: {len(itinerary)}")
    chart = report.branch_chart(report.period - 1, itinerary[-1])
    for j in range(report.period - 2, -1, -1):
        chart = _pullback(report.branch_chart(j, itinerary[j]), chart, report.g, j)
    return chart


def _power(g: HomeoExpr, k: int) -> HomeoExpr:
    return compose(*([g] * k))


def _orbit_points(seg: ReturnSegment) -> Array:
    """周期轨道上摆放圆柱的点 x⁰ … x^{k−1}"""
    return seg.orbit[:-1] if seg.k >= 1 else seg.orbit


def _measure_kappa(
    f: HomeoExpr, points: Array, r1: float, seed: int, workers: int | None
) -> float:
    kappa = 1.0
    for j, x in enumerate(points):
        plan = SamplingPlan.pairs(Box.square(x, r1), count=2000, seed=seed + j)
        kappa = max(kappa, bi_lipschitz_constant(f, plan, workers))
    return kappa


def insert_horseshoe_chain(
    f: HomeoExpr,
    seg: ReturnSegment,
    n: int,
    r1: float,
    resolution: float = CERT_RESOLUTION,
    measure: bool = True,
    strict: bool = True,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
) -> ChainReport:
    """
    在回归段的周期轨道上插入 N 分支马蹄链，返回 g 与 k + 1 个证书（k 条链路与闭合路径）。

    Raises:
        PreconditionError: 球 B(x^j, r1) 两两相交，或与闭合邻域 E 相交
        CertificateError: strict 时任意一条链路证书未通过（link 为链路下标）
    """
    if n < 1:
        raise ValueError(f"分支数 N 必须 >= 1，当前值: {n}")
    if not r1 > 0:
        raise ValueError(f"r1 必须为正数，当前值: {r1}")
    points = _orbit_points(seg)
    k = len(points)
    for i, j in itertools.combinations(range(k), 2):
        if np.linalg.norm(points[i] - points[j]) <= 2.0 * r1:
            raise PreconditionError(f"球 B(x^{i}, r1) 与 B(x^{j}, r1) 相交", index=j)

    radii = ChainRadii(r1, _measure_kappa(f, points, r1, seed, workers))
    logger.info(f"链条参数: κ = {radii.kappa:.4f}，r2 = {radii.r2:.3e}，r3 = {radii.r3:.3e}")
    # 闭合邻域 E 连接 x^k 与 x⁰，中间的球都不能碰到它
    closing = ElongatedNbhd(tuple(seg.end), tuple(points[0]), 10.0 * radii.transport)
    gaps = closing.signed_distance(points[1:]) if k > 1 else np.empty(0)
    for j in np.flatnonzero(gaps <= r1):
        raise PreconditionError(f"球 B(x^{j + 1}, r1) 与闭合邻域 E 相交", index=int(j) + 1)
    axis = np.array([0.0, 1.0])
    cylinders = tuple(
        SolidCylinder.from_center(x, axis, radii.length, radii.rho) for x in points
    )
    specs = tuple(horseshoe_on_cylinder(n, c)[1] for c in cylinders)
    horseshoes = tuple(horseshoe_on_cylinder(n, c)[0] for c in cylinders)

    corrections: list[HomeoExpr] = []
    parts: list[tuple[Region, HomeoExpr]] = []
    for j, cyl in enumerate(cylinders):
        t = (j + 1) % k
        ends = f.forward(np.array([cyl.a, cyl.b]))
        image_center = seg.orbit[j + 1]
        fit = SolidCylinder.from_center(image_center, ends[1] - ends[0], cyl.length, cyl.rho)
        target = cylinders[t]
        if np.array_equal(image_center, target.center):
            tau = cylinder_isometry(fit, target, image_center, radii.transport)
            region: Region = Ball(tuple(target.center), radii.r2)
        else:
            tau = cylinder_transport(
                fit, target, image_center, target.center, radii.transport
            )
            region = ElongatedNbhd(
                tuple(image_center), tuple(target.center), 10.0 * radii.transport
            )
        corrections.append(tau)
        parts.append((region, compose(horseshoes[t], tau)))
    g = compose(piecewise(parts), f)

    report = ChainReport(
        g, f, seg, n, radii, cylinders, specs, tuple(corrections), (), resolution=resolution
    )
    links = []
    for j, cyl in enumerate(cylinders):
        t = report.target_of(j)
        subs = [TopologicalCylinder(report.branch_chart(j, i)) for i in range(n)]
        certs = tuple(check_crossing(g, sub, cylinders[t], resolution, workers) for sub in subs)
        inside = [_containment(cyl, sub) for sub in subs]
        links.append(
            LinkReport(
                j,
                t,
                certs,
                all(ok for ok, _ in inside),
                min(margin for _, margin in inside),
            )
        )
    closure_sub = TopologicalCylinder(itinerary_chart(report, [0] * k))
    closure = check_crossing(_power(g, k), closure_sub, cylinders[0], resolution, workers)
    closure_contained, _ = _containment(cylinders[0], closure_sub)
    sizes = _chain_sizes(f, g, parts, seed, workers) if measure else ()

    report = ChainReport(
        g,
        f,
        seg,
        n,
        radii,
        cylinders,
        specs,
        tuple(corrections),
        tuple(links),
        closure,
        closure_contained,
        sizes,
        resolution,
    )
    failed = [link.link for link in links if not link]
    if failed or not closure or not closure_contained:
        logger.warning(f"马蹄链证书未通过: 失败链路 {failed}，闭合 {bool(closure)}")
        if strict:
            raise CertificateError(failed[0] if failed else k, f"第 {failed or [k]} 条链路未通过")
    else:
        logger.info(f"马蹄链: {report.certificate_count} 个证书全部通过，h_top(g) >= log {n}")
    return report


def _chain_sizes(
    f: HomeoExpr,
    g: HomeoExpr,
    parts: Sequence[tuple[Region, HomeoExpr]],
    seed: int,
    workers: int | None,
    cells: int = 96,
) -> tuple[LinkSize, ...]:
    """每个修正的扰动大小：在 f⁻¹(区域) 上测 ‖f − g‖_{C^{0.5}}，以及 W^{1,2} 距离"""
    finv = inverse(f)
    out = []
    for j, (region, _) in enumerate(parts):
        box = _image_box(finv, region)
        inv_box = _local_box([region])
        plan = SamplingPlan.pairs(box, count=4000, seed=seed + j)
        h = 2.0 * float(box.half[0]) / cells
        out.append(
            LinkSize(
                j,
                holder_distance(f, g, 0.5, plan, workers),
                sobolev_distance(
                    f, g, 2.0, h=h, domain=box, workers=workers, inverse_domain=inv_box
                ),
            )
        )
    return tuple(out)


# ---------------------------------------------------------------------------
# 路径枚举与链条熵
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChainEnumeration:
    """N^k 条路径子圆柱各自在 g^k 下穿越 C_0 的证书"""

    itineraries: tuple[tuple[int, ...], ...]
    certificates: tuple[CrossingCertificate, ...]
    contained: tuple[bool, ...]
    disjoint: bool

    @property
    def passed(self) -> bool:
        return self.disjoint and all(self.certificates) and all(self.contained)

    def __bool__(self) -> bool:
        return self.passed

    def to_dict(self) -> dict[str, Any]:
        return {
            "itineraries": [list(i) for i in self.itineraries],
            "certificates": [c.to_dict() for c in self.certificates],
            "contained": list(self.contained),
            "disjoint": self.disjoint,
            "passed": self.passed,
        }


def enumerate_chain(
    report: ChainReport,
    max_itineraries: int = MAX_ITINERARIES,
    workers: int | None = None,
) -> ChainEnumeration:
    """显式枚举全部 N^k 条路径，逐条验证 g^k 把对应子圆柱穿越 C_0，且子圆柱两两不交"""
    k, n = report.period, report.n_branches
    total = n**k
    if total > max_itineraries:
        raise ValueError(f"路径数 {n}^{k} = {total} 超过上限 {max_itineraries}")
    gk = _power(report.g, k)
    itineraries = tuple(itertools.product(range(n), repeat=k))
    subs = [TopologicalCylinder(itinerary_chart(report, it)) for it in itineraries]
    certs = tuple(
        check_crossing(gk, sub, report.cylinders[0], report.resolution, workers) for sub in subs
    )
    contained = tuple(_containment(report.cylinders[0], sub)[0] for sub in subs)
    centers = np.vstack([sub.chart.forward(np.zeros((1, 2))) for sub in subs])
    disjoint = all(
        not sub.contains(centers[j : j + 1])[0]
        for i, sub in enumerate(subs)
        for j in range(len(subs))
        if i != j
    )
    return ChainEnumeration(itineraries, certs, contained, disjoint)


@dataclass(frozen=True)
class ChainEntropy:
    estimate: EntropyEstimate
    n_branches: int

    @property
    def value(self) -> float:
        return self.estimate.headline

    def to_dict(self) -> dict[str, Any]:
        return {
            "value": self.value,
            "log_N": math.log(self.n_branches),
            "estimate": self.estimate.to_dict(),
        }


def chain_cloud(report: ChainReport, resolution: int = 128) -> Array:
    """全部链条核心上的斜格点云之并，总点数约 resolution²"""
    per = max(16, int(resolution / math.sqrt(report.period)))
    return np.vstack([spec.core_cloud(per) for spec in report.specs])


def chain_entropy(
    report: ChainReport,
    n_range: Sequence[int] = DEFAULT_N_RANGE,
    eps_list: Sequence[float] = DEFAULT_EPS,
    resolution: int = 128,
    seed: int = DEFAULT_SEED,
    workers: int | None = None,
    progress: bool = False,
) -> ChainEntropy:
    """
    g 在全部链条核心的斜格点云上的熵估计；ε 按圆柱长度缩放
    （make_horseshoe 在单位方块上的核心长度为 1/2）。
    """
    scale = report.radii.length / 0.5
    estimate = entropy_estimate(
        report.g,
        n_range=tuple(n_range),
        eps_list=tuple(e * scale for e in eps_list),
        cloud=chain_cloud(report, resolution),
        seed=seed,
        workers=workers,
        progress=progress,
    )
    return ChainEntropy(estimate, report.n_branches)

