#!/usr/bin/env python3
"""
CLI 动词实现

每个动词返回 VerbResult（结果字典、是否通过、CSV 行、可选的示意图回调），
由 run() 统一写出 JSON 报告（总是）与 CSV / SVG（适用时），并给出退出码:
0 成功，2 数学检验或证书失败，1 用法错误。
"""

from __future__ import annotations

import json
import math
from collections.abc import Callable
from dataclasses import asdict, dataclass, field
from functools import partial
from pathlib import Path
from typing import Any

import numpy as np

from entrolab import __version__
from entrolab.config import (
    CERT_RESOLUTION,
    CLOSING_C,
    DEFAULT_EPS,
    DEFAULT_N_RANGE,
    DEFAULT_OUTPUT_DIR,
    DEFAULT_SEED,
    INEQUALITY_SLACK,
    TOL_CONFORMAL,
    TOL_ENERGY,
    TOL_ENTROPY,
)
from entrolab.core.entropy import entropy_estimate, lipschitz_upper_bound, reconcile
from entrolab.core.errors import EntrolabError
from entrolab.core.estimators import (
    Alpha,
    SamplingPlan,
    bi_lipschitz_constant,
    distortion_field,
    gv_inequality_check,
    holder_distance,
    holder_seminorm,
    inverse_energy_check,
    jacobian_bound_check,
    sobolev_distance,
    sobolev_energy,
)
from entrolab.core.examples import (
    appendix_a_map,
    appendix_entropy,
    modulus_profile,
    truncation_sequence,
)
from entrolab.core.geometry import Array, Ball, Box, SolidCylinder
from entrolab.core.homeo import IDENTITY, HomeoExpr, inverse
from entrolab.core.horseshoe import (
    Horseshoe,
    check_crossing,
    spec_of,
    strip_certificates,
)
from entrolab.core.perturb import (
    MAX_ITINERARIES,
    chain_entropy,
    closing_pipeline,
    enumerate_chain,
    find_return,
    insert_horseshoe_chain,
)
from entrolab.logger import get_logger, log_banner
from entrolab.utils.reports import config_hash, write_csv, write_json
from entrolab.utils.serialization import parse_map, save_map
from entrolab.utils.sketch import sketch_chain, sketch_closing, sketch_horseshoe

logger = get_logger(__name__)

VERBS: tuple[str, ...] = (
    "build",
    "entropy",
    "seminorm",
    "sobolev",
    "certify",
    "closing-demo",
    "horseshoe-demo",
    "appendix-a",
)

# 各动词复现的结论（报告中的 anchor 字段）
ANCHORS: dict[str, str] = {
    "build": "composable homeomorphism expressions survive a JSON round trip",
    "entropy": "an N-branch horseshoe has topological entropy log N",
    "seminorm": "sampled Hölder seminorms of a planar homeomorphism and of its inverse",
    "sobolev": (
        "Sobolev energy double inequality, pointwise Jacobian bound, "
        "oscillation-energy inequality on disks and the inverse-energy bound"
    ),
    "certify": "a map sends a solid cylinder across another solid cylinder",
    "closing-demo": "a recurrent orbit is closed by a small perturbation near the orbit",
    "horseshoe-demo": "a horseshoe chain inserted along a periodic orbit forces entropy log N",
    "appendix-a": (
        "a homeomorphism with infinite entropy and a log-Lipschitz modulus of continuity, "
        "approximated by finite truncations"
    ),
}

# 马蹄链与嵌套方块实验的熵阈值（相对 log N / log m）
CHAIN_ENTROPY_FRACTION = 0.85
APPENDIX_ENTROPY_FRACTION = 0.8
TRUNCATION_LEVELS: tuple[int, ...] = (2, 3, 4, 5)
TRUNCATION_SOBOLEV_P: tuple[float, ...] = (1.5, 2.0)


@dataclass(frozen=True)
class RunConfig:
    """一次运行的完整配置；除 workers 与输出路径外全部参与配置哈希。"""

    verb: str
    map_spec: str | None = None
    against: str | None = None
    out: str | None = None
    seed: int = DEFAULT_SEED
    workers: int | None = None
    n_range: tuple[int, ...] = DEFAULT_N_RANGE
    eps: tuple[float, ...] = DEFAULT_EPS
    cloud: str = "grid:128"
    plan: str = "pairs:20000"
    alpha: tuple[Alpha, ...] = (0.5,)
    p: tuple[float, ...] = (2.0,)
    h: float = 1.0 / 64
    domain: tuple[float, float, float, float] | None = None
    resolution: float = CERT_RESOLUTION
    source: str | None = None
    target: str | None = None
    n_branches: int = 2
    period: int | None = None
    r1: float | None = None
    y: tuple[float, float] = (0.5, 0.0)
    eta: float = 0.05
    c: float = CLOSING_C
    m_max: int = 4
    pairs: int = 100_000
    reconcile: bool = False
    entropy: bool = True
    enumerate: bool = False
    tol_conformal: float = TOL_CONFORMAL
    tol_energy: float = TOL_ENERGY
    tol_entropy: float = TOL_ENTROPY

    def __post_init__(self) -> None:
        if self.verb not in VERBS:
            raise ValueError(f"未知的动词: {self.verb}（可选: {', '.join(VERBS)}）")
        if len(set(self.n_range)) < 4 or min(self.n_range) < 1:
            raise ValueError(f"--n 至少需要 4 个正整数，当前: {self.n_range}")
        if not self.eps or min(self.eps) <= 0:
            raise ValueError(f"--eps 必须为正数，当前: {self.eps}")
        if not self.h > 0:
            raise ValueError(f"--h 必须为正数，当前: {self.h}")
        if self.n_branches < 1:
            raise ValueError(f"--N 必须 >= 1，当前: {self.n_branches}")
        for name in ("eta", "c", "resolution", "tol_conformal", "tol_energy", "tol_entropy"):
            if not getattr(self, name) > 0:
                raise ValueError(f"--{name.replace('_', '-')} 必须为正数")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)

    @property
    def config_hash(self) -> str:
        return config_hash(self.to_dict())

    @property
    def report_path(self) -> Path:
        if self.out:
            return Path(self.out)
        return Path(DEFAULT_OUTPUT_DIR) / f"{self.verb}.json"

    @property
    def tolerances(self) -> dict[str, float]:
        return {
            "conformal": self.tol_conformal,
            "energy": self.tol_energy,
            "entropy": self.tol_entropy,
            "inequality_slack": INEQUALITY_SLACK,
        }


@dataclass
class VerbResult:
    """动词执行结果"""

    result: dict[str, Any]
    passed: bool
    sampling: dict[str, Any] = field(default_factory=dict)
    rows: list[dict[str, Any]] = field(default_factory=list)
    sketch: Callable[[Path], Path] | None = None


# ---------------------------------------------------------------------------
# 参数解析辅助
# ---------------------------------------------------------------------------


def _map(config: RunConfig, default: str) -> HomeoExpr:
    return parse_map(config.map_spec or default)


def _domain(config: RunConfig, m: HomeoExpr) -> Box:
    """--domain 优先；否则取映射支撑的包围盒，支撑未知时为单位方块。"""
    if config.domain is not None:
        x0, y0, x1, y1 = config.domain
        return Box((x0, y0), (x1, y1))
    support = m.support
    if support is None:
        return Box.unit()
    lo, hi = support.bounds()
    return Box(tuple(lo), tuple(hi))


def parse_plan(spec: str, domain: Box, seed: int) -> SamplingPlan:
    """``grid:RES`` 或 ``pairs:COUNT``"""
    kind, _, value = spec.partition(":")
    try:
        number = int(value)
    except ValueError as e:
        raise ValueError(f"采样规格格式应为 grid:RES 或 pairs:COUNT，当前: {spec!r}") from e
    if kind == "grid":
        return SamplingPlan.grid(domain, number)
    if kind == "pairs":
        return SamplingPlan.pairs(domain, number, seed)
    raise ValueError(f"未知的采样类型: {kind!r}（grid / pairs）")


def _cylinder(text: str) -> SolidCylinder:
    """``{"a": [x, y], "b": [x, y], "rho": r}``"""
    try:
        data = json.loads(text)
        return SolidCylinder(tuple(data["a"]), tuple(data["b"]), float(data["rho"]))
    except (KeyError, TypeError) as e:
        raise ValueError(f"圆柱格式错误: {text!r}") from e


# ---------------------------------------------------------------------------
# 动词
# ---------------------------------------------------------------------------


def verb_build(config: RunConfig) -> VerbResult:
    m = _map(config, "identity")
    map_path = config.report_path
    save_map(m, map_path)
    support = m.support
    return VerbResult(
        result={
            "kind": m.kind,
            "map_path": str(map_path),
            "lipschitz_bound": m.lipschitz_bound,
            "inverse_lipschitz_bound": m.inverse_lipschitz_bound,
            "support": support.to_dict() if support is not None else None,
        },
        passed=True,
    )


def _certified_bound(m: HomeoExpr, config: RunConfig) -> float:
    """顶层为马蹄节点时，全部窄带证书通过给出 log N；否则下界取 0"""
    if not isinstance(m, Horseshoe):
        return 0.0
    certs = strip_certificates(m, spec_of(m), config.resolution, config.workers)
    return math.log(m.n) if all(certs) else 0.0


def _entropy_cloud(
    config: RunConfig, m: HomeoExpr, domain: Box
) -> tuple[SamplingPlan | Array, dict[str, Any]]:
    """顶层为马蹄且未指定 --domain 时，网格取在核心的斜格上；否则按 --cloud 采样 domain"""
    plan = parse_plan(config.cloud, domain, config.seed)
    if isinstance(m, Horseshoe) and config.domain is None and plan.kind == "grid":
        cloud = spec_of(m).core_cloud(plan.resolution)
        return cloud, {"kind": "core_lattice", "resolution": plan.resolution}
    return plan, plan.to_dict()


def verb_entropy(config: RunConfig) -> VerbResult:
    m = _map(config, "horseshoe")
    domain = _domain(config, m)
    cloud, cloud_record = _entropy_cloud(config, m, domain)
    estimate = entropy_estimate(
        m,
        n_range=config.n_range,
        eps_list=config.eps,
        cloud=cloud,
        seed=config.seed,
        workers=config.workers,
        progress=True,
    )
    result: dict[str, Any] = {"estimate": estimate.to_dict()}
    passed = not estimate.unreliable
    if config.reconcile:
        lip_plan = SamplingPlan.pairs(domain, 20_000, config.seed)
        lip = bi_lipschitz_constant(m, lip_plan, config.workers)
        cert = _certified_bound(m, config)
        verdict = reconcile(
            estimate,
            cert,
            lipschitz_upper_bound(lip, 2.0),
            tol=config.tol_entropy * cert + 1e-12,
        )
        logger.info(verdict.summary())
        result.update(measured_lipschitz=lip, verdict=verdict.to_dict())
        passed = passed and bool(verdict)
    return VerbResult(
        result=result,
        passed=passed,
        sampling={"cloud": cloud_record, "n_range": list(config.n_range), "eps": config.eps},
        rows=estimate.rows(),
    )


def verb_seminorm(config: RunConfig) -> VerbResult:
    m = _map(config, "identity")
    domain = _domain(config, m)
    plan = parse_plan(config.plan, domain, config.seed)
    reference = parse_map(config.against) if config.against else None
    entries = []
    rows = []
    for alpha in config.alpha:
        fwd = holder_seminorm(m, alpha, plan, config.workers)
        back = holder_seminorm(inverse(m), alpha, plan, config.workers)
        entry: dict[str, Any] = {
            "alpha": alpha,
            "forward": fwd.to_dict(),
            "inverse": back.to_dict(),
        }
        if reference is not None:
            entry["distance"] = holder_distance(m, reference, alpha, plan, config.workers)
        entries.append(entry)
        rows.extend({"alpha": alpha, **row} for row in fwd.rows())
        logger.info(f"α = {alpha}: [m]_α = {fwd.value:.6g}，[m⁻¹]_α = {back.value:.6g}")
    return VerbResult(
        result={"seminorms": entries},
        passed=True,
        sampling={"plan": plan.to_dict()},
        rows=rows,
    )


def verb_sobolev(config: RunConfig) -> VerbResult:
    m = _map(config, "identity")
    domain = _domain(config, m)
    reference = parse_map(config.against) if config.against else None
    energies = []
    passed = True
    for p in config.p:
        energy = sobolev_energy(m, p, config.h, domain, config.workers)
        holds = energy.double_inequality_holds()
        inv = inverse_energy_check(m, domain, p, config.h, config.tol_energy, config.workers)
        entry: dict[str, Any] = {
            "energy": energy.to_dict(),
            "double_inequality": holds,
            "inverse_energy": inv.to_dict(),
        }
        if reference is not None:
            entry["distance"] = sobolev_distance(
                m, reference, p, h=config.h, domain=domain, workers=config.workers
            )
        energies.append(entry)
        passed = passed and holds and bool(inv)

    jac = jacobian_bound_check(m, config.h, domain=domain, workers=config.workers)
    center = np.asarray(domain.center)
    disk = Ball(tuple(center), float(min(domain.half)) / 2.0)
    gv = gv_inequality_check(m, disk, pairs=10_000, seed=config.seed, workers=config.workers)
    distortion = distortion_field(m, config.h, domain, workers=config.workers)
    passed = passed and bool(jac) and bool(gv)
    return VerbResult(
        result={
            "energies": energies,
            "jacobian_bound": jac.to_dict(),
            "gv_inequality": gv.to_dict(),
            "distortion": distortion.to_dict(),
        },
        passed=passed,
        sampling={"h": config.h, "domain": domain.to_dict(), "gv_pairs": 10_000},
        rows=[e["energy"] for e in energies],
    )


def verb_certify(config: RunConfig) -> VerbResult:
    m = _map(config, "horseshoe")
    sketch: Callable[[Path], Path] | None = None
    if config.source or config.target:
        source = _cylinder(config.source or config.target)
        target = _cylinder(config.target or config.source)
        certs = [check_crossing(m, source, target, config.resolution, config.workers)]
        pairs = [{"source": source.to_dict(), "target": target.to_dict()}]
    elif isinstance(m, Horseshoe):
        spec = spec_of(m)
        certs = strip_certificates(m, spec, config.resolution, config.workers)
        pairs = [{"source": s.to_dict(), "target": spec.core.to_dict()} for s in spec.strips]
        sketch = partial(sketch_horseshoe, m, spec)
    else:
        domain = _domain(config, m)
        cyl = SolidCylinder.from_center(
            domain.center, (0.0, 1.0), float(domain.half[1]), float(domain.half[0]) / 4.0
        )
        certs = [check_crossing(m, cyl, cyl, config.resolution, config.workers)]
        pairs = [{"source": cyl.to_dict(), "target": cyl.to_dict()}]
    for i, cert in enumerate(certs):
        failed = [k + 1 for k, ok in enumerate(cert.conditions) if not ok]
        if failed:
            logger.warning(f"证书 {i}: 条件 {failed} 未满足")
    return VerbResult(
        result={
            "certificates": [
                {**pair, **cert.to_dict()} for pair, cert in zip(pairs, certs, strict=True)
            ]
        },
        passed=all(certs),
        sampling={"resolution": config.resolution},
        rows=[
            {"index": i, "passed": cert.passed, "margin": cert.margin, "samples": cert.samples}
            for i, cert in enumerate(certs)
        ],
        sketch=sketch,
    )


def verb_closing_demo(config: RunConfig) -> VerbResult:
    f = _map(config, "golden_twist")
    report = closing_pipeline(
        f,
        config.y,
        config.eta,
        config.c,
        alphas=config.alpha,
        ps=config.p,
        seed=config.seed,
        workers=config.workers,
    )
    rows = [
        {
            "scale": s.scale,
            "radius": s.radius,
            **{f"holder_{k}": v for k, v in s.holder.items()},
            **{f"sobolev_{k}": v for k, v in s.sobolev.items()},
        }
        for s in report.sizes
    ]
    return VerbResult(
        result={"closing": report.to_dict()},
        passed=report.passed and report.sizes_decreasing,
        sampling={"y": list(config.y), "eta": config.eta, "c": config.c, "seed": config.seed},
        rows=rows,
        sketch=partial(sketch_closing, report),
    )


def _default_r1(orbit: np.ndarray) -> float:
    """轨道点两两距离最小值的 0.4 倍，保证 B(x^j, r1) 两两不交"""
    diffs = orbit[:, np.newaxis, :] - orbit[np.newaxis, :, :]
    dist = np.linalg.norm(diffs, axis=2)
    dist[np.diag_indices(len(orbit))] = np.inf
    return 0.4 * float(dist.min())


def verb_horseshoe_demo(config: RunConfig) -> VerbResult:
    f = _map(config, 'rational_twist:{"p": 1, "q": 5}')
    seg = find_return(f, config.y, config.eta)
    if config.period is not None and seg.k != config.period:
        raise ValueError(f"回归时间 {seg.k} 与 --period {config.period} 不符")
    r1 = config.r1 if config.r1 is not None else _default_r1(seg.orbit[:-1])
    report = insert_horseshoe_chain(
        f,
        seg,
        config.n_branches,
        r1,
        config.resolution,
        strict=False,
        seed=config.seed,
        workers=config.workers,
    )
    result: dict[str, Any] = {"chain": report.to_dict()}
    passed = report.passed
    if config.enumerate and config.n_branches**report.period <= MAX_ITINERARIES:
        enumeration = enumerate_chain(report, workers=config.workers)
        result["enumeration"] = enumeration.to_dict()
        passed = passed and bool(enumeration)
    if config.entropy:
        ent = chain_entropy(
            report, config.n_range, config.eps, seed=config.seed, workers=config.workers
        )
        threshold = CHAIN_ENTROPY_FRACTION * math.log(config.n_branches)
        result["entropy"] = {**ent.to_dict(), "threshold": threshold}
        passed = passed and ent.value >= threshold
    return VerbResult(
        result=result,
        passed=passed,
        sampling={
            "y": list(config.y),
            "eta": config.eta,
            "r1": r1,
            "resolution": config.resolution,
            "n_range": list(config.n_range),
            "eps": list(config.eps),
        },
        rows=[
            {"link": link.link, "target": link.target, "passed": link.passed}
            for link in report.links
        ],
        sketch=partial(sketch_chain, report),
    )


def verb_appendix_a(config: RunConfig) -> VerbResult:
    f = appendix_a_map(config.m_max)
    profiles = [
        modulus_profile(f, p, config.pairs, config.seed, config.m_max, config.workers)
        for p in config.p
    ]
    passed = all(profiles)

    plan = SamplingPlan.pairs(Box.unit(), 20_000, config.seed)
    truncation: dict[str, dict[str, list[float]]] = {"holder": {}, "sobolev": {}}
    for alpha in config.alpha:
        truncation["holder"][str(alpha)] = [
            holder_distance(truncation_sequence(m), IDENTITY, alpha, plan, config.workers)
            for m in TRUNCATION_LEVELS
        ]
    for p in TRUNCATION_SOBOLEV_P:
        truncation["sobolev"][f"{p:g}"] = [
            sobolev_distance(
                truncation_sequence(m), IDENTITY, p, p, config.h, workers=config.workers
            )
            for m in TRUNCATION_LEVELS
        ]
    decreasing = all(
        all(a > b for a, b in zip(seq, seq[1:], strict=False))
        for group in truncation.values()
        for seq in group.values()
    )
    passed = passed and decreasing
    result: dict[str, Any] = {
        "modulus": [prof.to_dict() for prof in profiles],
        "truncation": {**truncation, "levels": list(TRUNCATION_LEVELS), "decreasing": decreasing},
    }

    if config.entropy:
        growth = {}
        for m in range(2, config.m_max + 1):
            est = appendix_entropy(
                m, config.n_range, config.eps, seed=config.seed, workers=config.workers
            )
            growth[m] = est.value
        values = [growth[m] for m in sorted(growth)]
        monotone = all(b >= a for a, b in zip(values, values[1:], strict=False))
        above = all(v >= APPENDIX_ENTROPY_FRACTION * math.log(m) for m, v in growth.items())
        result["entropy_growth"] = {
            "values": {str(m): v for m, v in growth.items()},
            "non_decreasing": monotone,
            "above_threshold": above,
        }
        passed = passed and monotone and above
    rows = [{"p": prof.p, **row} for prof in profiles for row in prof.rows()]
    return VerbResult(
        result=result,
        passed=passed,
        sampling={
            "pairs": config.pairs,
            "truncation_plan": plan.to_dict(),
            "h": config.h,
            "m_max": config.m_max,
        },
        rows=rows,
    )


_HANDLERS: dict[str, Callable[[RunConfig], VerbResult]] = {
    "build": verb_build,
    "entropy": verb_entropy,
    "seminorm": verb_seminorm,
    "sobolev": verb_sobolev,
    "certify": verb_certify,
    "closing-demo": verb_closing_demo,
    "horseshoe-demo": verb_horseshoe_demo,
    "appendix-a": verb_appendix_a,
}


# ---------------------------------------------------------------------------
# 调度
# ---------------------------------------------------------------------------


def _envelope(config: RunConfig) -> dict[str, Any]:
    return {
        "version": __version__,
        "verb": config.verb,
        "anchor": ANCHORS[config.verb],
        "config": {
            k: v for k, v in config.to_dict().items() if k not in ("workers", "out")
        },
        "config_hash": config.config_hash,
        "tolerances": config.tolerances,
    }


def run(config: RunConfig) -> int:
    """
    执行动词并写出报告。

    Returns:
        0 成功；2 数学检验 / 证书失败或运行中的 EntrolabError；1 用法错误（参数、JSON、路径）
    """
    report = _envelope(config)
    # build 的 --out 是映射文件本身，报告写在旁边
    report_path = config.report_path
    if config.verb == "build":
        report_path = report_path.with_suffix(".report.json")
    try:
        outcome = _HANDLERS[config.verb](config)
    except EntrolabError as e:
        logger.error(f"❌ {type(e).__name__}: {e}")
        report.update(passed=False, error={"type": type(e).__name__, "message": str(e)})
        report.update(sampling={}, result=None)
        write_json(report_path, report)
        return 2
    except (ValueError, OSError) as e:
        logger.error(f"错误: {e}")
        return 1

    report.update(passed=outcome.passed, sampling=outcome.sampling, result=outcome.result)
    try:
        write_json(report_path, report)
        if outcome.rows:
            write_csv(report_path.with_suffix(".csv"), outcome.rows)
        if outcome.sketch is not None:
            outcome.sketch(report_path.with_suffix(".svg"))
    except OSError as e:
        logger.error(f"错误: 无法写出报告: {e}")
        return 1

    log_banner(
        logger,
        f"{'✅' if outcome.passed else '❌'} {config.verb}",
        [f"报告: {report_path}", f"配置哈希: {config.config_hash}"],
    )
    return 0 if outcome.passed else 2
