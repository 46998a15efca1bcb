"""
SVG 示意图（Agg 后端，仅供查看，不会被读回）
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import numpy as np  # noqa: E402
from matplotlib.axes import Axes  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

from entrolab.core.geometry import Array, Region, SolidCylinder  # noqa: E402
from entrolab.core.homeo import HomeoExpr  # noqa: E402
from entrolab.core.horseshoe import HorseshoeSpec  # noqa: E402
from entrolab.core.perturb import ChainReport, ClosingReport  # noqa: E402
from entrolab.logger import get_logger  # noqa: E402

logger = get_logger(__name__)

# 固定 SVG 内部 id 与元数据，相同输入得到相同文件
matplotlib.rcParams["svg.hashsalt"] = "entrolab"
_SVG_METADATA = {"Date": None, "Creator": None}


def _closed(points: Array) -> Array:
    return np.vstack([points, points[:1]])


def _outline(ax: Axes, region: Region, **style: object) -> None:
    if isinstance(region, SolidCylinder):
        pts = region.corners()
    else:
        pts = region.boundary_cloud(region.diameter / 200.0)
    loop = _closed(pts)
    ax.plot(loop[:, 0], loop[:, 1], **style)


def _save(fig: Figure, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out, format="svg", metadata=_SVG_METADATA)
    logger.info(f"示意图已写入: {out}")
    return out


def _new_axes(title: str) -> tuple[Figure, Axes]:
    fig = Figure(figsize=(6, 6))
    ax = fig.add_subplot(1, 1, 1)
    ax.set_aspect("equal")
    ax.set_title(title)
    return fig, ax


def sketch_closing(report: ClosingReport, path: str | Path) -> Path:
    """闭合构型：回归段轨道、x⁰ / x^k 与扰动支撑 E"""
    seg = report.segment
    fig, ax = _new_axes(f"closing k={seg.k}, rho={seg.rho:.3g}")
    orbit = seg.orbit
    ax.plot(orbit[:, 0], orbit[:, 1], ".", ms=2, color="0.5", label="orbit")
    ax.plot(*seg.x, "o", color="tab:blue", label="x0")
    ax.plot(*seg.end, "x", color="tab:red", label="xk")
    if report.support is not None:
        _outline(ax, report.support, color="tab:green", lw=1, label="E")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def sketch_horseshoe(m: HomeoExpr, spec: HorseshoeSpec, path: str | Path) -> Path:
    """马蹄核心、窄带与核心边界的像"""
    fig, ax = _new_axes(f"horseshoe N={spec.n}")
    _outline(ax, spec.core, color="k", lw=1, label="core")
    for strip in spec.strips:
        _outline(ax, strip, color="tab:blue", lw=0.6)
    boundary = _closed(spec.core.boundary_cloud(spec.core.diameter / 2000.0))
    image = m.forward(boundary)
    ax.plot(image[:, 0], image[:, 1], color="tab:red", lw=0.8, label="image of core")
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)


def sketch_chain(report: ChainReport, path: str | Path) -> Path:
    """马蹄链：周期轨道与各圆柱 C_j"""
    fig, ax = _new_axes(f"chain N={report.n_branches}, period={report.period}")
    orbit = report.segment.orbit
    ax.plot(orbit[:, 0], orbit[:, 1], "o", ms=3, color="0.3", label="orbit")
    for j, cyl in enumerate(report.cylinders):
        color = "tab:green" if report.links[j] else "tab:red"
        _outline(ax, cyl, color=color, lw=0.8)
    ax.legend(loc="upper right", fontsize="small")
    return _save(fig, path)
