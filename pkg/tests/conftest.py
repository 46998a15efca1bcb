"""pytest 共享 fixtures"""

from __future__ import annotations

from collections.abc import Callable
from pathlib import Path

import numpy as np
import pytest

from entrolab.core.estimators import SamplingPlan
from entrolab.core.geometry import Box, SolidCylinder
from entrolab.core.homeo import HomeoExpr
from entrolab.core.horseshoe import Horseshoe, HorseshoeSpec, make_horseshoe


@pytest.fixture
def unit_box() -> Box:
    """单位方块 [0,1]²"""
    return Box.unit()


@pytest.fixture
def vertical_cylinder() -> SolidCylinder:
    """中心 (0.5, 0.5)、竖直轴、长 0.4、半径 0.1 的刚性圆柱"""
    return SolidCylinder.from_center((0.5, 0.5), (0.0, 1.0), 0.4, 0.1)


@pytest.fixture
def horseshoe2(unit_box: Box) -> tuple[Horseshoe, HorseshoeSpec]:
    """单位方块上的 2 分支马蹄"""
    return make_horseshoe(2, unit_box)


@pytest.fixture
def horseshoe3(unit_box: Box) -> tuple[Horseshoe, HorseshoeSpec]:
    """单位方块上的 3 分支马蹄"""
    return make_horseshoe(3, unit_box)


@pytest.fixture
def small_plan(unit_box: Box) -> SamplingPlan:
    """小规模随机点对计划（单元测试用）"""
    return SamplingPlan.pairs(unit_box, count=2000, seed=0)


@pytest.fixture
def random_points() -> np.ndarray:
    """单位方块内 500 个固定种子的随机点"""
    return np.random.default_rng(7).uniform(0.0, 1.0, size=(500, 2))


@pytest.fixture
def roundtrip_error() -> Callable[[HomeoExpr, np.ndarray], float]:
    """m⁻¹(m(x)) 与 x 的最大偏差"""

    def measure(m: HomeoExpr, points: np.ndarray) -> float:
        return float(np.max(np.abs(m.backward(m.forward(points)) - points)))

    return measure


@pytest.fixture
def workdir(tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> Path:
    """在临时目录中运行（CLI 的 reports/ 与 logs/ 写到这里）"""
    monkeypatch.chdir(tmp_path)
    return tmp_path
