"""core/perturb 单元测试：回归段、闭合扰动与马蹄插入链"""

from __future__ import annotations

import math

import numpy as np
import pytest

from entrolab.core.errors import NoReturnError, PreconditionError
from entrolab.core.examples import golden_twist, rational_twist
from entrolab.core.homeo import IDENTITY, Affine
from entrolab.core.perturb import (
    ChainRadii,
    ChainReport,
    ReturnSegment,
    chain_entropy,
    close_orbit,
    closing_pipeline,
    enumerate_chain,
    find_return,
    insert_horseshoe_chain,
    measure_sizes,
)

EXPAND = Affine.from_arrays(2.0 * np.eye(2))
COARSE = 1e-2


@pytest.fixture
def fixed_chain() -> ChainReport:
    """不动点上的单链路双分支马蹄链"""
    seg = find_return(IDENTITY, (0.5, 0.5), 0.05)
    return insert_horseshoe_chain(IDENTITY, seg, 2, 0.05, resolution=COARSE, measure=False)


class TestFindReturn:
    """find_return()"""

    def test_golden_twist_returns_at_fibonacci_time(self) -> None:
        seg = find_return(golden_twist(), (0.5, 0.0), 0.05)
        assert seg.k == 377
        assert 0.0 < seg.rho < 0.005
        assert seg.exclusion_violations() == []

    def test_fixed_point(self) -> None:
        seg = find_return(IDENTITY, (0.3, 0.7), 0.1)
        assert seg.k == 1
        assert seg.rho == 0.0

    def test_rational_twist_period(self) -> None:
        seg = find_return(rational_twist(1, 3), (0.5, 0.0), 0.05)
        assert seg.k == 3
        assert seg.rho < 1e-12

    def test_expanding_map_never_returns(self) -> None:
        with pytest.raises(NoReturnError):
            find_return(EXPAND, (0.5, 0.5), 0.05, max_iter=50)

    def test_eta_must_be_positive(self) -> None:
        with pytest.raises(ValueError, match="η 必须"):
            find_return(IDENTITY, (0.5, 0.5), 0.0)

    def test_to_dict(self) -> None:
        data = find_return(IDENTITY, (0.3, 0.7), 0.1).to_dict()
        assert data["k"] == 1
        assert data["x0"] == data["xk"]


class TestClosing:
    """闭合扰动 g = f ∘ φ"""

    def test_periodic_segment_keeps_map(self) -> None:
        report = closing_pipeline(IDENTITY, (0.5, 0.5), 0.1, measure=False)
        assert report.g is IDENTITY
        assert report.support is None
        assert report

    def test_golden_twist_closes(self) -> None:
        f = golden_twist()
        report = closing_pipeline(f, (0.5, 0.0), 0.05, measure=False)
        assert report.passed, report.to_dict()
        assert report.residual <= 1e-9
        assert report.exterior_agrees
        assert report.exterior_samples > 0
        assert report.sizes == ()
        # 周期轨道上的点在 g 下有周期 k
        seg = report.segment
        z = seg.end[np.newaxis, :]
        for _ in range(seg.k):
            z = report.g.forward(z)
        np.testing.assert_allclose(z[0], seg.end, atol=1e-9)

    def test_midpoint_inside_support(self) -> None:
        orbit = np.array([[0.0, 0.0], [0.05, 0.0], [0.1, 0.0]])
        seg = ReturnSegment((0.0, 0.0), 0.2, orbit)
        with pytest.raises(PreconditionError) as excinfo:
            close_orbit(IDENTITY, seg, measure=False)
        assert excinfo.value.index == 1

    def test_c_must_be_positive(self) -> None:
        seg = find_return(IDENTITY, (0.3, 0.7), 0.1)
        with pytest.raises(ValueError, match="c 必须"):
            close_orbit(IDENTITY, seg, c=0.0)

    def test_lipschitz_size_keeps_its_label(self) -> None:
        orbit = np.array([[0.5, 0.5], [0.52, 0.5]])
        seg = ReturnSegment((0.5, 0.5), 0.1, orbit)
        sizes = measure_sizes(IDENTITY, seg, alphas=(0.5, "Lip"), ps=(2.0,), pairs=400, cells=16)
        assert len(sizes) == 3
        for size in sizes:
            assert set(size.holder) == {"0.5", "Lip"}
            assert size.holder["Lip"] > 0.0

    @pytest.mark.slow
    def test_sizes_shrink_with_support(self) -> None:
        report = closing_pipeline(golden_twist(), (0.5, 0.0), 0.05)
        assert len(report.sizes) == 3
        assert report.sizes_decreasing


class TestChainRadii:
    """链条半径的常数关系"""

    def test_radii(self) -> None:
        radii = ChainRadii(0.1, 2.0)
        assert radii.k1 == 2.0
        assert radii.k0 == pytest.approx(1.0 / 12.0)
        assert radii.r2 == pytest.approx(0.1 / 60.0)
        assert radii.r3 == pytest.approx(0.1 / 120.0)
        assert radii.length == pytest.approx(radii.r3 / 2.0)
        assert radii.rho == pytest.approx(radii.length / 12.0)
        assert radii.to_dict()["K0"] == pytest.approx(1.0 / 12.0)


class TestHorseshoeChain:
    """insert_horseshoe_chain() / enumerate_chain()"""

    def test_fixed_point_chain(self, fixed_chain: ChainReport) -> None:
        assert fixed_chain.passed, fixed_chain.to_dict()
        assert fixed_chain.period == 1
        assert fixed_chain.certificate_count == 2
        assert fixed_chain.radii.kappa == pytest.approx(1.0)
        assert fixed_chain.lower_bound == pytest.approx(math.log(2))

    def test_enumeration(self, fixed_chain: ChainReport) -> None:
        result = enumerate_chain(fixed_chain)
        assert result.itineraries == ((0,), (1,))
        assert result.disjoint
        assert result
        assert result.to_dict()["passed"] is True

    def test_enumeration_limit(self, fixed_chain: ChainReport) -> None:
        with pytest.raises(ValueError, match="超过上限"):
            enumerate_chain(fixed_chain, max_itineraries=1)

    def test_intersecting_balls(self) -> None:
        seg = find_return(rational_twist(1, 3), (0.5, 0.0), 0.05)
        with pytest.raises(PreconditionError):
            insert_horseshoe_chain(rational_twist(1, 3), seg, 2, 0.5, measure=False)

    def test_ball_meets_closing_neighbourhood(self) -> None:
        # x¹ 离 x² 到 x⁰ 的闭合线段只有 0.02 < r1
        orbit = np.array([[0.3, 0.5], [0.5, 0.52], [0.7, 0.5]])
        seg = ReturnSegment((0.3, 0.5), 0.5, orbit)
        with pytest.raises(PreconditionError, match="闭合邻域") as excinfo:
            insert_horseshoe_chain(IDENTITY, seg, 2, 0.05, measure=False)
        assert excinfo.value.index == 1

    def test_invalid_arguments(self) -> None:
        seg = find_return(IDENTITY, (0.5, 0.5), 0.05)
        with pytest.raises(ValueError, match="分支数"):
            insert_horseshoe_chain(IDENTITY, seg, 0, 0.05)
        with pytest.raises(ValueError, match="r1 必须"):
            insert_horseshoe_chain(IDENTITY, seg, 2, 0.0)

    @pytest.mark.slow
    def test_period_three_chain(self) -> None:
        f = rational_twist(1, 3)
        seg = find_return(f, (0.5, 0.0), 0.05)
        report = insert_horseshoe_chain(f, seg, 2, 0.05)
        assert report.period == 3
        assert report.certificate_count == 4
        assert enumerate_chain(report)

    @pytest.mark.slow
    def test_chain_entropy(self, fixed_chain: ChainReport) -> None:
        result = chain_entropy(fixed_chain)
        assert result.value >= 0.85 * math.log(2)

    @pytest.mark.slow
    def test_period_five_chain_entropy(self) -> None:
        f = rational_twist(1, 5)
        seg = find_return(f, (0.5, 0.0), 0.05)
        report = insert_horseshoe_chain(f, seg, 2, 0.05, measure=False)
        assert report.period == 5
        assert report.certificate_count == 6
        assert report.passed
        assert chain_entropy(report).value >= 0.85 * math.log(2)
