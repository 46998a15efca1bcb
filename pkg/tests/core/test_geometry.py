"""core/geometry 单元测试"""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entrolab.core.errors import PreconditionError
from entrolab.core.geometry import (
    Ball,
    Box,
    ElongatedNbhd,
    RegionSet,
    SolidCylinder,
    TopologicalCylinder,
    cloud_diameter,
    contains,
    hausdorff_distance,
    region_from_dict,
    segment_distance,
    well_positioned_ratio,
)
from entrolab.core.homeo import cylinder_chart

coords = st.floats(min_value=-10.0, max_value=10.0, allow_nan=False)
points = st.tuples(coords, coords)


class TestSegmentDistance:
    """segment_distance() 的三种投影情形"""

    def test_projection_inside_segment(self) -> None:
        d = segment_distance([[0.5, 2.0]], (0.0, 0.0), (1.0, 0.0))
        assert d[0] == pytest.approx(2.0)

    def test_nearest_is_p_before_segment(self) -> None:
        d = segment_distance([[-3.0, 4.0]], (0.0, 0.0), (1.0, 0.0))
        assert d[0] == pytest.approx(5.0)

    def test_nearest_is_q_after_segment(self) -> None:
        d = segment_distance([[4.0, 4.0]], (0.0, 0.0), (1.0, 0.0))
        assert d[0] == pytest.approx(5.0)

    def test_degenerate_segment_is_point_distance(self) -> None:
        d = segment_distance([[3.0, 4.0]], (0.0, 0.0), (0.0, 0.0))
        assert d[0] == pytest.approx(5.0)

    @given(x=points, p=points, q=points)
    @settings(max_examples=200, deadline=None)
    def test_never_exceeds_endpoint_distance(
        self, x: tuple[float, float], p: tuple[float, float], q: tuple[float, float]
    ) -> None:
        d = float(segment_distance([x], p, q)[0])
        assert d >= 0.0
        assert d <= math.dist(x, p) + 1e-9
        assert d <= math.dist(x, q) + 1e-9


class TestContains:
    """开 / 闭区域的成员判定"""

    def test_ball_is_open(self) -> None:
        ball = Ball((0.0, 0.0), 1.0)
        assert contains(ball, (0.5, 0.0)) is True
        assert contains(ball, (1.0, 0.0)) is False

    def test_box_is_closed(self, unit_box: Box) -> None:
        assert contains(unit_box, (1.0, 1.0)) is True
        assert contains(unit_box, (1.0 + 1e-9, 0.5)) is False

    def test_elongated_is_open(self) -> None:
        e = ElongatedNbhd((0.0, 0.0), (1.0, 0.0), 0.1)
        assert contains(e, (0.5, 0.05)) is True
        assert contains(e, (1.05, 0.0)) is True
        assert contains(e, (0.5, 0.1)) is False

    def test_cylinder_is_closed(self, vertical_cylinder: SolidCylinder) -> None:
        assert contains(vertical_cylinder, (0.6, 0.6)) is True
        assert contains(vertical_cylinder, (0.61, 0.5)) is False

    def test_array_input_returns_array(self) -> None:
        ball = Ball((0.0, 0.0), 1.0)
        mask = contains(ball, [[0.0, 0.0], [2.0, 0.0]])
        assert mask.tolist() == [True, False]

    @given(x=points)
    @settings(max_examples=200, deadline=None)
    def test_ball_membership_matches_distance(self, x: tuple[float, float]) -> None:
        ball = Ball((1.0, -2.0), 3.0)
        inside = np.linalg.norm(np.subtract(x, (1.0, -2.0))) < 3.0
        assert bool(ball.contains([x])[0]) == inside


class TestRegionValidation:
    """非法参数"""

    def test_nonpositive_radius_rejected(self) -> None:
        with pytest.raises(ValueError, match="半径"):
            Ball((0.0, 0.0), 0.0)

    def test_inverted_box_rejected(self) -> None:
        with pytest.raises(ValueError):
            Box((1.0, 0.0), (0.0, 1.0))

    def test_degenerate_cylinder_rejected(self) -> None:
        with pytest.raises(ValueError, match="端点"):
            SolidCylinder((0.0, 0.0), (0.0, 0.0), 0.1)

    def test_point_shape_checked(self) -> None:
        with pytest.raises(ValueError):
            Ball((0.0, 0.0, 0.0), 1.0)


class TestSolidCylinder:
    """实心圆柱的标架与标记端面"""

    def test_from_center_endpoints(self, vertical_cylinder: SolidCylinder) -> None:
        assert vertical_cylinder.a == pytest.approx((0.5, 0.3))
        assert vertical_cylinder.b == pytest.approx((0.5, 0.7))
        assert vertical_cylinder.length == pytest.approx(0.4)

    def test_local_coordinates(self, vertical_cylinder: SolidCylinder) -> None:
        local = vertical_cylinder.to_local([[0.6, 0.5], [0.5, 0.7]])
        np.testing.assert_allclose(local, [[0.1, 0.0], [0.0, 0.2]], atol=1e-12)

    def test_faces_lie_on_marked_ends(self, vertical_cylinder: SolidCylinder) -> None:
        minus = vertical_cylinder.face(-1, 0.01)
        plus = vertical_cylinder.face(+1, 0.01)
        np.testing.assert_allclose(minus[:, 1], 0.3)
        np.testing.assert_allclose(plus[:, 1], 0.7)
        assert minus[:, 0].min() == pytest.approx(0.4)
        assert minus[:, 0].max() == pytest.approx(0.6)

    def test_boundary_balls_separated(self, vertical_cylinder: SolidCylinder) -> None:
        assert vertical_cylinder.boundary_balls_separated()
        fat = SolidCylinder((0.0, 0.0), (0.0, 0.2), 0.2)
        assert not fat.boundary_balls_separated()

    def test_isometry_ignores_position(self, vertical_cylinder: SolidCylinder) -> None:
        moved = SolidCylinder.from_center((3.0, 1.0), (1.0, 1.0), 0.4, 0.1)
        assert vertical_cylinder.is_isometric_to(moved)
        assert not vertical_cylinder.is_isometric_to(
            SolidCylinder.from_center((0.5, 0.5), (0.0, 1.0), 0.5, 0.1)
        )

    def test_enclosing_radius_and_area(self, vertical_cylinder: SolidCylinder) -> None:
        assert vertical_cylinder.enclosing_radius == pytest.approx(math.hypot(0.2, 0.1))
        assert vertical_cylinder.area == pytest.approx(0.08)


class TestTopologicalCylinder:
    """仿射图卡下的拓扑圆柱与刚性圆柱一致"""

    def test_affine_chart_matches_rigid(self, vertical_cylinder: SolidCylinder) -> None:
        topo = TopologicalCylinder(cylinder_chart(vertical_cylinder))
        np.testing.assert_allclose(topo.std_coords([[0.5, 0.5]]), [[0.0, 0.0]], atol=1e-12)
        np.testing.assert_allclose(topo.face(-1, 5)[:, 1], 0.3, atol=1e-12)
        assert topo.contains([[0.55, 0.65]])[0]
        assert not topo.contains([[0.7, 0.5]])[0]

    def test_axis_trace_runs_bottom_to_top(self, vertical_cylinder: SolidCylinder) -> None:
        trace = TopologicalCylinder(cylinder_chart(vertical_cylinder)).axis_trace(11)
        np.testing.assert_allclose(trace[0], (0.5, 0.3), atol=1e-12)
        np.testing.assert_allclose(trace[-1], (0.5, 0.7), atol=1e-12)


class TestRegionSet:
    """check_disjoint() 与 well_positioned_ratio()"""

    def test_overlap_reports_index(self) -> None:
        rs = RegionSet((Ball((0.0, 0.0), 1.0), Ball((1.5, 0.0), 1.0)))
        with pytest.raises(PreconditionError) as excinfo:
            rs.check_disjoint()
        assert excinfo.value.index == 1

    def test_shared_boundary_is_not_overlap(self) -> None:
        rs = RegionSet((Box((0.0, 0.0), (0.5, 1.0)), Box((0.5, 0.0), (1.0, 1.0))))
        rs.check_disjoint()

    def test_well_positioned_ratio_two_balls(self) -> None:
        rs = RegionSet((Ball((0.0, 0.0), 0.1), Ball((1.0, 0.0), 0.1)))
        # 最大直径 0.2，两圆周的 Hausdorff 距离 1.0
        assert well_positioned_ratio(rs) == pytest.approx(0.2, rel=2e-2)

    def test_well_positioned_needs_two_regions(self) -> None:
        with pytest.raises(ValueError):
            well_positioned_ratio(RegionSet((Ball((0.0, 0.0), 0.1),)))


class TestDistances:
    """Hausdorff 距离与点云直径"""

    def test_hausdorff_of_points(self) -> None:
        assert hausdorff_distance([[0.0, 0.0]], [[3.0, 4.0]]) == pytest.approx(5.0)

    def test_hausdorff_is_symmetric_max(self) -> None:
        a = [[0.0, 0.0], [1.0, 0.0]]
        b = [[0.0, 0.0]]
        assert hausdorff_distance(a, b) == pytest.approx(1.0)
        assert hausdorff_distance(b, a) == pytest.approx(1.0)

    def test_hausdorff_empty_rejected(self) -> None:
        with pytest.raises(ValueError):
            hausdorff_distance(np.empty((0, 2)), [[0.0, 0.0]])

    def test_cloud_diameter_of_square(self, unit_box: Box) -> None:
        assert cloud_diameter(unit_box.corners()) == pytest.approx(math.sqrt(2.0))

    def test_cloud_diameter_collinear(self) -> None:
        assert cloud_diameter([[0.0, 0.0], [1.0, 0.0], [3.0, 0.0]]) == pytest.approx(3.0)

    def test_cloud_diameter_rejects_nan(self) -> None:
        # 只有 Qhull 的退化错误回退到两两比较
        with pytest.raises(ValueError, match="NaN"):
            cloud_diameter([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [math.nan, 0.5]])


class TestRegionDict:
    """to_dict / region_from_dict"""

    @pytest.mark.parametrize(
        "region",
        [
            Ball((0.1, 0.2), 0.3),
            Box((0.0, 0.0), (1.0, 2.0)),
            ElongatedNbhd((0.0, 0.0), (1.0, 1.0), 0.2),
            SolidCylinder((0.0, 0.0), (0.0, 1.0), 0.1),
        ],
    )
    def test_roundtrip(self, region: object) -> None:
        assert region_from_dict(region.to_dict()) == region

    def test_unknown_kind(self) -> None:
        with pytest.raises(ValueError, match="未知的区域类型"):
            region_from_dict({"kind": "triangle"})
