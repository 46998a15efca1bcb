"""core/horseshoe 单元测试"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest

from entrolab.core.geometry import Box, RegionSet, SolidCylinder
from entrolab.core.homeo import IDENTITY, Affine, HomeoExpr
from entrolab.core.horseshoe import (
    CrossingCertificate,
    Horseshoe,
    HorseshoeSpec,
    StandardHorseshoe,
    branch_certificate,
    check_crossing,
    horseshoe_on_cylinder,
    make_horseshoe,
    spec_of,
    strip_certificates,
)

# 单元测试用的粗分辨率（相对目标直径）
COARSE = 1e-2


class TestConstruction:
    """make_horseshoe() / horseshoe_on_cylinder()"""

    def test_spec_geometry(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, spec = horseshoe2
        assert h.n == spec.n == 2
        assert len(spec.strips) == 2
        assert spec.square == Box.unit()
        np.testing.assert_allclose(spec.core.center, (0.5, 0.5))

    def test_strips_disjoint_inside_core_box(
        self, horseshoe3: tuple[Horseshoe, HorseshoeSpec]
    ) -> None:
        _, spec = horseshoe3
        RegionSet(spec.strips).check_disjoint()
        for strip in spec.strips:
            assert np.all(Box.unit().contains(strip.corners()))

    def test_support_is_square(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, _ = horseshoe2
        support = h.support
        assert isinstance(support, SolidCylinder)
        np.testing.assert_allclose(
            sorted(map(tuple, support.corners())), sorted(map(tuple, Box.unit().corners()))
        )

    def test_identity_outside_square(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, _ = horseshoe2
        far = np.array([[1.5, 0.5], [-0.2, -0.2], [0.5, 1.01]])
        assert np.array_equal(h.forward(far), far)

    def test_invertible(
        self,
        horseshoe3: tuple[Horseshoe, HorseshoeSpec],
        random_points: np.ndarray,
        roundtrip_error: Callable[[HomeoExpr, np.ndarray], float],
    ) -> None:
        h, _ = horseshoe3
        assert roundtrip_error(h, random_points) < 1e-10

    def test_lipschitz_bound_finite(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, _ = horseshoe2
        assert 1.0 < h.lipschitz_bound < math.inf
        assert 1.0 < h.inverse_lipschitz_bound < math.inf

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5, 6])
    def test_stretch_of_order_n(self, n: int) -> None:
        std = StandardHorseshoe(n)
        assert n < std.stretch <= 1.5 * n
        # 窄带铺满核心轴向的八成以上
        heights = [hi - lo for lo, hi in std.strip_bounds()]
        assert sum(heights) >= 0.8

    def test_lipschitz_bound_linear_in_n(self, unit_box: Box) -> None:
        one = make_horseshoe(1, unit_box)[0].lipschitz_bound
        for n in range(2, 7):
            assert make_horseshoe(n, unit_box)[0].lipschitz_bound <= n * one

    def test_core_cloud(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        _, spec = horseshoe2
        cloud = spec.core_cloud(32)
        assert cloud.shape == (32 * 32, 2)
        assert np.all(spec.core.signed_distance(cloud) <= 1e-12)
        # 轴向坐标两两不同
        axial = spec.core.to_local(cloud)[:, 1]
        assert len(np.unique(np.round(axial, 12))) == 32 * 32

    def test_core_cloud_resolution(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        _, spec = horseshoe2
        with pytest.raises(ValueError, match="分辨率"):
            spec.core_cloud(1)

    def test_zero_branches_rejected(self, unit_box: Box) -> None:
        with pytest.raises(ValueError, match="分支数"):
            make_horseshoe(0, unit_box)

    def test_skew_frame_rejected(self) -> None:
        with pytest.raises(ValueError, match="正交"):
            Horseshoe(2, Affine.from_arrays([[1.0, 0.5], [0.0, 1.0]]))

    def test_on_cylinder_core_matches(self, vertical_cylinder: SolidCylinder) -> None:
        _, spec = horseshoe_on_cylinder(2, vertical_cylinder)
        np.testing.assert_allclose(spec.core.a, vertical_cylinder.a, atol=1e-12)
        np.testing.assert_allclose(spec.core.b, vertical_cylinder.b, atol=1e-12)
        assert spec.core.rho == pytest.approx(vertical_cylinder.rho)

    def test_spec_of_rebuilds_geometry(self, horseshoe3: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, spec = horseshoe3
        rebuilt = spec_of(h)
        assert rebuilt.core == spec.core
        assert rebuilt.strips == spec.strips
        assert rebuilt.square is None

    def test_to_dict(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, _ = horseshoe2
        data = h.to_dict()
        assert data["kind"] == "horseshoe"
        assert data["n"] == 2
        assert data["frame"]["kind"] == "affine"


class TestCrossingCertificate:
    """穿越证书的判定"""

    def test_margin_must_be_positive(self) -> None:
        cert = CrossingCertificate((True, True, True, True), resolution=0.01, margin=0.0)
        assert not cert.passed
        assert not cert

    def test_all_conditions_needed(self) -> None:
        cert = CrossingCertificate((True, True, False, True), resolution=0.01, margin=0.1)
        assert not cert
        assert cert.to_dict()["passed"] is False

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_strips_cross_core(self, unit_box: Box, n: int) -> None:
        h, spec = make_horseshoe(n, unit_box)
        certs = strip_certificates(h, spec, resolution=COARSE)
        assert len(certs) == n
        for cert in certs:
            assert cert.passed, cert.to_dict()
            assert cert.margin > 0.0
            assert cert.samples > 0

    def test_branch_certificate_gives_log_n(
        self, horseshoe3: tuple[Horseshoe, HorseshoeSpec]
    ) -> None:
        h, spec = horseshoe3
        passed, bound = branch_certificate(h, spec, resolution=COARSE)
        assert passed
        assert bound == pytest.approx(math.log(3))

    def test_identity_does_not_cross(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        _, spec = horseshoe2
        cert = check_crossing(IDENTITY, spec.strips[0], spec.core, resolution=COARSE)
        assert not cert
        # 端面留在目标闭包内
        assert cert.conditions[2] is False

    def test_identity_branch_certificate_fails(
        self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]
    ) -> None:
        _, spec = horseshoe2
        assert branch_certificate(IDENTITY, spec, resolution=COARSE) == (False, None)

    def test_rigid_cylinder_horseshoe(self, vertical_cylinder: SolidCylinder) -> None:
        h, spec = horseshoe_on_cylinder(2, vertical_cylinder)
        assert all(strip_certificates(h, spec, resolution=COARSE))

    def test_bad_resolution_rejected(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, spec = horseshoe2
        with pytest.raises(ValueError, match="分辨率"):
            check_crossing(h, spec.strips[0], spec.core, resolution=0.0)

    def test_degenerate_target_rejected(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, spec = horseshoe2
        fat = SolidCylinder((0.5, 0.4), (0.5, 0.6), 0.2)
        with pytest.raises(ValueError, match="退化"):
            check_crossing(h, spec.strips[0], fat, resolution=COARSE)

    @pytest.mark.slow
    def test_default_resolution(self, horseshoe2: tuple[Horseshoe, HorseshoeSpec]) -> None:
        h, spec = horseshoe2
        passed, bound = branch_certificate(h, spec)
        assert passed
        assert bound == pytest.approx(math.log(2))
