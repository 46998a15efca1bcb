"""core/examples 单元测试：嵌套方块、截断序列、命名扭转与连续模实验"""

from __future__ import annotations

import math
from collections.abc import Callable

import numpy as np
import pytest

from entrolab.core.errors import DomainError
from entrolab.core.estimators import SamplingPlan, holder_distance
from entrolab.core.examples import (
    NestedSquares,
    NestedSquaresMap,
    annulus_twist,
    appendix_a_map,
    appendix_entropy,
    constant_twist,
    golden_twist,
    modulus_drift,
    modulus_profile,
    rational_twist,
    truncation_sequence,
)
from entrolab.core.geometry import Box
from entrolab.core.homeo import IDENTITY, HomeoExpr, Piecewise, iterate

# 128² 点云上 S(n, ε) 不超过 16384；b(n) >= 3 时 n = 7, 8 的计数已饱和
COUNT_CEILING = "128x128 点云的计数上限压低了 3、4 分支的拟合斜率"


class TestNestedSquares:
    """Q_n、A_n 与 R_n"""

    def test_square_and_inner(self) -> None:
        squares = NestedSquares(3)
        assert squares.square(1) == Box((0.5, 0.5), (1.0, 1.0))
        assert squares.square(3) == Box((0.125, 0.125), (0.25, 0.25))
        inner = squares.inner(1)
        np.testing.assert_allclose(inner.lo, (0.5 + 1.0 / 6.0, 0.5 + 1.0 / 6.0))
        np.testing.assert_allclose(inner.hi, (0.5 + 2.0 / 6.0, 0.5 + 2.0 / 6.0))

    def test_affine_maps_unit_square(self) -> None:
        corners = NestedSquares.affine(2).forward(Box.unit().corners())
        np.testing.assert_allclose(corners, Box((0.25, 0.25), (0.5, 0.5)).corners())

    def test_square_index(self) -> None:
        squares = NestedSquares(3)
        pts = [[0.75, 0.75], [0.3, 0.3], [0.5, 0.5], [0.3, 0.75], [0.01, 0.01], [0.0, 0.5]]
        assert squares.square_index(pts).tolist() == [1, 2, 1, 0, 0, 0]

    def test_invalid_depth(self) -> None:
        with pytest.raises(ValueError, match="m_max"):
            NestedSquares(0)


class TestNestedSquaresMap:
    """嵌套方块同胚与截断"""

    def test_structure(self) -> None:
        f = appendix_a_map(3)
        assert isinstance(f, NestedSquaresMap)
        assert isinstance(f, Piecewise)
        assert f.levels == (1, 2, 3)
        assert len(f.parts) == 3
        assert [h.n for _, h in f.parts] == [1, 2, 3]

    def test_identity_off_squares(self) -> None:
        f = appendix_a_map(3)
        pts = np.array([[0.3, 0.75], [0.9, 0.1], [-0.5, 0.2]])
        assert np.array_equal(f.forward(pts), pts)

    def test_squares_invariant(self, random_points: np.ndarray) -> None:
        f = appendix_a_map(2)
        squares = NestedSquares(2)
        q2 = squares.square(2)
        pts = q2.lo + random_points * (np.asarray(q2.hi) - np.asarray(q2.lo))
        assert np.all(q2.contains(f.forward(pts)))

    def test_invertible(
        self,
        random_points: np.ndarray,
        roundtrip_error: Callable[[HomeoExpr, np.ndarray], float],
    ) -> None:
        assert roundtrip_error(appendix_a_map(3), random_points) < 1e-10

    def test_dispatch_matches_linear_scan(self, random_points: np.ndarray) -> None:
        f = appendix_a_map(3)
        scan = Piecewise(f.parts)
        # 落在 Q_1 … Q_3 以及更深的方块（恒等）
        pts = np.vstack([random_points * 0.5, [[0.5, 0.5], [0.25, 0.4], [0.5, 0.75]]])
        np.testing.assert_allclose(f.forward(pts), scan.forward(pts), atol=1e-14)
        np.testing.assert_allclose(f.backward(pts), scan.backward(pts), atol=1e-14)

    def test_levels_must_match_parts(self) -> None:
        f = appendix_a_map(2)
        with pytest.raises(ValueError, match="levels"):
            NestedSquaresMap(f.parts, levels=(1,))

    def test_custom_branches(self) -> None:
        f = appendix_a_map(2, branch_of=lambda n: 2)
        assert [h.n for _, h in f.parts] == [2, 2]

    def test_invalid_branches(self) -> None:
        with pytest.raises(ValueError, match="分支数"):
            appendix_a_map(2, branch_of=lambda n: 0)

    def test_invalid_depth(self) -> None:
        with pytest.raises(ValueError, match="m_max"):
            appendix_a_map(0)

    def test_truncation_levels(self) -> None:
        f = truncation_sequence(3, m_cap=5)
        assert isinstance(f, NestedSquaresMap)
        assert f.levels == (3, 4, 5)
        assert [h.n for _, h in f.parts] == [3, 4, 5]
        assert truncation_sequence(7, m_cap=6) is IDENTITY

    def test_truncations_approach_identity(self) -> None:
        plan = SamplingPlan.pairs(count=20_000, seed=0)
        coarse, fine = (
            holder_distance(truncation_sequence(m), IDENTITY, 0.5, plan) for m in (2, 4)
        )
        assert coarse > fine > 0.0


class TestTwists:
    """环形扭转"""

    def test_rational_twist_period(self) -> None:
        m = rational_twist(1, 5)
        orbit = iterate(m, (0.5, 0.0), 5)
        np.testing.assert_allclose(orbit[5], orbit[0], atol=1e-12)
        assert np.min(np.linalg.norm(orbit[1:5] - orbit[0], axis=1)) > 0.1

    def test_golden_twist_never_returns_exactly(self) -> None:
        orbit = iterate(golden_twist(), (0.5, 0.0), 20)
        assert np.min(np.linalg.norm(orbit[1:] - orbit[0], axis=1)) > 1e-3

    def test_radius_preserved(self) -> None:
        orbit = iterate(golden_twist(), (0.3, 0.4), 50)
        np.testing.assert_allclose(np.linalg.norm(orbit, axis=1), 0.5)

    def test_fixed_outside_annulus(self) -> None:
        m = constant_twist(1.0)
        pts = np.array([[0.05, 0.0], [0.95, 0.0]])
        assert np.array_equal(m.forward(pts), pts)

    def test_zero_angle_is_identity(self) -> None:
        assert constant_twist(0.0) is IDENTITY

    def test_invalid_denominator(self) -> None:
        with pytest.raises(ValueError, match="q 必须"):
            rational_twist(1, 0)

    def test_support_must_fit_domain(self, unit_box: Box) -> None:
        with pytest.raises(DomainError):
            annulus_twist((0.1, 0.5, 0.9), (0.0, 1.0, 0.0), (0.5, 0.5), domain=unit_box)

    def test_support_inside_domain(self) -> None:
        domain = Box((-1.0, -1.0), (1.0, 1.0))
        m = annulus_twist((0.1, 0.5, 0.9), (0.0, 1.0, 0.0), domain=domain)
        assert m is not IDENTITY


class TestModulus:
    """连续模实验"""

    def test_drift(self) -> None:
        assert modulus_drift({-2: 1.0, -3: 1.0, -4: 1.05}) == pytest.approx(0.05)
        assert modulus_drift({-2: 1.0, -3: 0.5}) == 0.0
        assert modulus_drift({}) == 0.0

    def test_drift_ignores_large_scale_rise(self) -> None:
        # 只看尺度最小的三个十进位
        histogram = {-2: 1.0, -3: 2.0, -4: 2.1, -5: 2.0, -6: 1.9}
        assert modulus_drift(histogram) == 0.0
        assert modulus_drift({**histogram, -6: 2.2}) == pytest.approx(0.1)

    def test_identity_profile(self) -> None:
        profile = modulus_profile(IDENTITY, 1.0, pairs=2000, seed=0)
        # 恒等映射的比值为 1 / log(1/t)，尺度越小越小
        assert profile.delta == pytest.approx(1.0 / 16.0)
        assert profile.constant <= 1.0 / math.log(16.0) + 1e-12
        assert profile.drift == 0.0
        assert profile
        assert [r["decade"] for r in profile.rows()] == sorted(profile.histogram)

    def test_same_samples_in_every_decade(self) -> None:
        profile = modulus_profile(IDENTITY, 1.0, pairs=1000, seed=0)
        assert sorted(profile.histogram) == [-6, -5, -4, -3, -2]
        assert profile.pairs == 1000
        # 同一批方向与尾数：恒等映射的十进位最大值随尺度单调下降
        values = [profile.histogram[d] for d in sorted(profile.histogram, reverse=True)]
        assert values == sorted(values, reverse=True)

    def test_delta_below_smallest_scale(self) -> None:
        with pytest.raises(ValueError, match="没有可采样"):
            modulus_profile(IDENTITY, 20.0)

    def test_deterministic(self) -> None:
        f = appendix_a_map(2)
        a = modulus_profile(f, 1.0, pairs=2000, seed=5, m_max=2)
        b = modulus_profile(f, 1.0, pairs=2000, seed=5, m_max=2)
        assert a == b

    def test_invalid_arguments(self) -> None:
        with pytest.raises(ValueError, match="p 必须"):
            modulus_profile(IDENTITY, 0.0)
        with pytest.raises(ValueError, match="点对数量"):
            modulus_profile(IDENTITY, 1.0, pairs=0)

    @pytest.mark.slow
    def test_appendix_map_modulus_p1(self) -> None:
        assert modulus_profile(appendix_a_map(4), 1.0, pairs=100_000)


class TestPerSquareEntropy:
    """逐方块熵估计"""

    def test_per_square_keys(self) -> None:
        result = appendix_entropy(2, n_range=(2, 3, 4, 5), eps_list=(2.0**-3,), resolution=24)
        assert set(result.per_square) == {1, 2}
        # ε 按 R_n 的边长 2^{-n}/3 缩放
        assert result.per_square[1].eps_list == pytest.approx((2.0**-4 / 3.0,))
        assert result.per_square[2].eps_list == pytest.approx((2.0**-5 / 3.0,))
        assert result.value == max(e.headline for e in result.per_square.values())
        assert set(result.to_dict()["per_square"]) == {"1", "2"}

    @pytest.mark.slow
    def test_two_branch_square(self) -> None:
        result = appendix_entropy(2)
        assert result.per_square[2].headline >= 0.8 * math.log(2)

    @pytest.mark.slow
    @pytest.mark.xfail(strict=False, reason=COUNT_CEILING)
    def test_entropy_grows_with_depth(self) -> None:
        result = appendix_entropy(4)
        headlines = [result.per_square[n].headline for n in range(2, 5)]
        assert headlines == sorted(headlines)
        for n, h in zip(range(2, 5), headlines, strict=True):
            assert h >= 0.8 * math.log(n)
