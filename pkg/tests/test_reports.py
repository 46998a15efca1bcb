"""utils/reports 与 utils/parallel 单元测试"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pytest

from entrolab.core.geometry import Ball
from entrolab.utils.parallel import chunk_bounds, chunked_map, map_points
from entrolab.utils.reports import (
    canonical_json,
    config_hash,
    to_plain,
    write_csv,
    write_json,
)


class TestToPlain:
    """to_plain() 的类型转换"""

    def test_numpy_values(self) -> None:
        data = {"a": np.float64(1.5), "b": np.int32(3), "c": np.array([1.0, 2.0]), "d": np.bool_(1)}
        assert to_plain(data) == {"a": 1.5, "b": 3, "c": [1.0, 2.0], "d": True}

    def test_non_finite_becomes_none(self) -> None:
        assert to_plain([float("nan"), float("inf"), 1.0]) == [None, None, 1.0]

    def test_objects_with_to_dict(self) -> None:
        assert to_plain({"region": Ball((0.0, 0.0), 1.0)}) == {
            "region": to_plain(Ball((0.0, 0.0), 1.0).to_dict())
        }

    def test_keys_become_strings(self) -> None:
        assert to_plain({1: "a", (2.0,): "b"}) == {"1": "a", "(2.0,)": "b"}

    def test_sets_are_sorted(self) -> None:
        assert to_plain({3, 1, 2}) == [1, 2, 3]


class TestCanonicalJson:
    """规范 JSON 与配置哈希"""

    def test_key_order_independent(self) -> None:
        assert canonical_json({"b": 1, "a": 2}) == canonical_json({"a": 2, "b": 1})

    def test_trailing_newline(self) -> None:
        assert canonical_json({"a": 1}).endswith("}\n")

    def test_hash_ignores_workers_and_paths(self) -> None:
        base = {"verb": "entropy", "seed": 0}
        assert config_hash({**base, "workers": 1, "out": "a.json"}) == config_hash(
            {**base, "workers": 8, "out": "b.json"}
        )

    def test_hash_depends_on_seed(self) -> None:
        assert config_hash({"seed": 0}) != config_hash({"seed": 1})


class TestWriters:
    """JSON / CSV 文件输出"""

    def test_write_json_creates_parents(self, tmp_path: Path) -> None:
        path = write_json(tmp_path / "nested" / "r.json", {"value": np.float64(0.5)})
        assert json.loads(path.read_text(encoding="utf-8")) == {"value": 0.5}

    def test_write_json_is_byte_stable(self, tmp_path: Path) -> None:
        data = {"x": [1, 2], "y": {"b": 1.0, "a": None}}
        first = write_json(tmp_path / "a.json", data).read_bytes()
        second = write_json(tmp_path / "b.json", data).read_bytes()
        assert first == second

    def test_write_csv_collects_columns(self, tmp_path: Path) -> None:
        rows = [{"n": 2, "S": 4}, {"n": 3, "S": 8, "slope": float("nan")}]
        path = write_csv(tmp_path / "t.csv", rows)
        with path.open(encoding="utf-8") as fh:
            read = list(csv.DictReader(fh))
        assert list(read[0]) == ["n", "S", "slope"]
        assert read[1] == {"n": "3", "S": "8", "slope": ""}

    def test_write_csv_explicit_columns(self, tmp_path: Path) -> None:
        path = write_csv(tmp_path / "t.csv", [{"a": 1, "b": 2}], columns=["b", "a"])
        assert path.read_text(encoding="utf-8").splitlines() == ["b,a", "2,1"]


class TestParallel:
    """固定分块的并行执行"""

    def test_chunk_bounds(self) -> None:
        assert chunk_bounds(7, 3) == [(0, 3), (3, 6), (6, 7)]
        assert chunk_bounds(0, 3) == []

    def test_chunk_must_be_positive(self) -> None:
        with pytest.raises(ValueError, match="chunk"):
            chunk_bounds(5, 0)

    def test_order_preserved(self) -> None:
        out = chunked_map(lambda start, stop: list(range(start, stop)), 10, 3, workers=4)
        assert [x for part in out for x in part] == list(range(10))

    def test_map_points_matches_serial(self, random_points: np.ndarray) -> None:
        def fn(pts: np.ndarray) -> np.ndarray:
            return 2.0 * pts

        serial = map_points(fn, random_points, chunk=64, workers=1)
        threaded = map_points(fn, random_points, chunk=64, workers=4)
        assert np.array_equal(serial, threaded)
        assert np.array_equal(serial, 2.0 * random_points)

    def test_map_points_empty(self) -> None:
        assert map_points(lambda p: p, np.empty((0, 2))).shape == (0, 2)
