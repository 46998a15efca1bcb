"""
映射表达式的 JSON 编解码与命名映射注册表

映射规格字符串的三种写法:
  - 命名映射: ``horseshoe`` 或 ``horseshoe:{"N": 3}``
  - JSON 文件路径: ``m.json``
  - 原始 JSON: ``{"kind": "identity"}``
"""

from __future__ import annotations

import json
from collections.abc import Callable
from pathlib import Path
from typing import Any

from entrolab.core.examples import (
    NestedSquaresMap,
    appendix_a_map,
    golden_twist,
    rational_twist,
    truncation_sequence,
)
from entrolab.core.geometry import Box, SolidCylinder, region_from_dict
from entrolab.core.homeo import (
    IDENTITY,
    Affine,
    AffinityMove,
    Compose,
    HomeoExpr,
    Inverse,
    Piecewise,
    RotationMove,
    TranslationMove,
    Twist,
    rotation_move,
    translation_move,
    twist,
)
from entrolab.core.horseshoe import Horseshoe, horseshoe_on_cylinder, make_horseshoe
from entrolab.logger import get_logger

logger = get_logger(__name__)


# ---------------------------------------------------------------------------
# 表达式树 <-> dict
# ---------------------------------------------------------------------------


def _affine(data: dict[str, Any]) -> Affine:
    return Affine.from_arrays(data["matrix"], data.get("offset", (0.0, 0.0)))


def _cylinder(data: dict[str, Any]) -> SolidCylinder:
    region = region_from_dict(data)
    if not isinstance(region, SolidCylinder):
        raise ValueError(f"需要圆柱区域，得到: {data.get('kind')!r}")
    return region


_DECODERS: dict[str, Callable[[dict[str, Any]], HomeoExpr]] = {
    "identity": lambda d: IDENTITY,
    "affine": _affine,
    "translation": lambda d: TranslationMove(
        tuple(d["p"]), tuple(d["q"]), float(d["r1"]), float(d["r2"]), int(d["steps"])
    ),
    "rotation": lambda d: RotationMove(tuple(d["center"]), float(d["angle"]), float(d["r"])),
    "affinity": lambda d: AffinityMove(
        _cylinder(d["source"]), _cylinder(d["target"]), float(d["margin"]), int(d["steps"])
    ),
    "twist": lambda d: Twist(tuple(d["center"]), tuple(d["radii"]), tuple(d["angles"])),
    "horseshoe": lambda d: Horseshoe(int(d["n"]), _affine(d["frame"])),
    "piecewise": lambda d: Piecewise(
        tuple((region_from_dict(p["region"]), map_from_dict(p["map"])) for p in d["parts"]),
        map_from_dict(d.get("default", {"kind": "identity"})),
    ),
    "nested_squares": lambda d: NestedSquaresMap(
        tuple((region_from_dict(p["region"]), map_from_dict(p["map"])) for p in d["parts"]),
        levels=tuple(d["levels"]),
    ),
    "compose": lambda d: Compose(tuple(map_from_dict(m) for m in d["maps"])),
    "inverse": lambda d: Inverse(map_from_dict(d["child"])),
}


def map_from_dict(data: dict[str, Any]) -> HomeoExpr:
    """
    按 kind 字段逐节点还原表达式树。节点直接构造、不做化简，
    因此 map_from_dict(m.to_dict()).to_dict() == m.to_dict()。

    Raises:
        ValueError: 未知的 kind、缺少字段或参数非法
    """
    if not isinstance(data, dict):
        raise ValueError(f"映射节点必须是 JSON 对象，得到: {type(data).__name__}")
    kind = data.get("kind")
    decoder = _DECODERS.get(str(kind))
    if decoder is None:
        raise ValueError(f"未知的映射类型: {kind!r}（可选: {sorted(_DECODERS)}）")
    try:
        return decoder(data)
    except (KeyError, TypeError, IndexError) as e:
        raise ValueError(f"映射节点 {kind!r} 格式错误: {e}") from e


def map_to_json(m: HomeoExpr) -> str:
    """规范 JSON 文本（键排序、缩进 2、末尾换行），相同的树总是得到相同的字节。"""
    return json.dumps(m.to_dict(), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def map_from_json(text: str) -> HomeoExpr:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ValueError(f"JSON 解析失败: {e}") from e
    return map_from_dict(data)


def save_map(m: HomeoExpr, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(map_to_json(m), encoding="utf-8")
    logger.info(f"映射已写入: {out}")
    return out


def load_map(path: str | Path) -> HomeoExpr:
    return map_from_json(Path(path).read_text(encoding="utf-8"))


# ---------------------------------------------------------------------------
# 命名映射
# ---------------------------------------------------------------------------


def _named_affine(params: dict[str, Any]) -> HomeoExpr:
    return Affine.from_arrays(
        params.get("matrix", ((1.0, 0.0), (0.0, 1.0))), params.get("offset", (0.0, 0.0))
    )


def _named_translation(params: dict[str, Any]) -> HomeoExpr:
    return translation_move(
        params.get("p", (0.0, 0.0)),
        params.get("q", (0.1, 0.0)),
        float(params.get("r1", 0.1)),
        float(params.get("r2", 0.2)),
        **({"steps": int(params["steps"])} if "steps" in params else {}),
    )


def _named_rotation(params: dict[str, Any]) -> HomeoExpr:
    return rotation_move(
        params.get("center", (0.5, 0.5)),
        float(params.get("angle", 1.0)),
        float(params.get("r", 0.2)),
    )


def _named_twist(params: dict[str, Any]) -> HomeoExpr:
    return twist(
        params.get("center", (0.0, 0.0)),
        params.get("radii", (0.1, 0.5, 0.9)),
        params.get("angles", (0.0, 1.0, 0.0)),
    )


def _named_horseshoe(params: dict[str, Any]) -> HomeoExpr:
    n = int(params.get("N", params.get("n", 2)))
    if "cylinder" in params:
        return horseshoe_on_cylinder(n, _cylinder(params["cylinder"]))[0]
    square = Box(tuple(params.get("lo", (0.0, 0.0))), tuple(params.get("hi", (1.0, 1.0))))
    return make_horseshoe(n, square)[0]


NAMED_MAPS: dict[str, Callable[[dict[str, Any]], HomeoExpr]] = {
    "identity": lambda params: IDENTITY,
    "affine": _named_affine,
    "translation": _named_translation,
    "rotation": _named_rotation,
    "twist": _named_twist,
    "golden_twist": lambda params: golden_twist(params.get("center", (0.0, 0.0))),
    "rational_twist": lambda params: rational_twist(
        int(params.get("p", 1)), int(params.get("q", 5)), params.get("center", (0.0, 0.0))
    ),
    "horseshoe": _named_horseshoe,
    "appendix_a": lambda params: appendix_a_map(int(params.get("m_max", params.get("m", 4)))),
    "truncation": lambda params: truncation_sequence(
        int(params.get("m", 2)), int(params.get("m_cap", 6))
    ),
}


def build_named(name: str, params: dict[str, Any] | None = None) -> HomeoExpr:
    builder = NAMED_MAPS.get(name)
    if builder is None:
        raise ValueError(f"未知的命名映射: {name!r}（可选: {sorted(NAMED_MAPS)}）")
    try:
        return builder(params or {})
    except (KeyError, TypeError) as e:
        raise ValueError(f"命名映射 {name!r} 参数错误: {e}") from e


def parse_map(spec: str) -> HomeoExpr:
    """
    解析 --map 参数。

    优先级: 命名映射（``name`` / ``name:{json}``） > 已存在的文件路径 > 原始 JSON。

    Raises:
        ValueError: 无法识别或 JSON 格式错误
    """
    text = spec.strip()
    name, sep, rest = text.partition(":")
    if name in NAMED_MAPS:
        params: dict[str, Any] = {}
        if sep and rest.strip():
            try:
                params = json.loads(rest)
            except json.JSONDecodeError as e:
                raise ValueError(f"命名映射 {name!r} 的参数不是合法 JSON: {e}") from e
            if not isinstance(params, dict):
                raise ValueError(f"命名映射 {name!r} 的参数必须是 JSON 对象")
        return build_named(name, params)
    if not text.startswith("{") and Path(text).is_file():
        logger.debug(f"从文件读取映射: {text}")
        return load_map(text)
    if text.startswith("{"):
        return map_from_json(text)
    raise ValueError(f"无法识别的映射规格: {spec!r}（命名映射、JSON 文件路径或原始 JSON）")
