#!/usr/bin/env python3
"""
ENTROLAB 命令行主入口
构造映射、运行估计器与构造流程，输出 JSON 报告（以及适用时的 CSV / SVG）
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable
from typing import Any, NoReturn

from cli.verbs import VERBS, RunConfig, run
from entrolab.config import DEFAULT_OUTPUT_DIR, LOGS_DIR, resolve_workers
from entrolab.core.estimators import Alpha
from entrolab.logger import add_file_handler, get_logger, log_banner

# 初始化 logger
logger = get_logger(__name__)

# 各动词与 RunConfig 默认值不同的参数
VERB_DEFAULTS: dict[str, dict[str, Any]] = {
    "appendix-a": {"alpha": (0.0, 0.5, 0.9), "p": (1.0,), "h": 1.0 / 256},
    "seminorm": {"alpha": (0.5, "Lip")},
    "closing-demo": {"alpha": (0.5,), "p": (2.0,)},
}


class _Parser(argparse.ArgumentParser):
    """用法错误以退出码 1 结束（2 留给数学检验失败）。"""

    def error(self, message: str) -> NoReturn:
        self.print_usage(sys.stderr)
        self.exit(1, f"错误: {message}\n")


# ---------------------------------------------------------------------------
# 参数类型
# ---------------------------------------------------------------------------


def _int_range(text: str) -> tuple[int, ...]:
    """``2..8`` 或 ``2,3,5,8``"""
    if ".." in text:
        lo, _, hi = text.partition("..")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(v) for v in text.split(","))


def _float_list(text: str) -> tuple[float, ...]:
    return tuple(float(v) for v in text.split(","))


def _alpha_list(text: str) -> tuple[Alpha, ...]:
    return tuple("Lip" if v.strip() == "Lip" else float(v) for v in text.split(","))


def _floats(count: int) -> Callable[[str], tuple[float, ...]]:
    def parse(text: str) -> tuple[float, ...]:
        values = _float_list(text)
        if len(values) != count:
            raise argparse.ArgumentTypeError(f"需要 {count} 个逗号分隔的数，当前: {text!r}")
        return values

    return parse


# ---------------------------------------------------------------------------
# 参数组
# ---------------------------------------------------------------------------


def _common_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument(
        "--map",
        dest="map_spec",
        help='映射: 命名映射（如 horseshoe:{"N":2}）、JSON 文件路径或原始 JSON',
    )
    parent.add_argument(
        "--out", help=f"输出路径（默认: {DEFAULT_OUTPUT_DIR}/<动词>.json；build 为映射文件）"
    )
    parent.add_argument("--seed", type=int, help="随机种子（默认: ENTROLAB_SEED）")
    parent.add_argument("--workers", type=int, help="worker 线程数（默认: ENTROLAB_WORKERS）")
    parent.add_argument("--tol-conformal", type=float, help="共形容差")
    parent.add_argument("--tol-energy", type=float, help="能量容差")
    parent.add_argument("--tol-entropy", type=float, help="熵容差（相对）")
    return parent


def _sampling_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--n", dest="n_range", type=_int_range, help="n 范围，如 2..8")
    parent.add_argument("--eps", type=_float_list, help="ε 列表，如 0.0625,0.03125")
    parent.add_argument("--cloud", help="熵估计点云: grid:RES 或 pairs:COUNT")
    parent.add_argument("--plan", help="半范数采样计划: grid:RES 或 pairs:COUNT")
    parent.add_argument("--alpha", type=_alpha_list, help="Hölder 指数列表（可含 Lip）")
    parent.add_argument("--p", type=_float_list, help="Sobolev / 连续模指数列表")
    parent.add_argument("--h", type=float, help="网格步长")
    parent.add_argument("--domain", type=_floats(4), help="采样区域 x0,y0,x1,y1")
    parent.add_argument("--against", help="比较映射（计算距离）")
    parent.add_argument("--pairs", type=int, help="连续模实验的点对数")
    return parent


def _certificate_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--resolution", type=float, help="证书分辨率（相对目标直径）")
    parent.add_argument("--source", help='源圆柱 JSON: {"a":[x,y],"b":[x,y],"rho":r}')
    parent.add_argument("--target", help="目标圆柱 JSON（缺省与源相同）")
    return parent


def _dynamics_flags() -> argparse.ArgumentParser:
    parent = argparse.ArgumentParser(add_help=False)
    parent.add_argument("--y", type=_floats(2), help="回归搜索起点 x,y")
    parent.add_argument("--eta", type=float, help="回归半径 η")
    parent.add_argument("--c", type=float, help="细长邻域因子 c")
    parent.add_argument("--N", dest="n_branches", type=int, help="马蹄分支数")
    parent.add_argument("--period", type=int, help="期望的回归时间")
    parent.add_argument("--r1", type=float, help="链条外半径 r1（默认由轨道间距决定）")
    parent.add_argument("--m-max", type=int, help="嵌套方块层数")
    return parent


VERB_FLAGS: dict[str, tuple[str, ...]] = {
    "build": (),
    "entropy": ("sampling", "certificate"),
    "seminorm": ("sampling",),
    "sobolev": ("sampling",),
    "certify": ("sampling", "certificate"),
    "closing-demo": ("sampling", "dynamics"),
    "horseshoe-demo": ("sampling", "certificate", "dynamics"),
    "appendix-a": ("sampling", "dynamics"),
}

VERB_HELP: dict[str, str] = {
    "build": "解析映射并写出规范 JSON",
    "entropy": "Bowen 分离集熵估计（--reconcile 对照证书下界与 Lipschitz 上界）",
    "seminorm": "Hölder 半范数（映射与逆映射）",
    "sobolev": "Sobolev 能量与解析不等式检验",
    "certify": "穿越证书",
    "closing-demo": "闭合引理演示：回归、闭合扰动与扰动大小",
    "horseshoe-demo": "沿周期轨道插入马蹄链并验证证书与熵",
    "appendix-a": "嵌套方块同胚：连续模、截断收敛与熵增长",
}


def _build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="entrolab",
        description="平面同胚的熵与正则性实验工具",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
示例:
  entrolab build --map '{"kind":"identity"}' --out m.json
  entrolab entropy --map 'horseshoe:{"N":2}' --n 2..8 --eps 0.0156 --cloud grid:128
  entrolab certify --map 'rotation:{"angle":1.0}'
  entrolab closing-demo --map golden_twist --eta 0.05
  entrolab horseshoe-demo --map 'rational_twist:{"p":1,"q":5}' --N 2
  entrolab appendix-a --m-max 4 --p 1
        """,
    )
    groups = {
        "sampling": _sampling_flags(),
        "certificate": _certificate_flags(),
        "dynamics": _dynamics_flags(),
    }
    common = _common_flags()
    sub = parser.add_subparsers(dest="verb", metavar="VERB", parser_class=_Parser)
    sub.required = True
    for verb in VERBS:
        parents = [common, *(groups[g] for g in VERB_FLAGS[verb])]
        p = sub.add_parser(verb, parents=parents, help=VERB_HELP[verb])
        if verb == "entropy":
            p.add_argument(
                "--reconcile", action="store_true", help="对照证书下界与 Lipschitz 上界"
            )
        if verb in ("horseshoe-demo", "appendix-a"):
            p.add_argument(
                "--no-entropy", dest="entropy", action="store_false", help="跳过熵估计"
            )
        if verb == "horseshoe-demo":
            p.add_argument("--enumerate", action="store_true", help="显式枚举全部路径")
    return parser


def _parse_args(argv: list[str] | None = None) -> RunConfig:
    """解析 CLI 并返回有效的 RunConfig，无效时以退出码 1 结束进程。"""
    args = _build_parser().parse_args(argv if argv is not None else sys.argv[1:])
    values = {k: v for k, v in vars(args).items() if v is not None}
    options = {**VERB_DEFAULTS.get(args.verb, {}), **values}
    try:
        return RunConfig(**options)
    except ValueError as e:
        logger.error(f"错误: {e}")
        sys.exit(1)


def _print_header(config: RunConfig) -> None:
    """打印运行前的摘要信息。"""
    log_banner(
        logger,
        f"ENTROLAB {config.verb}",
        [
            f"映射: {config.map_spec or '(默认)'}",
            f"种子: {config.seed}",
            f"worker 数: {resolve_workers(config.workers)}",
            f"报告: {config.report_path}",
            f"配置哈希: {config.config_hash}",
        ],
    )


def main(argv: list[str] | None = None) -> None:
    """主入口：解析参数 → 打印摘要 → 执行动词 → 以退出码结束。"""
    config = _parse_args(argv)
    try:
        resolve_workers(config.workers)
    except ValueError as e:
        logger.error(f"错误: {e}")
        sys.exit(1)
    add_file_handler(
        logging.getLogger(), f"{LOGS_DIR}/{config.config_hash[:12]}.log", logging.INFO
    )
    _print_header(config)
    sys.exit(run(config))


if __name__ == "__main__":
    main()
