"""
ENTROLAB - 平面同胚的熵与正则性实验工具包

提供:
- config: 配置管理
- logger: 日志工具
- core.geometry: 平面几何原语（球、细长邻域、实心圆柱）
- core.homeo: 同胚表达式代数与 bump 流移动
- core.horseshoe: N 分支马蹄构造与穿越证书
- core.examples: 嵌套方块上的无穷熵同胚、扭转映射
- core.estimators: Hölder/Sobolev 估计与解析不等式检验
- core.entropy: Bowen 分离集熵估计
- core.perturb: 闭合引理与马蹄插入流程
- utils.serialization: 映射表达式的 JSON 编解码
"""

from __future__ import annotations

__version__ = "0.1.0"

# 便捷导入
from entrolab.config import (
    DEFAULT_FLOW_STEPS,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    LOGS_DIR,
)
from entrolab.logger import get_logger

__all__ = [
    "DEFAULT_FLOW_STEPS",
    "DEFAULT_SEED",
    "DEFAULT_WORKERS",
    "LOGS_DIR",
    "get_logger",
]
