"""领域异常。数学失败（CLI 退出码 2）与参数错误（退出码 1）由调用方区分。"""

from __future__ import annotations


class EntrolabError(Exception):
    """所有领域异常的基类"""


class DomainError(EntrolabError, ValueError):
    """点落在声明定义域之外，或中间值非有限"""


class OrbitEscapeError(DomainError):
    """轨道在第 step 步离开定义域"""

    def __init__(self, step: int, message: str | None = None) -> None:
        self.step = step
        super().__init__(message or f"轨道在第 {step} 步逃出定义域")


class PreconditionError(EntrolabError, ValueError):
    """操作前提不满足；index 指出违例的对象（区域或轨道下标）"""

    def __init__(self, message: str, index: int | None = None) -> None:
        self.index = index
        super().__init__(message)


class NoReturnError(EntrolabError, RuntimeError):
    """在 max_iter 步内没有找到回归"""


class CertificateError(EntrolabError, RuntimeError):
    """链条中第 link 个穿越证书失败"""

    def __init__(self, link: int, message: str | None = None) -> None:
        self.link = link
        super().__init__(message or f"第 {link} 条链路的穿越证书未通过")


class ConstructionError(EntrolabError, RuntimeError):
    """证书下界超过 Lipschitz 上界：构造自相矛盾"""
