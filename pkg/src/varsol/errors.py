"""Exception hierarchy shared by all varsol modules."""

from __future__ import annotations


class VarsolError(Exception):
    """Base class for every error raised by varsol."""


class ExprError(VarsolError):
    pass


class ParseError(ExprError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class UnboundVariable(ExprError):
    def __init__(self, name: str):
        super().__init__(f"unbound variable {name!r}")
        self.name = name


class DomainError(ExprError):
    """Arithmetic outside the real domain, e.g. ``log(-1)`` or ``1/0``.

    ``node`` is the offending expression node, kept so callers can point at it.
    """

    def __init__(self, message: str, node=None):
        where = f" in {node}" if node is not None else ""
        super().__init__(message + where)
        self.node = node


class NoConvergence(VarsolError):
    pass


class Singular(VarsolError):
    """Implicit differentiation breaks down (caustic of the implicit solution)."""


class SingularJacobian(Singular):
    pass


class VanishingDenominator(VarsolError):
    pass


class DegenerateFit(VarsolError):
    pass


class ConfigError(VarsolError):
    pass
