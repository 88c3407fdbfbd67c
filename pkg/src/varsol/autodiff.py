"""Second-order forward-mode differentiation of expressions.

A :class:`Jet2` carries a value together with its gradient and Hessian with
respect to a fixed ordered list of active variables, and propagates them
through the truncated Taylor algebra.  Values are computed with the same
scalar helpers as :func:`varsol.expr.evaluate`, so ``jet.value`` is bitwise
equal to the plain evaluation.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import numpy as np

from .errors import DomainError, UnboundVariable
from .expr import (
    Call,
    Expression,
    Neg,
    Num,
    Var,
    apply_function,
    as_expression,
    divide,
    real_power,
)


class Jet2:
    __slots__ = ("value", "grad", "hess")

    def __init__(self, value: float, grad: np.ndarray, hess: np.ndarray):
        self.value = value
        self.grad = grad
        self.hess = hess

    @classmethod
    def constant(cls, value: float, m: int) -> "Jet2":
        return cls(value, np.zeros(m), np.zeros((m, m)))

    @classmethod
    def variable(cls, value: float, index: int, m: int) -> "Jet2":
        g = np.zeros(m)
        g[index] = 1.0
        return cls(value, g, np.zeros((m, m)))

    def is_constant(self) -> bool:
        return not (self.grad.any() or self.hess.any())

    def __repr__(self) -> str:
        return f"Jet2(value={self.value!r}, grad={self.grad!r}, hess={self.hess!r})"

    def __neg__(self) -> "Jet2":
        return Jet2(-self.value, -self.grad, -self.hess)

    def __add__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value + other.value, self.grad + other.grad, self.hess + other.hess)

    def __sub__(self, other: "Jet2") -> "Jet2":
        return Jet2(self.value - other.value, self.grad - other.grad, self.hess - other.hess)

    def __mul__(self, other: "Jet2") -> "Jet2":
        a, b = self, other
        cross = np.outer(a.grad, b.grad)
        return Jet2(
            a.value * b.value,
            a.value * b.grad + b.value * a.grad,
            a.value * b.hess + b.value * a.hess + cross + cross.T,
        )

    def chain(self, f0: float, f1: float, f2: float) -> "Jet2":
        """Compose with a scalar function whose value and first two derivatives
        at ``self.value`` are ``f0, f1, f2``."""
        return Jet2(f0, f1 * self.grad, f1 * self.hess + f2 * np.outer(self.grad, self.grad))


def _reciprocal(b: Jet2, node) -> Jet2:
    inv = divide(1.0, b.value, node)
    return b.chain(inv, -inv * inv, 2.0 * inv * inv * inv)


def _div(a: Jet2, b: Jet2, node) -> Jet2:
    if b.is_constant():
        q = divide(a.value, b.value, node)
        return Jet2(q, a.grad / b.value, a.hess / b.value)
    r = a * _reciprocal(b, node)
    r.value = divide(a.value, b.value, node)
    return r


def _pow(a: Jet2, b: Jet2, node) -> Jet2:
    value = real_power(a.value, b.value, node)
    if b.is_constant():
        k = b.value
        if float(k).is_integer():
            k = int(k)
            if k == 0:
                return Jet2.constant(1.0, len(a.grad))
            d1 = k * real_power(a.value, k - 1, node)
            d2 = k * (k - 1) * real_power(a.value, k - 2, node) if k != 1 else 0.0
        else:
            if a.value <= 0.0:
                raise DomainError("derivative of real power at non-positive base", node)
            d1 = k * a.value ** (k - 1.0)
            d2 = k * (k - 1.0) * a.value ** (k - 2.0)
        return a.chain(value, d1, d2)
    # variable exponent: a^b = exp(b log a), differentiable only for a > 0
    if a.value <= 0.0:
        raise DomainError("variable exponent requires a positive base", node)
    la = math.log(a.value)
    log_a = a.chain(la, 1.0 / a.value, -1.0 / (a.value * a.value))
    t = b * log_a
    r = t.chain(value, value, value)
    return r


def _call(fn: str, a: Jet2, node) -> Jet2:
    x = a.value
    v = apply_function(fn, x, node)
    if fn == "sin":
        return a.chain(v, math.cos(x), -v)
    if fn == "cos":
        return a.chain(v, -math.sin(x), -v)
    if fn == "exp":
        return a.chain(v, v, v)
    if fn == "log":
        return a.chain(v, 1.0 / x, -1.0 / (x * x))
    if fn == "tanh":
        s = 1.0 - v * v
        return a.chain(v, s, -2.0 * v * s)
    # sqrt
    if v == 0.0:
        if a.is_constant():
            return Jet2.constant(0.0, len(a.grad))
        raise DomainError("sqrt is not differentiable at 0", node)
    return a.chain(v, 0.5 / v, -0.25 / (v * x))


def _jet(e: Expression, env: Mapping[str, Jet2], m: int) -> Jet2:
    if isinstance(e, Num):
        return Jet2.constant(e.value, m)
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Neg):
        return -_jet(e.arg, env, m)
    if isinstance(e, Call):
        return _call(e.fn, _jet(e.arg, env, m), e)
    a = _jet(e.left, env, m)
    b = _jet(e.right, env, m)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return _div(a, b, e)
    return _pow(a, b, e)


def evaluate_jet2(
    e: Expression | str, active: Sequence[str], point: Mapping[str, float]
) -> Jet2:
    """Value, gradient and Hessian of ``e`` with respect to ``active`` at ``point``.

    Every variable of ``e`` must be bound in ``point``; variables that are not
    active are treated as constants.
    """
    e = as_expression(e)
    m = len(active)
    env = {name: Jet2.constant(float(v), m) for name, v in point.items()}
    for i, name in enumerate(active):
        if name not in point:
            raise UnboundVariable(name)
        env[name] = Jet2.variable(float(point[name]), i, m)
    jet = _jet(e, env, m)
    # mirror the upper triangle so the Hessian is exactly symmetric
    upper = np.triu(jet.hess)
    hess = upper + np.triu(upper, 1).T
    return Jet2(jet.value, jet.grad.copy(), hess)


def derivatives_1d(
    e: Expression | str,
    var: str,
    at: float,
    bindings: Mapping[str, float] | None = None,
) -> tuple[float, float, float]:
    """``(f, f', f'')`` of ``e`` as a function of the single variable ``var``."""
    point = dict(bindings or {})
    point[var] = at
    jet = evaluate_jet2(e, (var,), point)
    return jet.value, float(jet.grad[0]), float(jet.hess[0, 0])
