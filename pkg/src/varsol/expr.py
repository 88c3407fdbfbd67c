"""A small arithmetic expression language.

F functions and Lagrangians are written as plain text such as
``"sqrt(g1^2+g2^2)"`` or ``"a*exp(b*phi)"`` and parsed into an immutable tree.

Grammar::

    expr    := term (("+" | "-") term)*
    term    := factor (("*" | "/") factor)*
    factor  := unary ("^" factor)?
    unary   := "-" unary | primary
    primary := number | ident | ident "(" expr ")" | "(" expr ")"

Note that unary minus binds tighter than ``^``: ``-x^2`` means ``(-x)^2``.

Reserved names by convention: ``phi`` (single field), ``phi1..phiM`` (several
fields), ``g1..gN`` (gradient slots of one field) and ``dA_J`` (slot for the
derivative of field A along coordinate J).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Mapping, Union

from .errors import DomainError, ParseError, UnboundVariable

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt", "tanh")
IDENT_RE = re.compile(r"[a-zA-Z][a-zA-Z0-9_]*")


@dataclass(frozen=True)
class Num:
    value: float

    def __str__(self) -> str:
        return _fmt_number(self.value)


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not IDENT_RE.fullmatch(self.name):
            raise ValueError(f"invalid identifier {self.name!r}")

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Neg:
    arg: "Expression"

    def __str__(self) -> str:
        return "-" + _wrap(self.arg, _UNARY)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / ^
    left: "Expression"
    right: "Expression"

    def __str__(self) -> str:
        if self.op in "+-":
            return f"{_wrap(self.left, _EXPR)}{self.op}{_wrap(self.right, _TERM)}"
        if self.op in "*/":
            return f"{_wrap(self.left, _TERM)}{self.op}{_wrap(self.right, _FACTOR)}"
        return f"{_wrap(self.left, _UNARY)}^{_wrap(self.right, _FACTOR)}"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expression"

    def __post_init__(self):
        if self.fn not in FUNCTIONS:
            raise ValueError(f"unknown function {self.fn!r}")

    def __str__(self) -> str:
        return f"{self.fn}({self.arg})"


Expression = Union[Num, Var, Neg, BinOp, Call]

# Grammar levels, loosest to tightest.
_EXPR, _TERM, _FACTOR, _UNARY = range(4)


def _level(e: Expression) -> int:
    if isinstance(e, BinOp):
        return {"+": _EXPR, "-": _EXPR, "*": _TERM, "/": _TERM, "^": _FACTOR}[e.op]
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return _EXPR  # a negative literal prints with a sign and needs protection
    return _UNARY


def _wrap(e: Expression, need: int) -> str:
    s = str(e)
    return s if _level(e) >= need else f"({s})"


def _fmt_number(v: float) -> str:
    if math.isfinite(v) and v == int(v) and abs(v) < 1e15:
        return str(int(v)) if math.copysign(1.0, v) > 0 else f"-{int(-v)}"
    return repr(float(v))


def to_text(e: Expression) -> str:
    """Pretty-print with the minimum parentheses needed to re-parse to ``e``."""
    return str(e)


# --------------------------------------------------------------------------
# parsing

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[a-zA-Z][a-zA-Z0-9_]*)
  | (?P<op>[-+*/^()])
    """,
    re.VERBOSE,
)


def _tokenize(source: str) -> list[tuple[str, str, int]]:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", _byte_offset(source, pos))
        kind = m.lastgroup
        if kind != "ws":
            tokens.append((kind, m.group(), _byte_offset(source, pos)))
        pos = m.end()
    tokens.append(("end", "", _byte_offset(source, len(source))))
    return tokens


def _byte_offset(source: str, pos: int) -> int:
    return len(source[:pos].encode("utf-8"))


class _Parser:
    def __init__(self, source: str):
        self.tokens = _tokenize(source)
        self.i = 0

    def peek(self) -> tuple[str, str, int]:
        return self.tokens[self.i]

    def advance(self) -> tuple[str, str, int]:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, text: str) -> None:
        kind, tok, off = self.advance()
        if tok != text or kind != "op":
            raise ParseError(f"expected {text!r}, found {tok or 'end of input'!r}", off)

    def expr(self) -> Expression:
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.term())
        return node

    def term(self) -> Expression:
        node = self.factor()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.advance()[1]
            node = BinOp(op, node, self.factor())
        return node

    def factor(self) -> Expression:
        base = self.unary()
        if self.peek()[1] == "^":
            self.advance()
            return BinOp("^", base, self.factor())
        return base

    def unary(self) -> Expression:
        if self.peek()[1] == "-":
            self.advance()
            return Neg(self.unary())
        return self.primary()

    def primary(self) -> Expression:
        kind, tok, off = self.advance()
        if kind == "num":
            return Num(float(tok))
        if kind == "ident":
            if self.peek()[1] == "(":
                if tok not in FUNCTIONS:
                    raise ParseError(f"unknown function {tok!r}", off)
                self.advance()
                arg = self.expr()
                self.expect(")")
                return Call(tok, arg)
            return Var(tok)
        if tok == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "end":
            raise ParseError("unexpected end of input", off)
        raise ParseError(f"unexpected token {tok!r}", off)


def parse_expression(source: str) -> Expression:
    """Parse expression text into a tree; raises ParseError with a byte offset."""
    parser = _Parser(source)
    if parser.peek()[0] == "end":
        raise ParseError("empty expression", parser.peek()[2])
    node = parser.expr()
    kind, tok, off = parser.peek()
    if kind != "end":
        raise ParseError(f"unexpected token {tok!r}", off)
    return node


def as_expression(e: Expression | str) -> Expression:
    return parse_expression(e) if isinstance(e, str) else e


# --------------------------------------------------------------------------
# evaluation


def real_power(base: float, exponent: float, node=None) -> float:
    """``base ** exponent`` with an integer fast path for integral exponents."""
    try:
        if float(exponent).is_integer() and abs(exponent) <= 2**31:
            k = int(exponent)
            if base == 0.0 and k < 0:
                raise DomainError("division by zero in negative power", node)
            return base**k
        if base <= 0.0:
            raise DomainError(f"non-integer power of non-positive base {base!r}", node)
        return base**exponent
    except OverflowError:
        raise DomainError("overflow in power", node) from None


def apply_function(fn: str, a: float, node=None) -> float:
    if fn == "log":
        if a <= 0.0:
            raise DomainError(f"log of non-positive value {a!r}", node)
        return math.log(a)
    if fn == "sqrt":
        if a < 0.0:
            raise DomainError(f"sqrt of negative value {a!r}", node)
        return math.sqrt(a)
    if fn == "exp":
        try:
            return math.exp(a)
        except OverflowError:
            raise DomainError("overflow in exp", node) from None
    return {"sin": math.sin, "cos": math.cos, "tanh": math.tanh}[fn](a)


def divide(a: float, b: float, node=None) -> float:
    if b == 0.0:
        raise DomainError("division by zero", node)
    return a / b


def evaluate(e: Expression, bindings: Mapping[str, float]) -> float:
    """Evaluate ``e`` in double precision under ``bindings``."""
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return float(bindings[e.name])
        except KeyError:
            raise UnboundVariable(e.name) from None
    if isinstance(e, Neg):
        return -evaluate(e.arg, bindings)
    if isinstance(e, Call):
        return apply_function(e.fn, evaluate(e.arg, bindings), e)
    a = evaluate(e.left, bindings)
    b = evaluate(e.right, bindings)
    if e.op == "+":
        return a + b
    if e.op == "-":
        return a - b
    if e.op == "*":
        return a * b
    if e.op == "/":
        return divide(a, b, e)
    return real_power(a, b, e)


def variables_of(e: Expression) -> frozenset[str]:
    if isinstance(e, Var):
        return frozenset((e.name,))
    if isinstance(e, Num):
        return frozenset()
    if isinstance(e, (Neg, Call)):
        return variables_of(e.arg)
    return variables_of(e.left) | variables_of(e.right)


def substitute(e: Expression, replacements: Mapping[str, Expression]) -> Expression:
    """Replace variables by expressions (used for reparameterizing F and for
    rewriting a Lagrangian in ratio variables)."""
    if isinstance(e, Var):
        return replacements.get(e.name, e)
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, replacements))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.arg, replacements))
    return BinOp(e.op, substitute(e.left, replacements), substitute(e.right, replacements))
