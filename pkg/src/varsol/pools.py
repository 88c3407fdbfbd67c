"""Randomized test instances: F families, weight-one Lagrangians, multifield specs.

All generators take a ``numpy.random.Generator`` so campaigns stay
reproducible from a single seed.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .expr import BinOp, Call, Expression, Num, Var, evaluate, substitute, to_text
from .implicit import FamilySpec
from .lagrangian import LagrangianSpec, companion, cone_lagrangian
from .multifield import MultiFamilySpec, field_names

COEF_RANGE = (0.5, 2.0)
FAMILY_TEMPLATES = ("affine", "square", "exp", "sin")


def _coef(rng: np.random.Generator) -> float:
    # rounded so that expression text stays short and prints exactly
    return round(float(rng.uniform(*COEF_RANGE)), 4)


def family_term(rng: np.random.Generator, template: str, var: str = "phi") -> str:
    a, b = _coef(rng), _coef(rng)
    if template == "affine":
        return f"{a}+{b}*{var}"
    if template == "square":
        return f"{a}*{var}^2"
    if template == "exp":
        return f"{a}*exp({b}*{var})"
    if template == "sin":
        return f"{a}*sin({b}*{var})+2"
    raise ValueError(f"unknown template {template!r}")


def random_family(
    rng: np.random.Generator,
    n: int,
    center: Sequence[float] | None = None,
    phi0: float = 1.0,
) -> FamilySpec:
    """F^j drawn from {a+b phi, a phi^2, a exp(b phi), a sin(b phi)+2}.

    The constant is chosen so that ``phi0`` solves the constraint at ``center``
    (default: all ones), which keeps Newton from ``phi0`` on a nearby branch.
    """
    templates = rng.choice(FAMILY_TEMPLATES, size=n)
    F = tuple(family_term(rng, str(t)) for t in templates)
    center = np.ones(n) if center is None else np.asarray(center, dtype=float)
    fam = FamilySpec(F, 0.0)
    c = float(sum(x * evaluate(f, {"phi": phi0}) for x, f in zip(center, fam.F)))
    return FamilySpec(fam.F, round(c, 6), guess=phi0)


def linear_family(a: Sequence[float]) -> FamilySpec:
    """``F^j = a_j / phi`` with c = 1, whose solution is ``phi = sum a_j x_j``."""
    return FamilySpec(tuple(f"{float(v)!r}/phi" for v in a), 1.0, guess=1.0)


def reparameterized(family: FamilySpec, h: Expression) -> FamilySpec:
    """Family ``F^j o h`` for an expression h in ``phi``."""
    F = tuple(substitute(f, {"phi": h}) for f in family.F)
    return FamilySpec(F, family.c, family.bracket, family.guess)


# --------------------------------------------------------------------------
# random smooth expressions


def random_expression(
    rng: np.random.Generator,
    names: Sequence[str],
    depth: int = 3,
    ops: Sequence[str] = ("+", "-", "*", "/", "^", "sin", "cos", "exp", "sqrt"),
) -> Expression:
    """Random expression tree over ``names``.

    Divisors and square-root arguments are shifted to stay positive on the
    box [0.5, 1.5] used for sampling; exponentials take bounded arguments.
    """
    if depth <= 0 or rng.random() < 0.2:
        if rng.random() < 0.7:
            return Var(str(rng.choice(list(names))))
        return Num(_coef(rng))
    op = str(rng.choice(list(ops)))
    sub = lambda: random_expression(rng, names, depth - 1, ops)  # noqa: E731
    if op in ("+", "-", "*"):
        return BinOp(op, sub(), sub())
    if op == "/":
        # denominator 1 + q^2 > 0
        return BinOp("/", sub(), BinOp("+", Num(1.0), BinOp("^", sub(), Num(2.0))))
    if op == "^":
        return BinOp("^", sub(), Num(float(rng.integers(2, 4))))
    if op == "sqrt":
        return Call("sqrt", BinOp("+", Num(1.0), BinOp("^", sub(), Num(2.0))))
    if op == "exp":
        return Call("exp", Call("sin", sub()))
    return Call(op, sub())


def random_kernel(rng: np.random.Generator, n: int, depth: int = 2) -> Expression:
    """Smooth nonlinear kernel K(u1..u{n-1}) for cone Lagrangians."""
    names = [f"u{j}" for j in range(1, n)]
    if not names:
        return Num(_coef(rng))
    # a convex quadratic part keeps the kernel genuinely nonlinear
    quad = None
    for u in names:
        t = BinOp("*", Num(_coef(rng)), BinOp("^", Var(u), Num(2.0)))
        quad = t if quad is None else BinOp("+", quad, t)
    wiggle = random_expression(rng, names, depth, ops=("+", "*", "sin", "cos", "exp"))
    return BinOp("+", BinOp("+", Num(1.0), quad), BinOp("*", Num(0.1), wiggle))


def rational_lagrangian(n: int) -> LagrangianSpec:
    """``(g1^2 + ... + g_{n-1}^2) / g_n``."""
    if n < 2:
        raise ValueError("rational form needs n >= 2")
    num = " + ".join(f"g{j}^2" for j in range(1, n))
    return LagrangianSpec(n, f"({num})/g{n}", "rational")


def phi_dependent_lagrangian(n: int) -> LagrangianSpec:
    body = "(1+phi^2)*sqrt(" + "+".join(f"g{j}^2" for j in range(1, n + 1)) + ")"
    return LagrangianSpec(n, body, "phi_companion")


def weight_one_pool(n: int, rng: np.random.Generator, cones: int = 2) -> list[LagrangianSpec]:
    """Diverse weight-one Lagrangians in n gradient slots.

    Euclidean companion, Lorentzian companion (n >= 3), a rational form, a
    phi-dependent companion and ``cones`` random cone forms ``|g_n| K(u)``.
    """
    pool = [companion(n)]
    if n >= 3:
        pool.append(companion(n, [1] * (n - 1) + [-1]))
    if n >= 2:
        pool.append(rational_lagrangian(n))
    pool.append(phi_dependent_lagrangian(n))
    for i in range(cones):
        k = random_kernel(rng, n)
        pool.append(cone_lagrangian(n, k, f"cone{i + 1}"))
    return pool


# --------------------------------------------------------------------------
# multifield


def _multi_term(rng: np.random.Generator, m: int) -> str:
    names = field_names(m)
    p = str(rng.choice(names))
    q = str(rng.choice(names))
    a, b = _coef(rng), _coef(rng)
    kind = int(rng.integers(0, 5))
    if kind == 0:
        return f"{a}+{b}*{p}"
    if kind == 1:
        return f"{a}*{p}^2+{q}"
    if kind == 2:
        return f"{a}*exp({b}*{p})"
    if kind == 3:
        return f"{a}*sin({b}*{p})+2"
    return f"{a}+{b}*{p}*{q}"


def random_multifamily(
    rng: np.random.Generator,
    m: int,
    n: int,
    center: Sequence[float] | None = None,
    phi0: Sequence[float] | None = None,
) -> MultiFamilySpec:
    """General nonlinear m x n spec; c chosen so ``phi0`` solves it at ``center``."""
    F = tuple(tuple(_multi_term(rng, m) for _ in range(n)) for _ in range(m))
    center = np.ones(n) if center is None else np.asarray(center, dtype=float)
    phi0 = np.full(m, 0.5) if phi0 is None else np.asarray(phi0, dtype=float)
    tmp = MultiFamilySpec(F, (0.0,) * m)
    point = dict(zip(field_names(m), phi0))
    c = tuple(
        round(float(sum(x * evaluate(f, point) for x, f in zip(center, row))), 6) for row in tmp.F
    )
    return MultiFamilySpec(tmp.F, c, tuple(phi0))


def projective_multifamily(
    rng: np.random.Generator,
    m: int,
    n: int,
    phi0: Sequence[float] | None = None,
) -> MultiFamilySpec:
    """Nonlinear spec whose fields are ratios of affine functions of x.

    ``F^a_i = w_a(phi) (A[a, i] + b_i phi^a)`` with ``c = 0``: each row is a
    nonvanishing factor times an affine-in-phi constraint, so the solution is
    ``phi^a = -(A x)_a / (b . x)`` although F is nonlinear in phi.
    """
    names = field_names(m)
    A = -np.round(rng.uniform(*COEF_RANGE, size=(m, n)), 4)
    b = np.round(rng.uniform(*COEF_RANGE, size=n), 4)
    rows = []
    for a in range(m):
        w = f"exp({_coef(rng)}*{names[(a + 1) % m]}*{names[a]})"
        rows.append(tuple(f"{w}*({float(A[a, i])!r}+{float(b[i])!r}*{names[a]})" for i in range(n)))
    if phi0 is None:
        phi0 = -A.sum(axis=1) / b.sum()  # exact solution at x = (1, ..., 1)
    return MultiFamilySpec(tuple(rows), (0.0,) * m, tuple(float(v) for v in phi0))


def family_text(family: FamilySpec) -> str:
    return ", ".join(to_text(f) for f in family.F)
