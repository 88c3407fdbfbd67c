"""Weight-one Lagrangians of a single field and their Euler-Lagrange residual.

A Lagrangian is an expression in the gradient slots ``g1..gn`` and optionally
the field value ``phi``.  Weight one means ``sum_j g_j dL/dg_j = L``; it is
always checked numerically, never assumed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .autodiff import evaluate_jet2
from .expr import BinOp, Call, Expression, Neg, Num, Var, as_expression, substitute, to_text, variables_of
from .implicit import FieldSample

TINY = 1e-30


def slot_names(n: int) -> list[str]:
    return [f"g{j}" for j in range(1, n + 1)]


@dataclass(frozen=True)
class LagrangianSpec:
    n: int
    body: Expression
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "body", as_expression(self.body))
        if self.n < 1:
            raise ValueError("a Lagrangian needs at least one gradient slot")
        extra = variables_of(self.body) - set(slot_names(self.n)) - {"phi"}
        if extra:
            raise ValueError(
                f"Lagrangian {self.label or to_text(self.body)!r} uses unknown variables {sorted(extra)}"
            )
        if not self.label:
            object.__setattr__(self, "label", to_text(self.body))

    @property
    def text(self) -> str:
        return to_text(self.body)

    def to_dict(self) -> dict:
        return {"n": self.n, "body": self.text, "label": self.label}


class Residual(NamedTuple):
    raw: float
    normalized: float


@dataclass
class LagrangianJet:
    """Value and derivatives of L at one (g, phi) point.

    ``M`` is the gradient-slot Hessian d2L/dg_j dg_k.
    """

    value: float
    dg: np.ndarray
    dphi: float
    M: np.ndarray
    dg_dphi: np.ndarray


def lagrangian_jet(L: LagrangianSpec, g, phi: float = 0.0) -> LagrangianJet:
    g = np.asarray(g, dtype=float)
    if g.shape != (L.n,):
        raise ValueError(f"gradient must have length {L.n}, got shape {g.shape}")
    names = slot_names(L.n) + ["phi"]
    point = dict(zip(names, [*g, phi]))
    jet = evaluate_jet2(L.body, names, point)
    n = L.n
    return LagrangianJet(
        value=jet.value,
        dg=jet.grad[:n],
        dphi=float(jet.grad[n]),
        M=jet.hess[:n, :n],
        dg_dphi=jet.hess[:n, n],
    )


def companion(n: int, metric: Sequence[int] | None = None) -> LagrangianSpec:
    """``sqrt(sum_j metric_j g_j^2)``; Euclidean signature by default."""
    if n < 1:
        raise ValueError("n must be >= 1")
    metric = [1] * n if metric is None else list(metric)
    if len(metric) != n or any(s not in (1, -1) for s in metric):
        raise ValueError(f"metric must be {n} signs of +1/-1, got {metric}")
    body = None
    for j, s in enumerate(metric, 1):
        sq = BinOp("^", Var(f"g{j}"), Num(2.0))
        if body is None:
            body = sq if s > 0 else Neg(sq)
        else:
            body = BinOp("+" if s > 0 else "-", body, sq)
    signature = "".join("+" if s > 0 else "-" for s in metric)
    label = "companion" if "-" not in signature else f"companion[{signature}]"
    return LagrangianSpec(n, Call("sqrt", body), label)


def weight_one_defect(L: LagrangianSpec, g, phi: float = 0.0) -> float:
    """``sum_j g_j dL/dg_j - L``; zero exactly when L has weight one at g."""
    jet = lagrangian_jet(L, g, phi)
    return float(np.dot(g, jet.dg) - jet.value)


def hessian_nullvector_defect(L: LagrangianSpec, g, phi: float = 0.0) -> np.ndarray:
    """``M g`` for the gradient-slot Hessian M; vanishes for weight one."""
    jet = lagrangian_jet(L, g, phi)
    return jet.M @ np.asarray(g, dtype=float)


def el_residual(L: LagrangianSpec, s: FieldSample) -> Residual:
    """Euler-Lagrange expression of L evaluated on the sample.

    ``dL/dphi - phi_j d2L/dg_j dphi - phi_jk M_jk``.  The normalized value
    divides by ``|M|_F |hess|_F`` plus the size of the two phi terms.
    """
    jet = lagrangian_jet(L, s.grad, s.phi)
    t_phi = jet.dphi
    t_mix = float(s.grad @ jet.dg_dphi)
    t_second = float(np.sum(s.hess * jet.M))
    raw = t_phi - t_mix - t_second
    scale = np.linalg.norm(jet.M) * np.linalg.norm(s.hess) + abs(t_phi) + abs(t_mix) + TINY
    return Residual(float(raw), float(abs(raw) / scale))


def cone_lagrangian(n: int, kernel: Expression | str, label: str = "") -> LagrangianSpec:
    """``|g_n| K(g_1/g_n, ..., g_{n-1}/g_n)`` for a kernel K in ``u1..u{n-1}``.

    Any such L has weight one (for positive scalings of g).
    """
    kernel = as_expression(kernel)
    extra = variables_of(kernel) - {f"u{j}" for j in range(1, n)}
    if extra:
        raise ValueError(f"kernel may only use u1..u{n - 1}, found {sorted(extra)}")
    gn = Var(f"g{n}")
    ratios = {f"u{j}": BinOp("/", Var(f"g{j}"), gn) for j in range(1, n)}
    body = BinOp("*", Call("sqrt", BinOp("^", gn, Num(2.0))), substitute(kernel, ratios))
    return LagrangianSpec(n, body, label or f"cone[{to_text(kernel)}]")


def kernel_of(L: LagrangianSpec) -> Expression:
    """Kernel K(u) with ``L(g) = g_n K(g_j/g_n)`` for ``g_n > 0``.

    Only meaningful for phi-independent weight-one L: it is L evaluated at
    ``(u_1, ..., u_{n-1}, 1)``.
    """
    if "phi" in variables_of(L.body):
        raise ValueError("kernel decomposition needs a phi-independent Lagrangian")
    repl = {f"g{j}": Var(f"u{j}") for j in range(1, L.n)}
    repl[f"g{L.n}"] = Num(1.0)
    return substitute(L.body, repl)
