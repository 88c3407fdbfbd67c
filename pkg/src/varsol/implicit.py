"""Single-field universal solutions.

A :class:`FamilySpec` holds functions ``F^1..F^n`` of the field ``phi`` and a
constant ``c``; the field is defined implicitly by

    sum_j x_j F^j(phi) = c.

Differentiating the constraint gives the gradient and Hessian in closed form::

    D        = sum_i x_i F^i'(phi)
    phi_j    = -F^j / D
    phi_jk   = -(phi_j F^k' + phi_k F^j' + S phi_j phi_k) / D,   S = sum_r x_r F^r''
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .autodiff import derivatives_1d, evaluate_jet2
from .errors import DomainError, NoConvergence, Singular
from .expr import Expression, as_expression, evaluate, to_text, variables_of

SOLVER_TOL = 1e-12
MAX_NEWTON = 50
MAX_BISECT = 200
SINGULAR_FLOOR = 1e-8


@dataclass(frozen=True)
class FamilySpec:
    F: tuple[Expression, ...]
    c: float
    bracket: tuple[float, float] | None = None
    guess: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "F", tuple(as_expression(f) for f in self.F))
        if not self.F:
            raise ValueError("a family needs at least one F function")
        for j, f in enumerate(self.F, 1):
            extra = variables_of(f) - {"phi"}
            if extra:
                raise ValueError(f"F^{j} may only depend on phi, found {sorted(extra)}")
        if self.bracket is not None:
            lo, hi = self.bracket
            if not lo < hi:
                raise ValueError(f"bracket must satisfy lo < hi, got {self.bracket}")
            object.__setattr__(self, "bracket", (float(lo), float(hi)))

    @property
    def n(self) -> int:
        return len(self.F)

    def initial_iterate(self) -> float:
        if self.guess is not None:
            return float(self.guess)
        if self.bracket is not None:
            return 0.5 * (self.bracket[0] + self.bracket[1])
        return 1.0

    def to_dict(self) -> dict:
        d = {"F": [to_text(f) for f in self.F], "c": self.c}
        if self.bracket is not None:
            d["bracket"] = list(self.bracket)
        if self.guess is not None:
            d["guess"] = self.guess
        return d


@dataclass
class FieldSample:
    """A point ``x`` with the field value, gradient and Hessian there.

    ``denom`` is the implicit-differentiation denominator D (NaN for samples
    built from an explicit field).
    """

    x: np.ndarray
    phi: float
    grad: np.ndarray
    hess: np.ndarray
    denom: float = math.nan
    info: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.x)


def _check_x(family: FamilySpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (family.n,):
        raise ValueError(f"x must have length {family.n}, got shape {x.shape}")
    return x


def _constraint(family: FamilySpec, x: np.ndarray, phi: float) -> tuple[float, float]:
    """Constraint residual and its phi-derivative."""
    g = -family.c
    dg = 0.0
    for xj, f in zip(x, family.F):
        v, d1, _ = derivatives_1d(f, "phi", phi)
        g += xj * v
        dg += xj * d1
    return g, dg


def constraint_residual(family: FamilySpec, x, phi: float) -> float:
    """``sum_j x_j F^j(phi) - c``."""
    x = _check_x(family, x)
    return sum(xj * evaluate(f, {"phi": phi}) for xj, f in zip(x, family.F)) - family.c


def _tolerance(family: FamilySpec) -> float:
    return SOLVER_TOL * max(1.0, abs(family.c))


def _in_bracket(family: FamilySpec, phi: float) -> bool:
    return family.bracket is None or family.bracket[0] <= phi <= family.bracket[1]


def _newton(family: FamilySpec, x: np.ndarray, phi: float) -> tuple[float | None, bool]:
    """Returns (root or None, derivative_vanished)."""
    tol = _tolerance(family)
    for _ in range(MAX_NEWTON):
        try:
            g, dg = _constraint(family, x, phi)
        except DomainError:
            return None, False
        if abs(g) <= tol:
            return phi, False
        if dg == 0.0 or not math.isfinite(dg):
            return None, True
        step = g / dg
        phi = phi - step
        if not math.isfinite(phi):
            return None, False
    try:
        g, _ = _constraint(family, x, phi)
    except DomainError:
        return None, False
    return (phi, False) if abs(g) <= tol else (None, False)


def _bisect(family: FamilySpec, x: np.ndarray) -> float:
    lo, hi = family.bracket
    tol = _tolerance(family)
    glo = constraint_residual(family, x, lo)
    ghi = constraint_residual(family, x, hi)
    if abs(glo) <= tol:
        return lo
    if abs(ghi) <= tol:
        return hi
    if glo * ghi > 0:
        raise NoConvergence(f"bracket [{lo}, {hi}] does not straddle a root at x={x.tolist()}")
    for _ in range(MAX_BISECT):
        mid = 0.5 * (lo + hi)
        gm = constraint_residual(family, x, mid)
        if abs(gm) <= tol:
            return mid
        if mid in (lo, hi):
            break
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    raise NoConvergence(f"bisection stalled at x={x.tolist()} before reaching tolerance")


def solve_phi(family: FamilySpec, x) -> float:
    """Solve the constraint for the field value at ``x``.

    Newton from the family's initial iterate; if Newton stalls (or lands
    outside the bracket) and a bracket is given, bisection inside it.
    """
    x = _check_x(family, x)
    if not x.any():
        if family.c != 0:
            raise NoConvergence("constraint reads 0 = c at the origin")
        return family.initial_iterate()
    root, flat = _newton(family, x, family.initial_iterate())
    if root is not None and _in_bracket(family, root):
        return root
    if family.bracket is not None:
        return _bisect(family, x)
    if flat:
        raise Singular(f"constraint derivative vanishes at x={x.tolist()}")
    raise NoConvergence(f"Newton failed to converge at x={x.tolist()}")


def denominator(family: FamilySpec, x, phi: float) -> float:
    x = _check_x(family, x)
    return float(sum(xi * derivatives_1d(f, "phi", phi)[1] for xi, f in zip(x, family.F)))


def singularity_floor(values: np.ndarray, x: np.ndarray) -> float:
    return SINGULAR_FLOOR * float(np.max(np.abs(values))) * max(1.0, float(np.linalg.norm(x)))


def sample_from_phi(family: FamilySpec, x, phi: float) -> FieldSample:
    """Build the sample at ``x`` from a known root ``phi``."""
    x = _check_x(family, x)
    jets = np.array([derivatives_1d(f, "phi", phi) for f in family.F])
    F, dF, d2F = jets[:, 0], jets[:, 1], jets[:, 2]
    D = float(x @ dF)
    floor = singularity_floor(F, x)
    if not abs(D) > floor:
        raise Singular(f"|D| = {abs(D):.3e} below floor {floor:.3e} at x={x.tolist()}")
    S = float(x @ d2F)
    grad = -F / D
    n = family.n
    hess = np.empty((n, n))
    for j in range(n):
        for k in range(j, n):
            v = -(grad[j] * dF[k] + grad[k] * dF[j] + S * grad[j] * grad[k]) / D
            hess[j, k] = hess[k, j] = v
    return FieldSample(x=x, phi=phi, grad=grad, hess=hess, denom=D)


def sample_field(family: FamilySpec, x) -> FieldSample:
    x = _check_x(family, x)
    return sample_from_phi(family, x, solve_phi(family, x))


def _on_branch(family: FamilySpec, phi: float) -> FamilySpec:
    return FamilySpec(family.F, family.c, family.bracket, phi)


def fd_gradient(family: FamilySpec, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`solve_phi`, following the branch through ``x``."""
    x = _check_x(family, x)
    local = _on_branch(family, solve_phi(family, x))
    grad = np.empty(family.n)
    for j in range(family.n):
        e = np.zeros(family.n)
        e[j] = h
        grad[j] = (solve_phi(local, x + e) - solve_phi(local, x - e)) / (2 * h)
    return grad


def fd_hessian(family: FamilySpec, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of the closed-form gradient along the branch."""
    x = _check_x(family, x)
    local = _on_branch(family, solve_phi(family, x))
    n = family.n
    hess = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        hess[:, k] = (sample_field(local, x + e).grad - sample_field(local, x - e).grad) / (2 * h)
    return hess


def relative_discrepancy(analytic: np.ndarray, approx: np.ndarray) -> float:
    """Max-norm error relative to the analytic scale (absolute below unit scale)."""
    return float(np.max(np.abs(analytic - approx)) / max(1.0, float(np.max(np.abs(analytic)))))


@dataclass
class FDReport:
    grad_error: float
    hess_error: float
    denom: float

    @property
    def max_error(self) -> float:
        return max(self.grad_error, self.hess_error)


def check_sample_fd(family: FamilySpec, x, h: float = 1e-5) -> FDReport:
    """Compare the closed-form gradient and Hessian with finite differences.

    The gradient is checked against central differences of the root solver,
    the Hessian against central differences of the gradient.
    """
    s = sample_field(family, x)
    return FDReport(
        grad_error=relative_discrepancy(s.grad, fd_gradient(family, x, h)),
        hess_error=relative_discrepancy(s.hess, fd_hessian(family, x, h)),
        denom=s.denom,
    )


def explicit_sample(field_expr: Expression | str, x) -> FieldSample:
    """Sample of an explicitly given field ``phi(x1..xn)`` (used for controls)."""
    x = np.asarray(x, dtype=float)
    names = [f"x{i + 1}" for i in range(len(x))]
    jet = evaluate_jet2(field_expr, names, dict(zip(names, x)))
    return FieldSample(x=x, phi=jet.value, grad=jet.grad, hess=jet.hess)
