"""Universal solutions for several fields.

The fields ``phi1..phim`` solve the m constraints

    sum_i x_i F^a_i(phi) = c^a,        a = 1..m,

which are linear in x.  With ``A[a, s] = sum_i x_i dF^a_i/dphi^s`` the first
derivatives solve ``A phi_j = -F_j`` and the second derivatives solve the
twice-differentiated constraint for each pair (j, k).

Lagrangians of several fields are written over the slots ``dA_J``
(derivative of field A along coordinate J, both 1-based).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .autodiff import evaluate_jet2
from .errors import DegenerateFit, DomainError, NoConvergence, SingularJacobian
from .expr import BinOp, Call, Expression, Num, Var, as_expression, substitute, to_text, variables_of
from .implicit import FamilySpec
from .lagrangian import TINY, Residual

SOLVER_TOL = 1e-12
MAX_NEWTON = 50
MAX_COND = 1e12


def field_names(m: int) -> list[str]:
    return [f"phi{a}" for a in range(1, m + 1)]


def slot_name(a: int, j: int) -> str:
    return f"d{a}_{j}"


def slot_names(m: int, n: int) -> list[str]:
    """Row-major: all slots of field 1, then field 2, ..."""
    return [slot_name(a, j) for a in range(1, m + 1) for j in range(1, n + 1)]


@dataclass(frozen=True)
class MultiFamilySpec:
    F: tuple[tuple[Expression, ...], ...]  # F[a][i], shape m x n
    c: tuple[float, ...]
    guess: tuple[float, ...] | None = None

    def __post_init__(self):
        F = tuple(tuple(as_expression(f) for f in row) for row in self.F)
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "c", tuple(float(v) for v in self.c))
        m = len(F)
        if m == 0 or len({len(row) for row in F}) != 1 or len(F[0]) == 0:
            raise ValueError("F must be a non-empty m x n array")
        if len(self.c) != m:
            raise ValueError(f"c must have length {m}")
        allowed = set(field_names(m))
        for a, row in enumerate(F, 1):
            for i, f in enumerate(row, 1):
                extra = variables_of(f) - allowed
                if extra:
                    raise ValueError(f"F^{a}_{i} may only use {sorted(allowed)}, found {sorted(extra)}")
        if self.guess is not None:
            if len(self.guess) != m:
                raise ValueError(f"guess must have length {m}")
            object.__setattr__(self, "guess", tuple(float(v) for v in self.guess))

    @property
    def m(self) -> int:
        return len(self.F)

    @property
    def n(self) -> int:
        return len(self.F[0])

    @classmethod
    def from_family(cls, family: FamilySpec) -> "MultiFamilySpec":
        F = (tuple(substitute(f, {"phi": Var("phi1")}) for f in family.F),)
        return cls(F, (family.c,), (family.initial_iterate(),))

    def initial_iterate(self) -> np.ndarray:
        return np.zeros(self.m) if self.guess is None else np.array(self.guess)

    def to_dict(self) -> dict:
        d = {"m": self.m, "n": self.n, "F": [[to_text(f) for f in row] for row in self.F], "c": list(self.c)}
        if self.guess is not None:
            d["guess"] = list(self.guess)
        return d


@dataclass
class MultiFieldSample:
    x: np.ndarray
    phi: np.ndarray  # (m,)
    grad: np.ndarray  # (m, n)
    hess: np.ndarray  # (m, n, n)

    @property
    def m(self) -> int:
        return len(self.phi)

    @property
    def n(self) -> int:
        return len(self.x)


def _check_x(spec: MultiFamilySpec, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError(f"x must have length {spec.n}, got shape {x.shape}")
    return x


def _jets(spec: MultiFamilySpec, phi: np.ndarray):
    """Values (m,n), first derivatives (m,n,m) and second derivatives (m,n,m,m)."""
    names = field_names(spec.m)
    point = dict(zip(names, phi))
    m, n = spec.m, spec.n
    val = np.empty((m, n))
    d1 = np.empty((m, n, m))
    d2 = np.empty((m, n, m, m))
    for a in range(m):
        for i in range(n):
            jet = evaluate_jet2(spec.F[a][i], names, point)
            val[a, i], d1[a, i], d2[a, i] = jet.value, jet.grad, jet.hess
    return val, d1, d2


def _solve(A: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    if not np.all(np.isfinite(A)) or np.linalg.cond(A) > MAX_COND:
        raise SingularJacobian(f"constraint Jacobian is singular (cond = {np.linalg.cond(A):.3e})")
    return np.linalg.solve(A, rhs)


def constraint_residuals(spec: MultiFamilySpec, x, phi) -> np.ndarray:
    x = _check_x(spec, x)
    val, _, _ = _jets(spec, np.asarray(phi, dtype=float))
    return val @ x - np.array(spec.c)


def constraint_jacobian(spec: MultiFamilySpec, x, phi) -> np.ndarray:
    """``A[a, b] = sum_i x_i dF^a_i/dphi^b``, the multifield analogue of D."""
    x = _check_x(spec, x)
    _, d1, _ = _jets(spec, np.asarray(phi, dtype=float))
    return np.einsum("aib,i->ab", d1, x)


def solve_fields(spec: MultiFamilySpec, x) -> np.ndarray:
    """Newton on the m constraints with Jacobian ``sum_i x_i dF^a_i/dphi^b``."""
    x = _check_x(spec, x)
    c = np.array(spec.c)
    tol = SOLVER_TOL * np.maximum(1.0, np.abs(c))
    phi = spec.initial_iterate()
    for _ in range(MAX_NEWTON + 1):
        try:
            val, d1, _ = _jets(spec, phi)
        except DomainError as exc:
            raise NoConvergence(f"Newton left the domain at phi={phi.tolist()}: {exc}") from None
        res = val @ x - c
        if np.all(np.abs(res) <= tol):
            return phi
        A = np.einsum("aib,i->ab", d1, x)
        phi = phi - _solve(A, res)
        if not np.all(np.isfinite(phi)):
            break
    raise NoConvergence(f"multifield Newton failed to converge at x={x.tolist()}")


def sample_from_fields(spec: MultiFamilySpec, x, phi) -> MultiFieldSample:
    x = _check_x(spec, x)
    phi = np.asarray(phi, dtype=float)
    val, d1, d2 = _jets(spec, phi)
    A = np.einsum("aib,i->ab", d1, x)
    grad = _solve(A, -val)  # (m, n)
    Q = np.einsum("aist,i->ast", d2, x)
    m, n = spec.m, spec.n
    hess = np.empty((m, n, n))
    for j in range(n):
        for k in range(j, n):
            rhs = np.einsum("ast,s,t->a", Q, grad[:, j], grad[:, k])
            rhs = rhs + d1[:, j, :] @ grad[:, k] + d1[:, k, :] @ grad[:, j]
            hess[:, j, k] = hess[:, k, j] = _solve(A, -rhs)
    return MultiFieldSample(x=x, phi=phi, grad=grad, hess=hess)


def sample_multifield(spec: MultiFamilySpec, x) -> MultiFieldSample:
    x = _check_x(spec, x)
    return sample_from_fields(spec, x, solve_fields(spec, x))


def fd_multigrad(spec: MultiFamilySpec, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of :func:`solve_fields` along the branch through x."""
    x = _check_x(spec, x)
    phi0 = solve_fields(spec, x)
    local = MultiFamilySpec(spec.F, spec.c, tuple(phi0))
    grad = np.empty((spec.m, spec.n))
    for j in range(spec.n):
        e = np.zeros(spec.n)
        e[j] = h
        grad[:, j] = (solve_fields(local, x + e) - solve_fields(local, x - e)) / (2 * h)
    return grad


def fd_multihess(spec: MultiFamilySpec, x, h: float = 1e-5) -> np.ndarray:
    """Central differences of the implicit gradient along the branch through x."""
    x = _check_x(spec, x)
    phi0 = solve_fields(spec, x)
    local = MultiFamilySpec(spec.F, spec.c, tuple(phi0))
    hess = np.empty((spec.m, spec.n, spec.n))
    for k in range(spec.n):
        e = np.zeros(spec.n)
        e[k] = h
        hess[:, :, k] = (sample_multifield(local, x + e).grad - sample_multifield(local, x - e).grad) / (2 * h)
    return hess


def explicit_multisample(field_exprs, x) -> MultiFieldSample:
    """Sample of explicitly given fields ``phi^a(x1..xn)``; used for controls."""
    x = np.asarray(x, dtype=float)
    names = [f"x{i + 1}" for i in range(len(x))]
    jets = [evaluate_jet2(f, names, dict(zip(names, x))) for f in field_exprs]
    return MultiFieldSample(
        x=x,
        phi=np.array([j.value for j in jets]),
        grad=np.array([j.grad for j in jets]),
        hess=np.array([j.hess for j in jets]),
    )


# --------------------------------------------------------------------------
# Lagrangians of several fields


@dataclass(frozen=True)
class MultiLagrangianSpec:
    m: int
    n: int
    body: Expression
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "body", as_expression(self.body))
        extra = variables_of(self.body) - set(slot_names(self.m, self.n))
        if extra:
            raise ValueError(f"multifield Lagrangian uses unknown variables {sorted(extra)}")
        if not self.label:
            object.__setattr__(self, "label", to_text(self.body))

    @property
    def text(self) -> str:
        return to_text(self.body)

    def to_dict(self) -> dict:
        return {"m": self.m, "n": self.n, "body": self.text, "label": self.label}


@dataclass
class MultiLagrangianJet:
    value: float
    dL: np.ndarray  # (m, n)
    hess: np.ndarray  # (m, n, m, n): d2L / d(phi^a_j) d(phi^b_k)


def multi_jet(L: MultiLagrangianSpec, grad) -> MultiLagrangianJet:
    grad = np.asarray(grad, dtype=float)
    if grad.shape != (L.m, L.n):
        raise ValueError(f"grad must have shape ({L.m}, {L.n}), got {grad.shape}")
    names = slot_names(L.m, L.n)
    jet = evaluate_jet2(L.body, names, dict(zip(names, grad.ravel())))
    return MultiLagrangianJet(
        value=jet.value,
        dL=jet.grad.reshape(L.m, L.n),
        hess=jet.hess.reshape(L.m, L.n, L.m, L.n),
    )


def jacobian_companion(m: int, n: int) -> MultiLagrangianSpec:
    """``sqrt(sum of squared m x m Jacobian minors)`` over the ``dA_J`` slots.

    For m = 1 this is the single-field companion written in ``d1_J`` slots.
    """
    if not 1 <= m <= n:
        raise ValueError(f"jacobian_companion needs 1 <= m <= n, got m={m}, n={n}")
    total = None
    for cols in itertools.combinations(range(1, n + 1), m):
        sq = BinOp("^", _minor_expr(m, cols), Num(2.0))
        total = sq if total is None else BinOp("+", total, sq)
    return MultiLagrangianSpec(m, n, Call("sqrt", total), "jacobian_companion")


def _perm_sign(p: tuple[int, ...]) -> int:
    sign = 1
    p = list(p)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            sign = -sign
    return sign


def _minor_expr(m: int, cols: tuple[int, ...]) -> Expression:
    """Leibniz expansion of the minor of rows 1..m and the given columns."""
    expr = None
    for p in itertools.permutations(range(m)):
        term = None
        for a in range(m):
            v = Var(slot_name(a + 1, cols[p[a]]))
            term = v if term is None else BinOp("*", term, v)
        if expr is None:  # identity permutation comes first, sign +1
            expr = term
        else:
            expr = BinOp("+" if _perm_sign(p) > 0 else "-", expr, term)
    return expr


def orthogonality_defect(L: MultiLagrangianSpec, s: MultiFieldSample) -> np.ndarray:
    """``D[a, b] = sum_j phi^a_j dL/dphi^b_j - delta_ab L``."""
    jet = multi_jet(L, s.grad)
    return s.grad @ jet.dL.T - np.eye(L.m) * jet.value


def orthogonality_derivative_defect(L: MultiLagrangianSpec, grad) -> np.ndarray:
    """Differentiated orthogonality relations, shape (m, m, m, n) over (a, b, c, k):

    ``sum_j phi^a_j d2L/dphi^b_j dphi^c_k + delta_ac dL/dphi^b_k - delta_ab dL/dphi^c_k``.
    """
    grad = np.asarray(grad, dtype=float)
    jet = multi_jet(L, grad)
    m = L.m
    eye = np.eye(m)
    first = np.einsum("aj,bjck->abck", grad, jet.hess)
    return first + np.einsum("ac,bk->abck", eye, jet.dL) - np.einsum("ab,ck->abck", eye, jet.dL)


def multifield_el_residual(L: MultiLagrangianSpec, s: MultiFieldSample) -> list[Residual]:
    """Per field a: ``sum_b sum_jk phi^b_jk d2L/dphi^a_j dphi^b_k``."""
    jet = multi_jet(L, s.grad)
    raw = np.einsum("bjk,ajbk->a", s.hess, jet.hess)
    scale = np.linalg.norm(jet.hess) * np.linalg.norm(s.hess) + TINY
    return [Residual(float(r), float(abs(r) / scale)) for r in raw]


@dataclass
class StructureFit:
    G: np.ndarray
    residual: float
    normalized: float


def structure_fit(s: MultiFieldSample) -> StructureFit:
    """Least-squares fit of one vector G to ``phi^b_jk = phi^b_j G_k + phi^b_k G_j``."""
    if not np.any(s.grad):
        raise DegenerateFit("all gradient rows vanish; G is undetermined")
    n = s.n
    rows, rhs = [], []
    for b in range(s.m):
        for j in range(n):
            for k in range(j, n):
                row = np.zeros(n)
                row[k] += s.grad[b, j]
                row[j] += s.grad[b, k]
                rows.append(row)
                rhs.append(s.hess[b, j, k])
    A, y = np.array(rows), np.array(rhs)
    hnorm = float(np.linalg.norm(s.hess))
    if hnorm == 0.0:
        return StructureFit(np.zeros(n), 0.0, 0.0)
    G = np.linalg.lstsq(A, y, rcond=None)[0]
    # measure the misfit on the full symmetric tensor, not only j <= k
    fitted = np.einsum("bj,k->bjk", s.grad, G)
    fitted = fitted + fitted.transpose(0, 2, 1)
    res = float(np.linalg.norm(s.hess - fitted))
    return StructureFit(G, res, res / hnorm)


def structure_defect(s: MultiFieldSample) -> float:
    return structure_fit(s).normalized
