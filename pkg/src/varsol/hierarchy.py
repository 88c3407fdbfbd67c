"""Equations of motion of iterated weight-one Lagrangians.

The r-th member contracts r+1 gradient-slot Hessians ``M^1..M^{r+1}`` with
the (r+1) x (r+1) minors of the field Hessian::

    sum_{I,J} [ sum_{i in perm(I), j in perm(J)} eps(i) eps(j) prod_a M^a[i_a, j_a] ] det H[I, J]

where I, J run over (r+1)-subsets of the coordinates, ``eps`` is the sign of
the permutation that sorts a tuple, and the minor ``det H[I, J]`` is taken
with rows and columns in increasing order.  The Levi-Civita weights therefore
antisymmetrize the Lagrangian factors only; for equal factors the bracket is
``(r+1)! det M[I, J]``.  r = 0 gives ``sum M_ij phi_ij``.

Every M^a annihilates the gradient, so the member r = n-1 vanishes
identically; the Universal Field Equation is the member r = n-2, which is
independent of the Lagrangian up to a factor.  For n = 2 it is the Bateman
equation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .implicit import FieldSample
from .lagrangian import TINY, LagrangianSpec, Residual, companion, lagrangian_jet


def permutation_sign(seq: Sequence[int]) -> int:
    """Sign of the permutation sorting ``seq``; 0 if an entry repeats."""
    seq = list(seq)
    if len(set(seq)) != len(seq):
        return 0
    sign = 1
    for i in range(len(seq)):
        for j in range(i + 1, len(seq)):
            if seq[i] > seq[j]:
                sign = -sign
    return sign


def leibniz_det(a: np.ndarray) -> float:
    """Determinant by explicit expansion over permutations."""
    k = a.shape[0]
    total = 0.0
    for p in itertools.permutations(range(k)):
        term = float(permutation_sign(p))
        for row, col in enumerate(p):
            term *= a[row, col]
        total += term
    return total


@dataclass(frozen=True)
class HierarchyOrder:
    r: int
    lagrangians: tuple[LagrangianSpec, ...]

    def __post_init__(self):
        object.__setattr__(self, "lagrangians", tuple(self.lagrangians))
        if self.r < 0:
            raise ValueError("order r must be >= 0")
        if len(self.lagrangians) != self.r + 1:
            raise ValueError(f"order {self.r} needs {self.r + 1} Lagrangians, got {len(self.lagrangians)}")
        if len({L.n for L in self.lagrangians}) != 1:
            raise ValueError("all Lagrangians must have the same number of gradient slots")

    @property
    def n(self) -> int:
        return self.lagrangians[0].n

    @classmethod
    def repeated(cls, r: int, L: LagrangianSpec) -> "HierarchyOrder":
        return cls(r, (L,) * (r + 1))


def contract(Ms: Sequence[np.ndarray], hess: np.ndarray) -> float:
    """Full Levi-Civita contraction of the matrices ``Ms`` with the minors of ``hess``."""
    n = hess.shape[0]
    p = len(Ms)
    if not 1 <= p <= n:
        raise ValueError(f"need between 1 and {n} factors, got {p}")
    minors: dict[tuple, float] = {}
    total = 0.0
    tuples = list(itertools.permutations(range(n), p))
    signs = [permutation_sign(t) for t in tuples]
    for i, si in zip(tuples, signs):
        I = tuple(sorted(i))
        for j, sj in zip(tuples, signs):
            prod = float(si * sj)
            for a in range(p):
                prod *= Ms[a][i[a], j[a]]
            if prod == 0.0:
                continue
            J = tuple(sorted(j))
            key = (I, J)
            if key not in minors:
                minors[key] = leibniz_det(hess[np.ix_(I, J)])
            total += prod * minors[key]
    return total


def generic_residual(order: HierarchyOrder, s: FieldSample) -> Residual:
    """The r-th hierarchy member evaluated on a sample.

    Normalized by ``prod_a |M^a|_F * |hess|_F^(r+1)``.
    """
    if order.n != s.n:
        raise ValueError(f"Lagrangians have {order.n} slots but the sample has n={s.n}")
    if order.r > s.n - 1:
        raise ValueError(f"order r={order.r} out of range 0..{s.n - 1}")
    Ms = [lagrangian_jet(L, s.grad, s.phi).M for L in order.lagrangians]
    raw = contract(Ms, s.hess)
    scale = math.prod(float(np.linalg.norm(M)) for M in Ms) * float(np.linalg.norm(s.hess)) ** (order.r + 1)
    return Residual(float(raw), float(abs(raw) / (scale + TINY)))


def bateman(s: FieldSample) -> float:
    """``phi_2^2 phi_11 - 2 phi_1 phi_2 phi_12 + phi_1^2 phi_22``."""
    if s.n != 2:
        raise ValueError("the Bateman form is defined for n = 2")
    (g1, g2), H = s.grad, s.hess
    return float(g2 * g2 * H[0, 0] - 2.0 * g1 * g2 * H[0, 1] + g1 * g1 * H[1, 1])


def bordered_determinant(s: FieldSample) -> float:
    """``det [[0, grad^T], [grad, hess]]``; for n = 2 this is minus the Bateman form."""
    n = s.n
    B = np.zeros((n + 1, n + 1))
    B[0, 1:] = s.grad
    B[1:, 0] = s.grad
    B[1:, 1:] = s.hess
    return float(np.linalg.det(B))


def universal_order(n: int) -> int:
    """Hierarchy order of the Universal Field Equation in n coordinates."""
    if n < 2:
        raise ValueError("the Universal Field Equation needs n >= 2")
    return n - 2


def universal_field_residual(s: FieldSample) -> Residual:
    """Bateman form for n = 2; the order n-2 member with the companion
    Lagrangian for n >= 3."""
    if s.n == 2:
        raw = bateman(s)
        scale = float(np.dot(s.grad, s.grad)) * float(np.linalg.norm(s.hess))
        return Residual(float(raw), float(abs(raw) / (scale + TINY)))
    return generic_residual(HierarchyOrder.repeated(universal_order(s.n), companion(s.n)), s)
