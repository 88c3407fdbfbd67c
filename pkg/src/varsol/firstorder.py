"""Ratio variables ``u_j = phi_j / phi_n`` and the first-order relations they obey.

For a gradient field the antisymmetric relation

    u_j du_k/dx_n - u_k du_j/dx_n = du_k/dx_j - du_j/dx_k

holds identically.  Universal solutions additionally satisfy the symmetric
relation, checked here in its polynomial form in the derivatives of phi

    phi_nn phi_j phi_k - phi_nj phi_n phi_k - phi_nk phi_n phi_j + phi_jk phi_n^2 = 0,

and the two together give ``u_j du_k/dx_n - du_k/dx_j = 0``.  Indices j, k are
1-based and range over 1..n-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import VanishingDenominator
from .implicit import FieldSample
from .lagrangian import TINY, Residual

RATIO_FLOOR = 1e-10


@dataclass
class RatioSample:
    u: np.ndarray  # (n-1,)
    du: np.ndarray  # (n-1, n): du[k, j] = d u_k / d x_j


def ratios(s: FieldSample) -> RatioSample:
    """Quotient-rule ratios and their x-derivatives from a field sample."""
    g, H = s.grad, s.hess
    gn = g[-1]
    if not abs(gn) > RATIO_FLOOR * float(np.linalg.norm(g)):
        raise VanishingDenominator(f"phi_n = {gn!r} is too small relative to |grad| = {np.linalg.norm(g)!r}")
    u = g[:-1] / gn
    du = (H[:-1, :] * gn - np.outer(g[:-1], H[-1, :])) / (gn * gn)
    return RatioSample(u, du)


def _check_pair(s: FieldSample, j: int, k: int) -> tuple[int, int]:
    n = s.n
    if not (1 <= j <= n - 1 and 1 <= k <= n - 1):
        raise ValueError(f"indices must lie in 1..{n - 1}, got ({j}, {k})")
    return j - 1, k - 1


def sym_defect(s: FieldSample, j: int, k: int) -> Residual:
    """Symmetric relation in its polynomial phi-form, normalized by |grad|^2 |hess|."""
    j0, k0 = _check_pair(s, j, k)
    g, H = s.grad, s.hess
    nn = s.n - 1
    raw = (
        H[nn, nn] * g[j0] * g[k0]
        - H[nn, j0] * g[nn] * g[k0]
        - H[nn, k0] * g[nn] * g[j0]
        + H[j0, k0] * g[nn] * g[nn]
    )
    scale = float(np.dot(g, g)) * float(np.linalg.norm(H)) + TINY
    return Residual(float(raw), float(abs(raw) / scale))


def sym_u_relation(rs: RatioSample, j: int, k: int) -> float:
    """``u_j du_k/dx_n + u_k du_j/dx_n - du_k/dx_j - du_j/dx_k``."""
    j0, k0 = j - 1, k - 1
    u, du = rs.u, rs.du
    return float(u[j0] * du[k0, -1] + u[k0] * du[j0, -1] - du[k0, j0] - du[j0, k0])


def antisym_defect(rs: RatioSample, j: int, k: int) -> float:
    """``u_j du_k/dx_n - u_k du_j/dx_n - (du_k/dx_j - du_j/dx_k)``; zero for any gradient field."""
    j0, k0 = j - 1, k - 1
    u, du = rs.u, rs.du
    return float(u[j0] * du[k0, -1] - u[k0] * du[j0, -1] - (du[k0, j0] - du[j0, k0]))


def du_scale(s: FieldSample) -> float:
    """Size of the quotient-rule terms ``H/phi_n`` and ``phi H_n/phi_n^2`` making up du.

    Used instead of |du| alone, which is pure roundoff when u is constant
    (for instance when all F^j are multiples of one function).
    """
    g, H = s.grad, s.hess
    gn = abs(float(g[-1]))
    return float(np.linalg.norm(H)) * (gn + float(np.linalg.norm(g))) / (gn * gn)


def simple_defect(s: FieldSample, j: int, k: int) -> Residual:
    """``u_j du_k/dx_n - du_k/dx_j``, normalized by ``|u| (|du| + du_scale)``."""
    _check_pair(s, j, k)
    rs = ratios(s)
    j0, k0 = j - 1, k - 1
    raw = float(rs.u[j0] * rs.du[k0, -1] - rs.du[k0, j0])
    scale = float(np.linalg.norm(rs.u)) * (float(np.linalg.norm(rs.du)) + du_scale(s)) + TINY
    return Residual(raw, abs(raw) / scale)


def index_pairs(n: int) -> list[tuple[int, int]]:
    return [(j, k) for j in range(1, n) for k in range(1, n)]
