from __future__ import annotations

import itertools
import math

import numpy as np
import pytest

from varsol.errors import DomainError, NoConvergence, Singular
from varsol.hierarchy import (
    HierarchyOrder,
    bateman,
    bordered_determinant,
    contract,
    generic_residual,
    leibniz_det,
    permutation_sign,
    universal_field_residual,
    universal_order,
)
from varsol.implicit import FamilySpec, FieldSample, explicit_sample, sample_field
from varsol.lagrangian import LagrangianSpec, companion, lagrangian_jet
from varsol.pools import linear_family, random_family, weight_one_pool

QUADRATIC = FamilySpec(("phi", "phi^2"), 1.0, guess=0.6)

# Euler-Lagrange expression of L * div(dL/dgrad) with L = |grad phi| in three
# variables, for phi = x1^2 x2 + x3^3 + x1 x3 + sin(x2 x3) at (1, 1/2, 7/10).
# Computed once with a computer-algebra Euler operator at 25 digits; the
# operator's sign convention is opposite to ours.
ITERATED_EL_ORACLE = 0.4275924306325159463693760


def _random_symmetric(rng, n):
    a = rng.uniform(-1, 1, size=(n, n))
    return a + a.T


def _universal_samples(n, count, seed):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        fam = random_family(rng, n)
        try:
            out.append(sample_field(fam, rng.uniform(0.5, 1.5, size=n)))
        except (Singular, NoConvergence):
            pass
    return out


def test_permutation_sign():
    assert permutation_sign((0, 1, 2)) == 1
    assert permutation_sign((1, 0, 2)) == -1
    assert permutation_sign((2, 0, 1)) == 1
    assert permutation_sign((0, 0, 1)) == 0


def test_leibniz_det_matches_lu():
    rng = np.random.default_rng(0)
    for k in range(1, 5):
        a = rng.normal(size=(k, k))
        assert leibniz_det(a) == pytest.approx(np.linalg.det(a), rel=1e-12, abs=1e-14)


def test_order_validation():
    L = companion(2)
    with pytest.raises(ValueError):
        HierarchyOrder(1, (L,))
    with pytest.raises(ValueError):
        HierarchyOrder(0, (companion(3),) * 1).__class__(1, (L, companion(3)))
    with pytest.raises(ValueError):
        generic_residual(HierarchyOrder.repeated(2, L), sample_field(QUADRATIC, [1.0, 1.0]))
    assert universal_order(2) == 0 and universal_order(4) == 2
    with pytest.raises(ValueError):
        universal_order(1)


def test_first_member_is_the_trace_contraction():
    rng = np.random.default_rng(1)
    for n in (2, 3, 4):
        for _ in range(20):
            M, H = _random_symmetric(rng, n), _random_symmetric(rng, n)
            direct = float(np.sum(M * H))
            assert contract([M], H) == pytest.approx(direct, rel=1e-12, abs=1e-14)


def test_equal_factors_give_minor_products():
    rng = np.random.default_rng(2)
    for n in (3, 4):
        M, H = _random_symmetric(rng, n), _random_symmetric(rng, n)
        for p in range(1, n + 1):
            expected = 0.0
            for I in itertools.combinations(range(n), p):
                for J in itertools.combinations(range(n), p):
                    expected += np.linalg.det(M[np.ix_(I, J)]) * np.linalg.det(H[np.ix_(I, J)])
            expected *= math.factorial(p)
            assert contract([M] * p, H) == pytest.approx(expected, rel=1e-10, abs=1e-12)


def test_second_member_matches_iterated_euler_lagrange():
    s = explicit_sample("x1^2*x2+x3^3+x1*x3+sin(x2*x3)", [1.0, 0.5, 0.7])
    M = lagrangian_jet(companion(3), s.grad).M
    assert -contract([M, M], s.hess) == pytest.approx(ITERATED_EL_ORACLE, rel=1e-12)


def test_bateman_examples():
    s = explicit_sample("x1*x2", [1.0, 1.0])
    assert bateman(s) == -2.0
    assert bordered_determinant(s) == pytest.approx(2.0)
    assert bateman(explicit_sample("2*x1-3*x2", [0.3, 0.4])) == 0.0


def test_first_member_is_bateman_over_cubed_norm():
    # with the companion Lagrangian in two variables, M = (|g|^2 I - g g^T) / |g|^3
    rng = np.random.default_rng(3)
    L = companion(2)
    for _ in range(50):
        g = rng.uniform(-1.5, 1.5, size=2)
        s = FieldSample(np.ones(2), 0.0, g, _random_symmetric(rng, 2))
        kappa = float(np.linalg.norm(g)) ** -3
        r = generic_residual(HierarchyOrder.repeated(0, L), s)
        assert r.raw == pytest.approx(kappa * bateman(s), rel=1e-8)


def test_top_member_vanishes_identically():
    rng = np.random.default_rng(4)
    for n in (2, 3):
        for L in weight_one_pool(n, rng):
            for _ in range(5):
                g = rng.uniform(0.5, 1.5, size=n)
                s = FieldSample(np.ones(n), 0.3, g, _random_symmetric(rng, n))
                try:
                    r = generic_residual(HierarchyOrder.repeated(n - 1, L), s)
                except DomainError:
                    continue
                assert r.normalized <= 1e-13


@pytest.mark.parametrize("n", [3, 4])
def test_universal_member_depends_on_the_lagrangian_only_through_the_gradient(n):
    # at order n-2 the contraction is c(L, g) times the bordered determinant
    rng = np.random.default_rng(n)
    pool = [L for L in weight_one_pool(n, rng) if "[" not in L.label]
    for L in pool:
        g = rng.uniform(0.5, 1.5, size=n)
        Ms = [lagrangian_jet(L, g, 0.2).M] * (n - 1)
        ratios = []
        for _ in range(3):
            s = FieldSample(np.ones(n), 0.2, g, _random_symmetric(rng, n))
            ratios.append(contract(Ms, s.hess) / bordered_determinant(s))
        assert ratios[1] == pytest.approx(ratios[0], rel=1e-9)
        assert ratios[2] == pytest.approx(ratios[0], rel=1e-9)


@pytest.mark.parametrize("n", [2, 3])
def test_annihilation_at_every_order(n):
    rng = np.random.default_rng(10 + n)
    pool = weight_one_pool(n, rng)
    for s in _universal_samples(n, 8, seed=20 + n):
        for r in range(n):
            lists = [(L,) * (r + 1) for L in pool]
            lists.append(tuple(pool[(a + r) % len(pool)] for a in range(r + 1)))
            for Ls in lists:
                try:
                    res = generic_residual(HierarchyOrder(r, Ls), s)
                except DomainError:
                    continue
                assert res.normalized <= 1e-7


def test_mixed_lists_are_permutation_symmetric():
    # three factors in four variables: below the identically vanishing top order
    rng = np.random.default_rng(6)
    n = 4
    pool = [L for L in weight_one_pool(n, rng) if "[" not in L.label]
    for _ in range(10):
        g = rng.uniform(0.5, 1.5, size=n)
        H = _random_symmetric(rng, n)
        Ms = [lagrangian_jet(L, g, 0.1).M for L in pool[:3]]
        base = contract(Ms, H)
        assert abs(base) > 1e-6
        for perm in itertools.permutations(range(3)):
            assert contract([Ms[i] for i in perm], H) == pytest.approx(base, rel=1e-12, abs=1e-15)


@pytest.mark.parametrize("n", [2, 3, 4])
def test_universal_field_residual(n):
    for s in _universal_samples(n, 10, seed=30 + n):
        assert universal_field_residual(s).normalized <= 1e-8
    control = "x1*x2" + ("+x3^2" if n >= 3 else "") + ("+x4^2" if n >= 4 else "")
    s = explicit_sample(control, np.linspace(0.8, 1.3, n))
    assert universal_field_residual(s).normalized > 1e-3


def test_universal_field_residual_on_linear_field():
    s = sample_field(linear_family([1.0, 2.0]), [0.5, 0.5])
    assert abs(universal_field_residual(s).raw) <= 1e-14
    assert universal_field_residual(explicit_sample("3*x1+x2", [1.0, 2.0])).raw == 0.0


def test_quadratic_family_solves_bateman():
    s = sample_field(QUADRATIC, [1.0, 1.0])
    assert universal_field_residual(s).normalized <= 1e-8


def test_companion_with_phi_dependence_cancels_in_contraction():
    # phi enters only through an overall factor, so M scales but the member still vanishes
    L = LagrangianSpec(3, "(1+phi^2)*sqrt(g1^2+g2^2+g3^2)")
    for s in _universal_samples(3, 5, seed=77):
        assert generic_residual(HierarchyOrder.repeated(1, L), s).normalized <= 1e-7
