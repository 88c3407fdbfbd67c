from __future__ import annotations

import numpy as np
import pytest

from varsol.errors import DegenerateFit, NoConvergence, SingularJacobian
from varsol.implicit import sample_field, solve_phi
from varsol.lagrangian import companion, el_residual, lagrangian_jet, weight_one_defect
from varsol.multifield import (
    MultiFamilySpec,
    MultiFieldSample,
    MultiLagrangianSpec,
    constraint_residuals,
    explicit_multisample,
    fd_multigrad,
    fd_multihess,
    jacobian_companion,
    multi_jet,
    multifield_el_residual,
    orthogonality_defect,
    orthogonality_derivative_defect,
    sample_multifield,
    solve_fields,
    structure_defect,
    structure_fit,
)
from varsol.pools import projective_multifamily, random_family, random_multifamily

LINEAR = MultiFamilySpec((("1", "phi1", "phi2"), ("phi2", "1", "phi1")), (6.0, 6.0))


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def _universal(rng, maker, count, m=2, n=3):
    out = []
    while len(out) < count:
        spec = maker(rng, m, n)
        x = rng.uniform(0.5, 1.5, size=n)
        try:
            s = sample_multifield(spec, x)
        except (SingularJacobian, NoConvergence):
            continue
        sv = np.linalg.svd(s.grad, compute_uv=False)
        if sv[-1] > 1e-3 * sv[0]:
            out.append((spec, s))
    return out


def test_linear_spec_solution():
    phi = solve_fields(LINEAR, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(phi, [1.0, 1.0], atol=1e-12)


def test_linear_spec_singular_at_symmetric_point():
    with pytest.raises(SingularJacobian):
        solve_fields(LINEAR, [1.0, 1.0, 1.0])


def test_linear_spec_hessian_matches_differences():
    # the fields are rational in x here, so their Hessian is not zero
    x = np.array([1.0, 2.0, 3.0])
    s = sample_multifield(LINEAR, x)
    assert np.max(np.abs(s.hess)) > 1e-2
    assert _rel(s.grad, fd_multigrad(LINEAR, x)) <= 1e-6
    assert _rel(s.hess, fd_multihess(LINEAR, x)) <= 1e-6


def test_ratio_of_affine_fields_has_shared_vector_form():
    # F^a_i = A[a, i] + b_i phi^a with c = 0 and a common b: phi^a = -(A x)_a / (b . x)
    spec = MultiFamilySpec((("1+phi1", "2+phi1", "0.5+phi1"), ("1+phi2", "-1+phi2", "phi2")), (0.0, 0.0))
    s = sample_multifield(spec, [1.0, 1.2, 0.7])
    assert np.max(np.abs(s.hess)) > 0  # ratio of affine functions, not affine
    assert structure_defect(s) <= 1e-10


def test_m1_reduces_to_single_field():
    rng = np.random.default_rng(8)
    for n in (2, 3, 4):
        fam = random_family(rng, n)
        spec = MultiFamilySpec.from_family(fam)
        x = rng.uniform(0.8, 1.2, size=n)
        single = sample_field(fam, x)
        multi = sample_multifield(spec, x)
        assert multi.phi[0] == pytest.approx(solve_phi(fam, x), rel=1e-12)
        assert _rel(single.grad, multi.grad[0]) <= 1e-12
        assert _rel(single.hess, multi.hess[0]) <= 1e-12
        L1 = jacobian_companion(1, n)
        Ls = companion(n)
        r_multi = multifield_el_residual(L1, multi)[0]
        r_single = el_residual(Ls, single)
        assert abs(r_multi.raw + r_single.raw) <= 1e-12 * max(1.0, abs(r_single.raw)) + 1e-15
        D = orthogonality_defect(L1, multi)
        assert D[0, 0] == pytest.approx(weight_one_defect(Ls, single.grad), abs=1e-14)


def test_random_specs_match_finite_differences():
    rng = np.random.default_rng(12)
    for spec, s in _universal(rng, random_multifamily, 10):
        assert np.max(np.abs(constraint_residuals(spec, s.x, s.phi))) <= 1e-12 * max(1.0, *map(abs, spec.c))
        assert _rel(s.grad, fd_multigrad(spec, s.x)) <= 1e-6
        assert _rel(s.hess, fd_multihess(spec, s.x)) <= 1e-6
        assert np.array_equal(s.hess, s.hess.transpose(0, 2, 1))


def test_jacobian_companion_forms():
    L12 = jacobian_companion(1, 2)
    g = np.array([[3.0, 4.0]])
    assert multi_jet(L12, g).value == lagrangian_jet(companion(2), [3.0, 4.0]).value == 5.0
    L22 = jacobian_companion(2, 2)
    g = np.array([[1.0, 2.0], [3.0, 4.0]])
    assert multi_jet(L22, g).value == pytest.approx(2.0)
    L23 = jacobian_companion(2, 3)
    g = np.array([[1.0, 2.0, 0.5], [3.0, 4.0, 1.0]])
    minors = [1 * 4 - 2 * 3, 1 * 1 - 0.5 * 3, 2 * 1 - 0.5 * 4]
    assert multi_jet(L23, g).value == pytest.approx(np.sqrt(sum(v * v for v in minors)))
    with pytest.raises(ValueError):
        jacobian_companion(3, 2)


def test_orthogonality_for_jacobian_companion():
    rng = np.random.default_rng(21)
    L = jacobian_companion(2, 3)
    for _ in range(100):
        grad = rng.uniform(-1.5, 1.5, size=(2, 3))
        s = MultiFieldSample(np.ones(3), np.zeros(2), grad, np.zeros((2, 3, 3)))
        value = multi_jet(L, grad).value
        assert np.max(np.abs(orthogonality_defect(L, s))) <= 1e-10 * abs(value)


def test_orthogonality_fails_for_degree_two():
    L = MultiLagrangianSpec(2, 3, "d1_1^2+d1_2^2+d1_3^2")
    grad = np.array([[1.0, 2.0, 0.5], [0.3, -1.0, 2.0]])
    s = MultiFieldSample(np.ones(3), np.zeros(2), grad, np.zeros((2, 3, 3)))
    assert orthogonality_defect(L, s)[0, 0] == pytest.approx(multi_jet(L, grad).value)


def test_differentiated_orthogonality():
    rng = np.random.default_rng(22)
    L = jacobian_companion(2, 3)
    for _ in range(100):
        grad = rng.uniform(-1.5, 1.5, size=(2, 3))
        jet = multi_jet(L, grad)
        assert np.max(np.abs(orthogonality_derivative_defect(L, grad))) <= 1e-9 * np.linalg.norm(jet.hess)


def test_affine_fields_have_zero_residual():
    s = explicit_multisample(["x1+2*x2-x3", "0.5*x1+x3"], [1.0, 1.0, 1.0])
    for r in multifield_el_residual(jacobian_companion(2, 3), s):
        assert r.raw == 0.0
    fit = structure_fit(s)
    assert fit.normalized == 0.0 and not np.any(fit.G)


@pytest.mark.parametrize("maker", [random_multifamily, projective_multifamily])
def test_multifield_residual_vanishes_on_universal_samples(maker):
    rng = np.random.default_rng(31)
    L = jacobian_companion(2, 3)
    for _, s in _universal(rng, maker, 30):
        for r in multifield_el_residual(L, s):
            assert r.normalized <= 1e-7


def test_non_universal_control():
    s = explicit_multisample(["x1^2", "x2*x3"], [1.0, 1.2, 0.8])
    res = multifield_el_residual(jacobian_companion(2, 3), s)
    assert max(r.normalized for r in res) > 1e-3


def test_shared_vector_form_on_projective_class():
    rng = np.random.default_rng(41)
    for _, s in _universal(rng, projective_multifamily, 30):
        assert structure_defect(s) <= 1e-7


def test_shared_vector_form_is_restrictive():
    rng = np.random.default_rng(42)
    for _ in range(20):
        grad = rng.uniform(-1, 1, size=(2, 3))
        h = rng.uniform(-1, 1, size=(2, 3, 3))
        h = h + h.transpose(0, 2, 1)
        assert structure_defect(MultiFieldSample(np.ones(3), np.zeros(2), grad, h)) > 1e-2


def test_shared_vector_form_on_general_nonlinear_specs():
    # Observed: for generic nonlinear F each field's Hessian has full rank and
    # no single G fits both fields, although the equations of motion hold.
    rng = np.random.default_rng(43)
    defects = [structure_defect(s) for _, s in _universal(rng, random_multifamily, 30)]
    assert np.median(defects) > 1e-2


def test_structure_fit_needs_a_gradient():
    s = MultiFieldSample(np.ones(3), np.zeros(2), np.zeros((2, 3)), np.ones((2, 3, 3)))
    with pytest.raises(DegenerateFit):
        structure_fit(s)


def test_spec_validation():
    with pytest.raises(ValueError):
        MultiFamilySpec((("phi1", "phi3"),), (1.0,))
    with pytest.raises(ValueError):
        MultiFamilySpec((("phi1", "1"), ("phi2",)), (1.0, 1.0))
    with pytest.raises(ValueError):
        MultiFamilySpec((("phi1", "1"),), (1.0, 2.0))
    with pytest.raises(ValueError):
        MultiLagrangianSpec(2, 2, "d3_1")
