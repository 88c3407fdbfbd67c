from __future__ import annotations

import math

import numpy as np
import pytest

from varsol.autodiff import Jet2, derivatives_1d, evaluate_jet2
from varsol.errors import DomainError
from varsol.expr import evaluate, parse_expression
from varsol.pools import random_expression

NAMES = ["x1", "x2", "x3"]


def jet(text, active, values):
    return evaluate_jet2(parse_expression(text), active, dict(zip(active, values)))


def test_bilinear():
    j = jet("x1*x2", ["x1", "x2"], [2.0, 3.0])
    assert j.value == 6.0
    np.testing.assert_array_equal(j.grad, [3.0, 2.0])
    np.testing.assert_array_equal(j.hess, [[0.0, 1.0], [1.0, 0.0]])


def test_norm_gradient_is_unit_direction():
    j = jet("sqrt(x1^2+x2^2)", ["x1", "x2"], [3.0, 4.0])
    assert j.value == pytest.approx(5.0, abs=1e-15)
    np.testing.assert_allclose(j.grad, [0.6, 0.8], atol=1e-15)


def test_exp_at_zero():
    j = jet("exp(x1)", ["x1"], [0.0])
    assert (j.value, j.grad[0], j.hess[0, 0]) == (1.0, 1.0, 1.0)


def test_derivatives_1d_examples():
    f, d1, d2 = derivatives_1d(parse_expression("phi^2"), "phi", 0.618034)
    assert (f, d1, d2) == pytest.approx((0.381966, 1.236068, 2.0), abs=1e-6)
    assert derivatives_1d(parse_expression("phi"), "phi", 1.7) == (1.7, 1.0, 0.0)
    assert derivatives_1d(parse_expression("sin(phi)"), "phi", 0.0) == pytest.approx((0.0, 1.0, 0.0))


def test_inactive_bindings_are_constants():
    f, d1, d2 = derivatives_1d(parse_expression("a*phi^3"), "phi", 2.0, {"a": 0.5})
    assert (f, d1, d2) == (4.0, 6.0, 6.0)


def test_variable_exponent_uses_exp_log():
    j = jet("x1^x2", ["x1", "x2"], [2.0, 3.0])
    assert j.value == pytest.approx(8.0)
    np.testing.assert_allclose(j.grad, [3 * 4.0, 8.0 * math.log(2.0)])
    np.testing.assert_allclose(j.hess[0, 1], 4.0 + 3 * 4.0 * math.log(2.0))


def test_sqrt_at_zero_is_a_domain_error():
    with pytest.raises(DomainError):
        jet("sqrt(x1)", ["x1"], [0.0])
    # constant argument is fine
    assert jet("sqrt(0)+x1", ["x1"], [1.0]).value == 1.0


def test_non_integer_power_of_negative_base():
    with pytest.raises(DomainError):
        jet("x1^1.5", ["x1"], [-1.0])
    assert jet("x1^3", ["x1"], [-2.0]).grad[0] == 12.0


def test_jet_algebra_matches_product_rule():
    a = Jet2.variable(2.0, 0, 2)
    b = Jet2.variable(5.0, 1, 2)
    p = a * b * a
    assert p.value == 20.0
    np.testing.assert_array_equal(p.grad, [20.0, 4.0])
    np.testing.assert_array_equal(p.hess, [[10.0, 4.0], [4.0, 0.0]])


def _random_cases(count, seed=11):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        e = random_expression(rng, NAMES, depth=3)
        point = rng.uniform(0.5, 1.5, size=3)
        yield e, point


def test_hessians_are_bitwise_symmetric():
    for e, point in _random_cases(200, seed=3):
        j = evaluate_jet2(e, NAMES, dict(zip(NAMES, point)))
        assert np.array_equal(j.hess, j.hess.T)


def test_value_agrees_with_plain_evaluation():
    for e, point in _random_cases(200, seed=4):
        bind = dict(zip(NAMES, point))
        assert evaluate_jet2(e, NAMES, bind).value == evaluate(e, bind)


def _fd_grad(e, point, h):
    g = np.empty(3)
    for i in range(3):
        up, dn = point.copy(), point.copy()
        up[i] += h
        dn[i] -= h
        g[i] = (evaluate(e, dict(zip(NAMES, up))) - evaluate(e, dict(zip(NAMES, dn)))) / (2 * h)
    return g


def _rel(a, b):
    return float(np.max(np.abs(a - b)) / max(1.0, float(np.max(np.abs(a)))))


def test_gradients_match_central_differences_with_second_order_convergence():
    slopes = []
    for e, point in _random_cases(500):
        bind = dict(zip(NAMES, point))
        j = evaluate_jet2(e, NAMES, bind)
        assert _rel(j.grad, _fd_grad(e, point, 1e-5)) <= 1e-6
        hs = np.array([1e-2, 1e-3, 1e-4])
        errs = np.array([_rel(j.grad, _fd_grad(e, point, h)) for h in hs])
        # roundoff in the difference quotient is about eps*|f|/h; only fit the
        # slope when truncation error dominates it at every step size
        noise = 1e-16 * max(1.0, abs(j.value)) / hs
        if np.all(errs > 1e3 * noise):
            slope = np.polyfit(np.log10(hs), np.log10(errs), 1)[0]
            slopes.append(slope)
            assert 1.8 <= slope <= 2.2, (str(e), errs)
    # low-degree polynomials have no truncation error to measure
    assert len(slopes) >= 150


def test_hessian_matches_differences_of_gradient():
    for e, point in _random_cases(100, seed=5):
        j = evaluate_jet2(e, NAMES, dict(zip(NAMES, point)))
        h = 1e-5
        fd = np.empty((3, 3))
        for i in range(3):
            up, dn = point.copy(), point.copy()
            up[i] += h
            dn[i] -= h
            gu = evaluate_jet2(e, NAMES, dict(zip(NAMES, up))).grad
            gd = evaluate_jet2(e, NAMES, dict(zip(NAMES, dn))).grad
            fd[i] = (gu - gd) / (2 * h)
        assert _rel(j.hess, fd) <= 1e-6
