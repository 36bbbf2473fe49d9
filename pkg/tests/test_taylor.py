from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from losik import taylor as tm
from losik.errors import DimensionMismatch, DivisionBySingular, DomainError
from losik.taylor import TaylorMap, TaylorValue, t_arith, t_compose, t_elem


def x1(order=3, value=0.0):
    return TaylorValue.variable(0, 1, order, value)


def coeffs_1d(t: TaylorValue) -> list:
    return [t.coefficient((k,)) for k in range(t.order + 1)]


# -- arithmetic -----------------------------------------------------------


def test_product_is_exact_for_polynomials():
    x = x1(2)
    assert coeffs_1d(t_arith("mul", 1 + x, 1 - x)) == [1.0, 0.0, -1.0]


def test_product_truncates_at_order():
    x = x1(1)
    assert coeffs_1d((1 + x) * (1 + x)) == [1.0, 2.0]


def test_reciprocal_matches_geometric_series():
    x = x1(3)
    np.testing.assert_allclose(coeffs_1d(t_arith("div", TaylorValue.constant(1.0, 1, 3), 1 + x)), [1, -1, 1, -1])


def test_division_by_singular_constant_term():
    x = x1(3)
    with pytest.raises(DivisionBySingular):
        t_arith("div", 1 + x, x)
    with pytest.raises(DivisionBySingular):
        (1 + x) / 0.0


def test_mismatched_bases_raise():
    with pytest.raises(DimensionMismatch):
        t_arith("add", TaylorValue.variable(0, 1, 3), TaylorValue.variable(0, 2, 3))
    with pytest.raises(DimensionMismatch):
        t_arith("mul", TaylorValue.variable(0, 2, 2), TaylorValue.variable(0, 2, 3))


def test_bad_coefficient_length():
    with pytest.raises(DimensionMismatch):
        TaylorValue([1.0, 2.0], 2, 2)


def test_number_mixing_and_ndarray_broadcast():
    x = x1(2, 1.0)
    arr = np.array([1.0, 2.0]) * x
    assert arr.dtype == object and arr[1].value == 2.0
    assert (2.0 - x).value == 1.0
    assert (3.0 / x).value == 3.0


# -- elementary functions ---------------------------------------------------


def test_exp_series():
    np.testing.assert_allclose(coeffs_1d(t_elem("exp", x1(2))), [1.0, 1.0, 0.5])


def test_log_series():
    np.testing.assert_allclose(coeffs_1d(t_elem("ln", 1 + x1(3))), [0.0, 1.0, -0.5, 1 / 3])


def test_sqrt_of_constant():
    c = TaylorValue.constant(4.0, 2, 3)
    out = t_elem("sqrt", c)
    assert out.value == 2.0
    assert not out.coeffs[1:].any()


@pytest.mark.parametrize("fn", ["ln", "sqrt", "pow_real"])
def test_domain_errors_at_non_positive_constant(fn):
    with pytest.raises(DomainError):
        t_elem(fn, x1(3, -1.0), 0.5)


def test_trig_and_powers_against_closed_forms():
    a = 0.7
    x = x1(3, a)
    np.testing.assert_allclose(coeffs_1d(x.sin()), [math.sin(a), math.cos(a), -math.sin(a) / 2, -math.cos(a) / 6])
    np.testing.assert_allclose(coeffs_1d(x.cos()), [math.cos(a), -math.sin(a), -math.cos(a) / 2, math.sin(a) / 6])
    # (a + x)^-2 = a^-2 - 2 a^-3 x + 3 a^-4 x^2 - 4 a^-5 x^3
    np.testing.assert_allclose(coeffs_1d(t_elem("pow_int", x, -2)), [a**-2, -2 * a**-3, 3 * a**-4, -4 * a**-5])
    np.testing.assert_allclose(coeffs_1d(x**1.5), [a**1.5, 1.5 * a**0.5, 0.375 * a**-0.5, -0.0625 * a**-1.5])


def test_abs_is_not_smooth_at_zero():
    with pytest.raises(DomainError):
        abs(x1(2))
    assert abs(x1(2, -2.0)).coefficient((1,)) == -1.0


# -- composition ------------------------------------------------------------


def test_compose_square_with_shifted_variable():
    u = TaylorValue.variable(0, 1, 2, 1.0)
    outer = TaylorMap([u * u])
    inner = TaylorMap([1 + x1(2)])
    assert coeffs_1d(t_compose(outer, inner)[0]) == [1.0, 2.0, 1.0]


def test_compose_exp_with_quadratic():
    # exp(u) with u = x + x^2: 1 + u + u^2/2 + u^3/6 expanded by hand
    outer = TaylorMap([x1(3).exp()])
    x = x1(3)
    inner = TaylorMap([x + x * x])
    np.testing.assert_allclose(coeffs_1d(t_compose(outer, inner)[0]), [1.0, 1.0, 1.5, 7.0 / 6.0], rtol=0, atol=1e-15)


def test_compose_identity_returns_inner(rng):
    inner = TaylorMap([TaylorValue(rng.standard_normal(6), 2, 2) for _ in range(2)])
    out = t_compose(TaylorMap.identity(2, 2, inner.constants()), inner)
    for a, b in zip(out, inner):
        assert a.allclose(b, atol=1e-15)


def test_compose_dimension_check():
    with pytest.raises(DimensionMismatch):
        t_compose(TaylorMap.identity(2, 2), TaylorMap([x1(2)]))


def test_taylor_map_jacobian():
    x = TaylorValue.variable(0, 2, 2, 1.0)
    y = TaylorValue.variable(1, 2, 2, 2.0)
    J = TaylorMap([x * y, x + 3 * y]).jacobian()
    np.testing.assert_allclose(J, [[2.0, 1.0], [1.0, 3.0]])


# -- properties -------------------------------------------------------------


def _random_poly_map(rng, m, K):
    return TaylorMap(TaylorValue(rng.uniform(-1, 1, tm.basis(m, K).size), m, K) for _ in range(m))


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3), K=st.integers(1, 4))
def test_compose_associative(seed, m, K):
    rng = np.random.default_rng(seed)
    h, g, f = (_random_poly_map(rng, m, K) for _ in range(3))
    # each outer map is read as expanded around the constants of what feeds it
    left = t_compose(h, t_compose(g, f))
    right = t_compose(t_compose(h, g), f)
    for a, b in zip(left, right):
        np.testing.assert_allclose(a.coeffs, b.coeffs, rtol=0, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), m=st.integers(1, 3), K=st.integers(1, 4))
def test_truncation_consistency(seed, m, K):
    rng = np.random.default_rng(seed)
    a = TaylorValue(rng.uniform(-1, 1, tm.basis(m, K).size), m, K)
    b = TaylorValue(rng.uniform(-1, 1, tm.basis(m, K).size), m, K)
    b.coeffs[0] = 2.0
    high = (a * b + (a / b).exp()).truncate(K - 1)
    at, bt = a.truncate(K - 1), b.truncate(K - 1)
    low = at * bt + (at / bt).exp()
    np.testing.assert_array_equal(high.coeffs, low.coeffs)


def _fd_gradient(fn, p, h=1e-5):
    g = np.zeros(len(p))
    for i in range(len(p)):
        e = np.zeros(len(p))
        e[i] = h
        g[i] = (fn(p + e) - fn(p - e)) / (2 * h)
    return g


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_arithmetic_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.2, 1.0, 3)
    c = rng.uniform(-1, 1, 4)

    def f(y):
        return tm.exp(c[0] * y[0] * y[1]) / (1.5 + tm.sin(y[2])) + tm.log(1 + y[0] ** 2) * c[1] + tm.sqrt(y[1] + c[2] ** 2)

    ys = [TaylorValue.variable(i, 3, 2, p[i]) for i in range(3)]
    t = f(ys)
    fd = _fd_gradient(lambda q: f(list(q)), p)
    np.testing.assert_allclose(t.gradient(), fd, rtol=1e-6, atol=1e-8)
    assert t.value == pytest.approx(f(list(p)), rel=1e-14)


def test_derivative_lowers_order():
    x = TaylorValue.variable(0, 2, 3, 0.5)
    y = TaylorValue.variable(1, 2, 3, -1.0)
    f = x * x * y
    d = f.derivative(0)
    assert d.order == 2
    # d/dx (x^2 y) = 2 x y -> at (0.5, -1): -1, gradient (2y, 2x) = (-2, 1)
    assert d.value == pytest.approx(-1.0)
    np.testing.assert_allclose(d.gradient(), [-2.0, 1.0])
    np.testing.assert_allclose(f.hessian(), [[-2.0, 1.0], [1.0, 0.0]])
