"""Quadrature, Abel and fractional integrals, and the windowed ODE solver."""

from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import i0

from revspec.numerics import (
    InputError,
    NumericError,
    SampledFunction,
    abel_forward,
    abel_invert,
    frac_integral,
    singular_quad,
    solve_linear_ode2,
)

GRID = np.linspace(0.0, 1.0, 1025)
HALF_ORDERS = (-1.5, -1.0, -0.5, 0.5, 1.0, 1.5)


def sampled(fun, x=GRID):
    return SampledFunction.from_values(x, fun(x))


# ---------------------------------------------------------------------------
# singular_quad


def test_singular_quad_arcsine_weight():
    assert singular_quad(np.ones_like, 0.0, 1.0, -0.5) == pytest.approx(math.pi, rel=1e-13)


def test_singular_quad_semicircle_weight_against_adaptive_quadrature():
    ref, _ = quad(lambda x: math.sqrt(x * (1 - x)), 0.0, 1.0, epsabs=1e-13)
    val = singular_quad(np.ones_like, 0.0, 1.0, 0.5)
    assert val == pytest.approx(math.pi / 8, rel=1e-13)
    assert val == pytest.approx(ref, rel=1e-9)


@pytest.mark.parametrize("i1", [0.0, 0.3, 0.5, 0.9])
def test_singular_quad_sphere_action_integrand(i1):
    # int_{r-}^{r+} sqrt(1 - i1^2 / sin^2 r) dr = pi (1 - |i1|)
    if i1 == 0.0:
        val = singular_quad(np.ones_like, 0.0, math.pi, 0.0)
    else:
        lo, hi = math.asin(i1), math.pi - math.asin(i1)
        g = lambda r: np.sqrt((np.sin(r) ** 2 - i1**2) / ((r - lo) * (hi - r))) / np.sin(r)
        val = singular_quad(g, lo, hi, 0.5)
    assert val == pytest.approx(math.pi * (1 - i1), rel=1e-9)


def test_singular_quad_converges_geometrically():
    g = lambda x: np.exp(3 * x)
    exact = math.pi * math.exp(1.5) * i0(1.5)  # x = (1 + cos t) / 2
    errs = [abs(singular_quad(g, 0.0, 1.0, -0.5, nodes=n) - exact) for n in (2, 4, 8)]
    assert errs[0] / errs[1] >= 4 and errs[1] / max(errs[2], 1e-300) >= 4


@pytest.mark.parametrize("lo, hi", [(1.0, 1.0), (2.0, 1.0), (0.0, math.inf)])
def test_singular_quad_rejects_bad_interval(lo, hi):
    with pytest.raises(InputError):
        singular_quad(np.ones_like, lo, hi)


def test_singular_quad_rejects_non_finite_integrand():
    with pytest.raises(NumericError):
        singular_quad(lambda x: np.where(x > 0.5, np.nan, 1.0), 0.0, 1.0)


# ---------------------------------------------------------------------------
# SampledFunction


def test_sampled_function_invariants():
    with pytest.raises(InputError):
        SampledFunction.from_values([0.0], [1.0])
    with pytest.raises(InputError):
        SampledFunction.from_values([0.0, 1.0], [1.0])
    with pytest.raises(InputError):
        SampledFunction.from_values([0.0, 0.0, 1.0], [1.0, 2.0, 3.0])


def test_sampled_function_interpolates_cubics_exactly():
    x = np.linspace(0, 2, 9)
    f = SampledFunction.from_values(x, x**3 - x)
    z = np.linspace(0, 2, 101)
    assert np.max(np.abs(f(z) - (z**3 - z))) < 1e-12
    assert np.max(np.abs(f.derivative(z) - (3 * z**2 - 1))) < 1e-11


def test_sampled_function_keeps_square_root_lead():
    x = np.linspace(0, 1, 65)
    f = SampledFunction.from_callable(lambda y: np.sqrt(y) * (1 + y), x, lead=0.5)
    z = np.linspace(0, 1, 999)
    assert np.max(np.abs(f(z) - np.sqrt(z) * (1 + z))) < 1e-12


# ---------------------------------------------------------------------------
# Abel transform


@pytest.mark.parametrize(
    "g, expected",
    [
        (np.ones_like, lambda v: 2 * np.sqrt(v)),
        (lambda y: y, lambda v: 4.0 / 3.0 * v**1.5),
        (np.zeros_like, np.zeros_like),
    ],
    ids=["one", "linear", "zero"],
)
def test_abel_forward_closed_forms(g, expected):
    out = abel_forward(sampled(g))
    assert np.max(np.abs(out(GRID) - expected(GRID))) < 1e-12


def test_abel_forward_linear_against_riemann_sum():
    v = 0.7
    y = np.linspace(0, v, 2_000_001)[:-1] + v / 4_000_000
    riemann = np.sum(y / np.sqrt(v - y)) * v / 2_000_000
    assert float(abel_forward(sampled(lambda t: t))(v)) == pytest.approx(riemann, rel=1e-3)


@pytest.mark.parametrize(
    "F, expected",
    [(lambda v: 2 * np.sqrt(v), np.ones_like), (lambda v: 4.0 / 3.0 * v**1.5, lambda y: y)],
    ids=["sqrt", "three-halves"],
)
def test_abel_invert_closed_forms(F, expected):
    g = abel_invert(sampled(F))
    assert np.max(np.abs(g(GRID) - expected(GRID))) < 1e-6
    assert g.meta["f0_error"] is False


def test_abel_roundtrip_quadratic():
    g = lambda y: 1 + y + y * y
    back = abel_invert(abel_forward(sampled(g)))
    assert np.max(np.abs(back(GRID) - g(GRID))) <= 1e-6


def test_abel_invert_flags_nonzero_origin():
    out = abel_invert(sampled(lambda v: 1.0 + v))
    assert out.meta["f0_error"] is True


@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5))
def test_abel_roundtrip_random_polynomials(coeffs):
    g = lambda y: np.polynomial.polynomial.polyval(y, coeffs)
    back = abel_invert(abel_forward(sampled(g)))
    assert np.max(np.abs(back(GRID) - g(GRID))) <= 1e-6 * max(1.0, np.max(np.abs(coeffs)))


def test_abel_linearity():
    a, b = sampled(np.exp), sampled(np.cos)
    lhs = abel_forward(sampled(lambda y: 2 * np.exp(y) - 3 * np.cos(y)))
    rhs = 2 * abel_forward(a)(GRID) - 3 * abel_forward(b)(GRID)
    assert np.max(np.abs(lhs(GRID) - rhs)) < 1e-12


# ---------------------------------------------------------------------------
# fractional integrals


def test_half_integral_of_one():
    out = frac_integral(sampled(np.ones_like), 0.5)
    assert np.max(np.abs(out(GRID) - 2 * np.sqrt(GRID / math.pi))) < 1e-13


def test_half_integral_twice_is_antiderivative():
    f = sampled(lambda y: 1 + y**3)
    out = frac_integral(frac_integral(f, 0.5), 0.5)
    assert np.max(np.abs(out(GRID) - (GRID + GRID**4 / 4))) < 1e-10


def test_minus_one_is_derivative():
    out = frac_integral(sampled(lambda y: y * y), -1.0)
    assert np.max(np.abs(out(GRID) - 2 * GRID)) < 1e-10


SEMIGROUP_PAIRS = [(a, b) for a in HALF_ORDERS for b in HALF_ORDERS if a + b >= -1.5]


@pytest.mark.parametrize("alpha, beta", SEMIGROUP_PAIRS)
def test_fractional_semigroup(alpha, beta):
    f = sampled(lambda y: y * y + y**3)
    lhs = frac_integral(frac_integral(f, beta), alpha)
    rhs = frac_integral(f, alpha + beta)
    z = GRID[1:]
    assert np.max(np.abs(lhs(z) - rhs(z))) <= 1e-5


def test_negative_order_needs_a_fine_grid():
    with pytest.raises(NumericError):
        frac_integral(SampledFunction.from_values(np.linspace(0, 1, 5), np.ones(5)), -0.5)


def test_operations_are_bit_reproducible():
    f = sampled(lambda y: np.sin(3 * y) + y)
    a = frac_integral(f, -0.5)(GRID)
    b = frac_integral(f, -0.5)(GRID)
    assert np.array_equal(a, b, equal_nan=True)
    assert np.array_equal(abel_forward(f)(GRID), abel_forward(f)(GRID))


# ---------------------------------------------------------------------------
# windowed second order ODE


def _const(x, c):
    return SampledFunction.from_values(x, np.full_like(x, c))


def test_ode_algebraic_case():
    x = np.linspace(0, 2, 201)
    r = SampledFunction.from_values(x, np.sin(x))
    K = solve_linear_ode2(_const(x, 0.0), _const(x, 0.0), _const(x, 1.0), r, (-1.0, 0.0))
    assert np.max(np.abs(K(x[1:]) - np.sin(x[1:]))) < 1e-14


def test_ode_constant_second_derivative():
    x = np.linspace(0, 2, 401)
    K = solve_linear_ode2(_const(x, 1.0), _const(x, 0.0), _const(x, 0.0), _const(x, 2.0),
                          (-1.0, 0.0))
    assert np.max(np.abs(K(x) - x * x)) < 1e-9
    assert K.meta["residual"] < 1e-8


def test_ode_manufactured_euler_equation():
    # x^2 K'' + x K' - K = rhs with K = x^(3/2) (x - x0)_+^3, zero on [1, x0];
    # the cube keeps rhs continuous so a sampled rhs is representable
    x0 = 1.5
    x = np.linspace(1.0, 4.0, 3001)
    y = np.clip(x - x0, 0.0, None)
    K = x**1.5 * y**3
    dK = 1.5 * x**0.5 * y**3 + 3 * x**1.5 * y**2
    d2K = 0.75 * x**-0.5 * y**3 + 9 * x**0.5 * y**2 + 6 * x**1.5 * y
    rhs = x * x * d2K + x * dK - K
    sol = solve_linear_ode2(SampledFunction.from_values(x, x * x), SampledFunction.from_values(x, x),
                            _const(x, -1.0), SampledFunction.from_values(x, rhs), (1.0, x0))
    assert np.max(np.abs(sol(x) - K)) <= 1e-6 * np.max(np.abs(K))
    assert np.all(sol(x[x <= x0]) == 0)


def test_ode_rejects_bad_window():
    x = np.linspace(0, 1, 11)
    with pytest.raises(InputError):
        solve_linear_ode2(_const(x, 1.0), _const(x, 0.0), _const(x, 0.0), _const(x, 1.0), (0.5, 0.5))
    with pytest.raises(InputError):
        solve_linear_ode2(_const(x, 1.0), _const(x, 0.0), _const(x, 0.0), _const(x, 1.0), (0.0, 2.0))
