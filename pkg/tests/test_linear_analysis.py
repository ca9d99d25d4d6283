import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from postsde.errors import PoleError, StabilityError, SynthesisError
from postsde.linear_analysis import (Rational, TruncatedSeries, Z, a_stability_scan, defect_order,
                                     invariant_defect, invariant_defect_rational, is_mean_square_stable,
                                     l_stability, method_functions, stationary_variance,
                                     synthesize_postprocessor, variance_amplification)
from postsde.schemes import PostKind, SchemeSpec, preset


def fns(name):
    return method_functions(preset(name))


# ---------------------------------------------------------------- series arithmetic

def test_series_of_geometric_function():
    s = (Rational.const(1) / (1 - Z)).series(6)
    assert list(s.coefficients) == [1] * 7


def test_series_power_recurrence_matches_binomial():
    s = TruncatedSeries([Fraction(1), Fraction(1)], 6).power(Fraction(-1, 2))
    expected = [Fraction(math.comb(2 * k, k), 4 ** k) * (-1) ** k for k in range(7)]
    assert list(s.coefficients) == expected


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=2, max_size=5), st.lists(st.floats(-2, 2), min_size=1, max_size=4))
def test_series_matches_rational_at_small_z(num, den):
    den = [1.0] + den
    R = Rational(num, den)
    ser = R.series(10)
    for z in (1e-3, -2e-3):
        assert ser(z) == pytest.approx(R(z), rel=1e-9, abs=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.fractions(-3, 3, max_denominator=7), min_size=1, max_size=4))
def test_series_division_inverts_multiplication(coefs):
    a = TruncatedSeries([Fraction(1)] + coefs, 6)
    b = TruncatedSeries([Fraction(2), Fraction(1, 3)], 6)
    assert ((a * b) / b).coefficients == a.coefficients


def test_rational_reduction_and_poles():
    R = (1 - Z * Z) / (1 - Z)
    assert R.den == (Fraction(1),)
    with pytest.raises(PoleError):
        (Rational.const(1) / Z)(0.0)
    with pytest.raises(PoleError):
        (Rational.const(1) / Z).series(3)


# ---------------------------------------------------------------- method functions

def test_theta_method_stability_function():
    f = method_functions(SchemeSpec(0.5))
    z = -0.7
    assert f.A(z) == pytest.approx((1 + z / 2) / (1 - z / 2))
    assert f.B(z) == pytest.approx(1 / (1 - z / 2))


def test_em_shift_variance_amplification():
    R = variance_amplification(fns("em_shift"))
    for z in (-0.1, -0.5, -1.5):
        assert R(z) == pytest.approx(1 + z / 2, rel=1e-14)


def test_variance_amplification_pole_when_unstable_boundary():
    R = variance_amplification(fns("euler"))
    with pytest.raises(PoleError):
        R(-2.0)


@pytest.mark.parametrize("name,order", [("euler", 1), ("implicit_euler", 1), ("theta_half", math.inf),
                                        ("em_shift", math.inf), ("em_shift_det", 2),
                                        ("theta1_stab", 2), ("theta1_plain", 2), ("theta1_det", 3)])
def test_defect_orders(name, order):
    assert defect_order(fns(name)) == order


def test_exact_zero_defects():
    assert invariant_defect(fns("em_shift")).is_exactly_zero()
    assert invariant_defect_rational(fns("em_shift")).is_zero()
    assert invariant_defect(fns("theta_half")).is_exactly_zero()


def test_stationary_variance_examples():
    assert stationary_variance(fns("em_shift"), 1.0, math.sqrt(2), 0.5) == pytest.approx(1.0, rel=1e-14)
    # Euler on OU: 1 / (1 - h/2)
    assert stationary_variance(fns("euler"), 1.0, math.sqrt(2), 0.5) == pytest.approx(4 / 3, rel=1e-14)
    with pytest.raises(StabilityError):
        stationary_variance(fns("euler"), 1.0, math.sqrt(2), 2.5)


@settings(max_examples=60, deadline=None)
@given(theta=st.sampled_from([0.0, 0.5, 0.75, 1.0]), a=st.floats(-0.5, 0.5), c=st.floats(0, 1.5),
       kind=st.sampled_from(list(PostKind)), gamma=st.floats(0.2, 5), h=st.floats(0.01, 1.5),
       b=st.floats(-1, 1))
def test_stationary_variance_matches_linear_recursion(theta, a, c, kind, gamma, h, b):
    """Oracle: stationary variance of X_{n+1} = A X_n + B s xi_n, Xbar_n = C X_n + D s xi_n."""
    spec = SchemeSpec(theta, a=a, b=b, c=c, post_kind=kind)
    f = method_functions(spec)
    z = -gamma * h
    A = f.A(z)
    assume(abs(A) < 0.999)
    sigma = math.sqrt(2)
    s2 = sigma ** 2 * h
    var_x = f.B(z) ** 2 * s2 / (1 - A * A)
    expected = f.C(z) ** 2 * var_x + f.D(z) ** 2 * s2
    assert stationary_variance(f, gamma, sigma, h) == pytest.approx(expected, rel=1e-10)


# ---------------------------------------------------------------- stability

def test_euler_mean_square_stability_region():
    f = fns("euler")
    for h in (0.5, 1.0, 1.9, 1.999):
        assert is_mean_square_stable(f, -h)
    for h in (2.0, 2.5, 10.0):
        assert not is_mean_square_stable(f, -h)


@pytest.mark.parametrize("theta,expected", [(0, False), (0.25, False), (0.5, True), (0.75, True), (1, True)])
def test_a_stability(theta, expected):
    assert a_stability_scan(method_functions(SchemeSpec(theta))) is expected


def test_l_stability():
    assert l_stability(fns("implicit_euler")).kernel_l_stable
    assert not l_stability(fns("theta_half")).kernel_l_stable
    assert not l_stability(method_functions(SchemeSpec(0.75))).kernel_l_stable
    assert l_stability(fns("theta1_stab")).postprocessed_damped
    assert l_stability(fns("theta1_det")).postprocessed_damped
    assert not l_stability(fns("theta1_plain")).postprocessed_damped


# ---------------------------------------------------------------- synthesis

def test_synthesized_euler_postprocessor():
    C = synthesize_postprocessor(fns("euler"), 3)
    assert [float(v) for v in C.coefficients] == pytest.approx([1, 0.25, -0.03125])
    f = fns("euler")
    R = variance_amplification(f).series(2)
    defect = R * C * C - 1
    assert all(abs(float(v)) < 1e-15 for v in defect.coefficients)


def test_synthesized_postprocessor_for_em_shift_kernel():
    C = synthesize_postprocessor(method_functions(preset("em_shift").kernel()), 2)
    assert [float(v) for v in C.coefficients] == pytest.approx([1, -0.25])


def test_synthesis_rejects_nonpositive_R0():
    f = method_functions(SchemeSpec(0.0))
    bad = type(f)(f.A, Rational.const(0) * f.B + Z, f.C, f.D)
    with pytest.raises(SynthesisError):
        synthesize_postprocessor(bad, 2)
