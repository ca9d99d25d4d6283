import math

import numpy as np
import pytest

from postsde import kernels
from postsde.ergodic import default_x0
from postsde.errors import StepFailure
from postsde.model import NoiseStream, make_problem
from postsde.newton import JacobianRefresh, NewtonConfig
from postsde.schemes import (PRESET_NAMES, PostKind, SchemeSpec, initial_state, postprocess, preset,
                             step_nonmarkovian, step_theta_modified, step_theta_standard)

SQ2 = math.sqrt(2.0)


def test_euler_step_formula():
    p = make_problem("doublewell1d")
    x, xi, h = np.array([0.3]), np.array([0.7]), 0.01
    out = step_theta_modified(p, preset("euler"), h, initial_state(x), xi)
    expected = x - h * p.potential.gradient(x) + SQ2 * math.sqrt(h) * xi
    np.testing.assert_allclose(out.next.x, expected, rtol=1e-15)
    np.testing.assert_array_equal(out.processed, x)


def test_implicit_euler_on_quadratic_solves_linear_system():
    p = make_problem("linear2d", epsilon=1e-3)
    A = p.potential.matrix
    x, xi, h = np.array([1.0, -2.0]), np.array([0.3, -0.1]), 0.2
    out = step_theta_modified(p, preset("implicit_euler"), h, initial_state(x), xi)
    expected = np.linalg.solve(np.eye(2) + h * A, x + SQ2 * math.sqrt(h) * xi)
    np.testing.assert_allclose(out.next.x, expected, rtol=1e-12, atol=1e-13)


def test_theta_half_is_trapezoidal_on_ou():
    p = make_problem("ou", gamma=1.5)
    x, xi, h = np.array([0.8]), np.array([-0.4]), 0.3
    out = step_theta_standard(p, preset("theta_half"), h, initial_state(x), xi)
    z = -1.5 * h
    expected = ((1 + z / 2) * x + SQ2 * math.sqrt(h) * xi) / (1 - z / 2)
    np.testing.assert_allclose(out.next.x, expected, rtol=1e-13)


def test_standard_form_rejects_shift():
    with pytest.raises(ValueError):
        step_theta_standard(make_problem("ou"), preset("em_shift"), 0.1, initial_state([0.0]), np.zeros(1))


def test_presets_and_theta_std():
    assert "theta1_stab" in PRESET_NAMES
    s = preset("theta_std(0.75)")
    assert s.theta == 0.75 and s.a == 0 and s.post_kind is PostKind.NONE
    stab = preset("theta1_stab")
    assert stab.a == pytest.approx(-0.5 + SQ2 / 2)
    assert stab.c == pytest.approx(math.sqrt(2 * SQ2 - 1) / 2)
    det = preset("theta1_det")
    assert det.b == pytest.approx(SQ2 / 2) and det.c == pytest.approx(math.sqrt(4 * SQ2 - 1) / 2)
    assert preset("em_shift_det").b == -0.25
    with pytest.raises(KeyError):
        preset("rk4")
    with pytest.raises(ValueError):
        SchemeSpec(1.5)


def test_stabilized_postprocessor_formula():
    p = make_problem("linear2d", epsilon=0.1)
    spec = preset("theta1_stab")
    h = 0.1
    state = initial_state([0.5, -0.5])
    state.prev_xi = np.array([0.2, 0.1])
    xi = np.array([1.0, -1.0])
    xs = state.x + spec.a * SQ2 * math.sqrt(h) * state.prev_xi
    J = np.eye(2) + h * p.potential.hessian(xs)
    expected = state.x + spec.c * SQ2 * math.sqrt(h) * np.linalg.solve(J, xi)
    np.testing.assert_allclose(postprocess(p, spec, h, state, xi), expected, rtol=1e-13)


def test_deterministic_postprocessor_solves_implicit_equation():
    p = make_problem("doublewell1d")
    spec = preset("theta1_det")
    h = 0.05
    x, xi = np.array([0.4]), np.array([0.9])
    xb = postprocess(p, spec, h, initial_state(x), xi)
    lhs = xb + spec.b * h * p.potential.gradient(xb)
    np.testing.assert_allclose(lhs, x + spec.c * SQ2 * math.sqrt(h) * xi, atol=1e-13)


@pytest.mark.parametrize("name,params,h", [("ou", {}, 0.05), ("doublewell1d", {}, 0.01),
                                          ("nonstiff2d", {}, 1e-3), ("spring", {"dim": 3}, 1e-3)])
def test_em_shift_equals_nonmarkovian_recursion(name, params, h):
    p = make_problem(name, **params)
    spec = preset("em_shift")
    stream = NoiseStream(3, 0, p.dim)
    xis = stream.block(201)
    state = initial_state(default_x0(p))
    bars = []
    for n in range(200):
        out = step_theta_modified(p, spec, h, state, xis[n])
        bars.append(out.processed)
        state = out.next
    xb = bars[0]
    for n in range(1, 200):
        xb = step_nonmarkovian(p, h, xb, xis[n - 1], xis[n])
        np.testing.assert_allclose(xb, bars[n], rtol=1e-12, atol=1e-12)


def test_compute_post_does_not_change_kernel():
    p = make_problem("nonstiff2d")
    state = initial_state([0.5, 0.2])
    xi = np.array([0.3, -1.2])
    a = step_theta_modified(p, preset("theta1_stab"), 0.05, state, xi, compute_post=True)
    b = step_theta_modified(p, preset("theta1_stab").kernel(), 0.05, state, xi, compute_post=False)
    np.testing.assert_array_equal(a.next.x, b.next.x)


def test_step_failure_carries_counts():
    p = make_problem("doublewell1d")
    cfg = NewtonConfig(max_iterations=1)
    with pytest.raises(StepFailure) as info:
        step_theta_modified(p, preset("implicit_euler"), 0.5, initial_state([3.0]), np.array([2.0]), cfg)
    assert info.value.iterations >= 1


def test_invalid_step_size():
    with pytest.raises(ValueError):
        step_theta_modified(make_problem("ou"), preset("euler"), 0.0, initial_state([0.0]), np.zeros(1))


CASES = [("ou", {}, "em_shift", 0.1), ("ou", {}, "theta1_det", 0.3),
         ("linear2d", {"epsilon": 1.0}, "theta1_stab", 0.1),
         ("linear2d", {"epsilon": 0.5}, "theta_half", 0.2),
         ("doublewell1d", {}, "theta1_stab", 0.05), ("doublewell1d", {}, "em_shift_det", 0.01),
         ("nonstiff2d", {}, "theta1_det", 0.02), ("nonstiff2d", {}, "theta1_plain", 0.02),
         ("spring", {"dim": 5}, "implicit_euler", 0.02), ("stiff3d", {}, "theta1_stab", 1e-3)]


def _advance(problem, spec, h, noise, newton):
    x = default_x0(problem).copy()
    prev = np.zeros(problem.dim)
    out = np.empty_like(noise)
    res = kernels.advance_problem(problem, spec, h, x, prev, 0, noise, out, newton, 1e6, True)
    return res, x, out


@pytest.mark.skipif(not kernels.COMPILED_AVAILABLE, reason="compiled kernel not built")
@pytest.mark.parametrize("refresh", ["every", "once"])
@pytest.mark.parametrize("name,params,scheme,h", CASES)
def test_compiled_matches_pure(name, params, scheme, h, refresh):
    p = make_problem(name, **params)
    spec = preset(scheme)
    newton = NewtonConfig(jacobian_refresh=refresh)
    noise = NoiseStream(11, 2, p.dim).block(300)
    old = kernels.use_backend("compiled")
    try:
        rc, xc, oc = _advance(p, spec, h, noise, newton)
        kernels.use_backend("pure")
        rp, xp, op = _advance(p, spec, h, noise, newton)
    finally:
        kernels.use_backend(old)
    assert rc[:3] == rp[:3]  # steps, status, has_prev
    assert rc[3] == rp[3] and rc[4] == rp[4]  # Newton iterations and factorizations
    np.testing.assert_allclose(xc, xp, rtol=1e-11, atol=1e-12)
    np.testing.assert_allclose(oc[:rc[0]], op[:rp[0]], rtol=1e-11, atol=1e-12)


def test_pure_backend_reports_explosion(pure_backend):
    p = make_problem("ou")
    noise = np.ones((50, 1))
    x = np.array([1.0])
    res = kernels.advance_problem(p, preset("euler"), 3.0, x, np.zeros(1), 0, noise, np.empty((50, 1)),
                                  NewtonConfig(), 1e6, True)
    assert res[1] == kernels.STATUS_EXPLODED and res[0] < 50
