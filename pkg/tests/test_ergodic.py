import math

import numpy as np
import pytest

from postsde import kernels
from postsde.ergodic import (ConvergenceRow, RunConfig, convergence_study, default_x0, ensemble_average,
                             fit_loglog_slope, time_average)
from postsde.errors import ConfigError, EstimationError
from postsde.linear_analysis import method_functions, stationary_variance
from postsde.model import NoiseStream, make_problem
from postsde.newton import NewtonConfig
from postsde.observables import make_observable
from postsde.schemes import PostKind, SchemeSpec, preset

OU = make_problem("ou")
X2 = make_observable("x1sq", 1)
PRESETS = ["euler", "theta_half", "implicit_euler", "em_shift", "em_shift_det", "theta1_stab",
           "theta1_plain", "theta1_det"]


def test_run_config_validation():
    assert RunConfig(0.1, 10.0).steps == 100
    assert RunConfig(0.1, 10.0, burn_in=0.25).burn_in_steps == 25
    for kwargs in ({"h": 0.0, "T": 1.0}, {"h": 0.1, "T": 1.0, "M": 0}, {"h": 0.1, "T": 1.0, "burn_in": 1.0},
                   {"h": 1.0, "T": 0.1}):
        with pytest.raises(ConfigError):
            RunConfig(**kwargs)


def test_default_starting_points():
    np.testing.assert_array_equal(default_x0(make_problem("linear2d")), [-3, -3])
    np.testing.assert_array_equal(default_x0(make_problem("nonstiff2d")), [1, 2])
    np.testing.assert_array_equal(default_x0(make_problem("stiff3d")), [1, 2, 3])


@pytest.mark.parametrize("estimator", [time_average, ensemble_average])
def test_determinism_across_workers(estimator):
    p = make_problem("nonstiff2d")
    phi = make_observable("pb2", 2)
    spec = preset("theta1_stab")
    base = RunConfig(0.05, 20.0, M=6, base_seed=4)
    results = [estimator(p, spec, RunConfig(0.05, 20.0, M=6, base_seed=4, workers=w), phi) for w in (1, 3, 8)]
    for r in results[1:]:
        np.testing.assert_array_equal(r.per_trajectory, results[0].per_trajectory)
        assert r.estimate == results[0].estimate
    assert estimator(p, spec, base, phi).estimate == results[0].estimate


@pytest.mark.parametrize("post", [PostKind.NOISE_SHIFT, PostKind.STOCHASTIC_STABILIZED,
                                  PostKind.STOCHASTIC_PLAIN, PostKind.DETERMINISTIC_IMPLICIT])
def test_postprocessor_is_not_invasive(post):
    p = make_problem("doublewell1d")
    spec = preset("theta1_det").with_post(post)
    noise = NoiseStream(2, 0, 1).block(500)
    finals = []
    for s, compute in ((spec.kernel(), False), (spec, True)):
        x = default_x0(p).copy()
        prev = np.zeros(1)
        kernels.advance_problem(p, s, 0.05, x, prev, 0, noise, np.empty((500, 1)), NewtonConfig(), 1e6, compute)
        finals.append(x)
    np.testing.assert_array_equal(finals[0], finals[1])


@pytest.mark.parametrize("name", PRESETS)
@pytest.mark.parametrize("h", [0.1, 0.2, 0.4])
def test_ou_stationary_second_moment(name, h):
    spec = preset(name)
    exact = stationary_variance(method_functions(spec), 1.0, math.sqrt(2), h)
    res = time_average(OU, spec, RunConfig(h, 2000.0, M=10, base_seed=5), X2)
    se = res.spread / math.sqrt(10)
    assert abs(res.estimate - exact) <= 3 * se + 1e-12


def test_em_shift_ensemble_on_ou():
    res = ensemble_average(OU, preset("em_shift"), RunConfig(0.5, 20.0, M=400, base_seed=1), X2)
    assert abs(res.estimate - 1.0) <= 3 * res.spread / math.sqrt(400)


def test_explosions_are_counted_not_dropped():
    with pytest.raises(EstimationError):
        time_average(OU, preset("euler"), RunConfig(2.5, 100.0, M=3), X2)


def test_dimension_mismatch():
    with pytest.raises(ConfigError):
        time_average(OU, preset("euler"), RunConfig(0.1, 1.0, M=1), make_observable("x1sq", 2))


def test_newton_failures_reported():
    p = make_problem("doublewell1d")
    cfg = RunConfig(0.5, 50.0, M=4, base_seed=0, newton=NewtonConfig(max_iterations=2))
    rep = convergence_study(p, preset("implicit_euler"), cfg, X2, [0.5], 0.83)
    row = rep.rows[0]
    assert row.newton_failures == row.rejected == 4
    assert math.isnan(row.estimate)


def test_slope_fit_uses_points_above_floor():
    rows = [ConvergenceRow(h, 0, 0, h ** 2, 0.01, 0, 0) for h in (0.2, 0.4, 0.8)]
    rows.append(ConvergenceRow(0.05, 0, 0, 0.0025, 0.01, 0, 0))
    assert fit_loglog_slope(rows) == pytest.approx(2.0)
    assert math.isnan(fit_loglog_slope(rows[:1]))


def test_em_shift_det_sign_empirically():
    """b = -1/4 reproduces its O(h^2) theory on OU; b = +1/4 would be visibly biased."""
    spec = preset("em_shift_det")
    flipped = SchemeSpec(0.0, a=0.5, b=0.25, post_kind=PostKind.DETERMINISTIC_IMPLICIT)
    errors = []
    for h in (0.2, 0.4, 0.8):
        res = time_average(OU, spec, RunConfig(h, 1e4, M=10, base_seed=2), X2)
        se = res.spread / math.sqrt(10)
        assert abs(res.estimate - stationary_variance(method_functions(spec), 1.0, math.sqrt(2), h)) <= 3 * se
        wrong = stationary_variance(method_functions(flipped), 1.0, math.sqrt(2), h)
        assert abs(res.estimate - wrong) > 10 * se
        errors.append(abs(res.estimate - 1.0))
    slope = np.polyfit(np.log([0.4, 0.8]), np.log(errors[1:]), 1)[0]
    assert 1.5 < slope < 2.5


def test_pure_fallback_gives_same_estimate(pure_backend):
    p = make_problem("doublewell1d")
    cfg = RunConfig(0.1, 50.0, M=2, base_seed=9)
    pure = time_average(p, preset("theta1_stab"), cfg, X2)
    kernels.use_backend("compiled" if kernels.COMPILED_AVAILABLE else "pure")
    comp = time_average(p, preset("theta1_stab"), cfg, X2)
    np.testing.assert_allclose(pure.per_trajectory, comp.per_trajectory, rtol=1e-10)
