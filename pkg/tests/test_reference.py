import math

import numpy as np
import pytest

from postsde.errors import DomainError
from postsde.model import BrownianDynamics, QuadraticPotential, SpringPotential, make_problem
from postsde.observables import Polynomial, RadialObservable, make_observable
from postsde.reference import (Method, ReferenceCache, ReferenceValue, gaussian_reference, integration_box,
                               radial_quadrature, reference_value, spring_reference, tensor_quadrature)

S2 = math.sqrt(2)


def test_ou_second_moment():
    ref = gaussian_reference([[1.0]], S2, make_observable("x1sq", 1))
    assert ref.value == pytest.approx(1.0, rel=1e-14)
    assert ref.method is Method.GAUSSIAN


def test_linear2d_trace():
    ref = reference_value(make_problem("linear2d", epsilon=1.0), make_observable("second_moment", 2))
    assert ref.value == pytest.approx(32 / 15, rel=1e-14)


def test_identity_component_moment():
    assert gaussian_reference(np.eye(2), S2, make_observable("x1sq", 2)).value == pytest.approx(1.0)


def test_gaussian_fourth_moment():
    # E x^4 = 3 var^2 with var = sigma^2 / (2 gamma)
    ref = gaussian_reference([[2.0]], S2, make_observable("x4", 1))
    assert ref.value == pytest.approx(3 * 0.5 ** 2, rel=1e-13)


def test_non_spd_rejected():
    with pytest.raises(DomainError):
        gaussian_reference([[1.0, 2.0], [2.0, 1.0]], S2, make_observable("x1sq", 2))


@pytest.mark.parametrize("eps", [1.0, 1e-2])
@pytest.mark.parametrize("obs", ["second_moment", "pb2", "x1sq"])
def test_tensor_matches_gaussian(eps, obs):
    p = make_problem("linear2d", epsilon=eps)
    phi = make_observable(obs, 2)
    exact = gaussian_reference(p.potential.matrix, p.sigma, phi).value
    quad = tensor_quadrature(p, phi)
    assert quad.value == pytest.approx(exact, rel=1e-8)
    assert quad.method is Method.TENSOR


def test_normalization():
    p = make_problem("doublewell1d")
    assert tensor_quadrature(p, Polynomial({(0,): 1.0}, 1)).value == pytest.approx(1.0, rel=1e-13)


def test_doublewell_reference_stable():
    ref = reference_value(make_problem("doublewell1d"), make_observable("x1sq", 1))
    assert ref.estimated_error < 1e-8
    assert ref.value == pytest.approx(0.8327454871283801, rel=1e-9)


def test_box_contains_both_wells():
    box = integration_box(make_problem("doublewell1d"))
    ends = [box.to_x(np.array([box.lower[0]])), box.to_x(np.array([box.upper[0]]))]
    assert min(e[0] for e in ends) < -2 and max(e[0] for e in ends) > 2


def test_radial_shell_moments():
    # flat weight on [0, 1]: E r = d / (d + 1)
    for d in (1, 3, 10):
        ref = radial_quadrature(lambda r: np.zeros_like(r), lambda r: r, d, rmax=1.0)
        assert ref.value == pytest.approx(d / (d + 1), rel=1e-12)


def test_radial_equals_tensor_in_one_dimension():
    p = BrownianDynamics(SpringPotential(1), S2, name="spring")
    g = lambda r: (r - 1.0) ** 2
    rad = spring_reference(p, g)
    ten = tensor_quadrature(p, RadialObservable(g, 1))
    assert rad.value == pytest.approx(ten.value, rel=1e-8)


def test_spring_reference_finite_and_concentrated():
    p = make_problem("spring", dim=10)
    ref = reference_value(p, make_observable("radial_sq", 10))
    assert ref.method is Method.RADIAL
    assert 0 < ref.value < 0.5
    assert ref.estimated_error < 1e-8 * ref.value


def test_tensor_dimension_limit():
    p = BrownianDynamics(QuadraticPotential(np.eye(4)), S2)
    with pytest.raises(DomainError):
        tensor_quadrature(p, make_observable("second_moment", 4))


def test_cache_round_trip(tmp_path):
    cache = ReferenceCache(str(tmp_path / "refs.txt"))
    key = ReferenceCache.key("ou", S2, "x1sq")
    assert cache.get(key) is None
    ref = ReferenceValue(0.1 + 0.2, Method.TENSOR, 1e-12)
    cache.put(key, ref)
    cache.put(ReferenceCache.key("ou", 1.0, "x1sq"), ReferenceValue(0.5, Method.GAUSSIAN, 0.0))
    assert ReferenceCache(cache.path).get(key) == ref
