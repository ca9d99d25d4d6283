import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from postsde.errors import DomainError
from postsde.model import (PROBLEM_NAMES, BrownianDynamics, NoiseStream, QuadraticPotential, drift,
                           gibbs_log_density, make_problem)

PROBLEMS = [("ou", {}), ("linear2d", {"epsilon": 0.5}), ("doublewell1d", {}), ("nonstiff2d", {}),
            ("stiff3d", {}), ("spring", {"dim": 4}), ("free", {"dim": 2})]


def _fd(fun, x, eps=1e-6):
    cols = []
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = eps
        cols.append((fun(x + e) - fun(x - e)) / (2 * eps))
    return np.stack(cols, axis=-1)


@pytest.mark.parametrize("name,params", PROBLEMS)
def test_derivatives_match_finite_differences(name, params, rng):
    pot = make_problem(name, **params).potential
    for _ in range(5):
        x = rng.uniform(-1.2, 1.2, pot.dim)
        g = pot.gradient(x)
        H = pot.hessian(x)
        T = pot.third(x)
        scale = 1 + np.max(np.abs(H))
        np.testing.assert_allclose(g, _fd(pot.value, x), atol=1e-6 * (1 + np.max(np.abs(g))) * scale)
        np.testing.assert_allclose(H, _fd(pot.gradient, x), atol=1e-5 * scale)
        np.testing.assert_allclose(T, _fd(pot.hessian, x), atol=1e-4 * (1 + np.max(np.abs(T))))
        np.testing.assert_allclose(H, np.swapaxes(H, -1, -2))


@pytest.mark.parametrize("name,params", PROBLEMS)
def test_vectorized_evaluation_matches_pointwise(name, params, rng):
    pot = make_problem(name, **params).potential
    X = rng.uniform(-1, 1, (4, pot.dim))
    V = pot.value(X)
    G = pot.gradient(X)
    for i in range(4):
        assert V[i] == pytest.approx(float(pot.value(X[i])), rel=1e-14)
        np.testing.assert_allclose(G[i], pot.gradient(X[i]), rtol=1e-14)


def test_registry_and_errors():
    assert set(PROBLEM_NAMES) >= {"ou", "linear2d", "doublewell1d", "nonstiff2d", "stiff3d", "spring"}
    with pytest.raises(KeyError):
        make_problem("nope")
    with pytest.raises(ValueError):
        BrownianDynamics(QuadraticPotential([[1.0]]), sigma=0.0)


def test_linear2d_matrix():
    A = make_problem("linear2d", epsilon=1e-2).potential.matrix
    np.testing.assert_allclose(A, [[1, 0.25], [0.25, 100]])


def test_drift_and_density():
    p = make_problem("ou", gamma=2.0)
    assert drift(p, np.array([1.5]))[0] == pytest.approx(-3.0)
    assert gibbs_log_density(p, np.array([1.0])) == pytest.approx(-2.0 * 1.0 / 2.0)


def test_drift_rejects_non_finite_gradient():
    p = make_problem("doublewell1d")
    with pytest.raises(DomainError):
        with np.errstate(over="ignore"):
            drift(p, np.array([1e200]))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), traj=st.integers(0, 1000), n=st.integers(1, 30))
def test_noise_block_equals_sequential_draws(seed, traj, n):
    a = NoiseStream(seed, traj, 3)
    b = NoiseStream(seed, traj, 3)
    blk = a.block(n)
    seq = np.array([b.next() for _ in range(n)])
    np.testing.assert_array_equal(blk, seq)
    assert a.consumed == b.consumed == n


def test_noise_streams_are_independent_per_trajectory():
    a = NoiseStream(7, 0, 2).block(100)
    b = NoiseStream(7, 1, 2).block(100)
    assert not np.allclose(a, b)
    np.testing.assert_array_equal(a, NoiseStream(7, 0, 2).block(100))
