"""Potentials, Brownian dynamics problems and the Gaussian noise source.

All potentials evaluate on arrays of shape ``(..., d)``; ``gradient``
returns ``(..., d)``, ``hessian`` ``(..., d, d)`` and ``third`` the
third-derivative tensor ``(..., d, d, d)`` of ``V``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

DEFAULT_SIGMA = math.sqrt(2.0)

# Model identifiers understood by the compiled trajectory kernel.
KERNEL_QUADRATIC = 0
KERNEL_DOUBLEWELL = 1
KERNEL_NONSTIFF2D = 2
KERNEL_STIFF3D = 3
KERNEL_SPRING = 4


class Potential:
    """Smooth potential ``V : R^d -> R``.

    Subclasses implement ``value``, ``gradient``, ``hessian`` and ``third``.
    ``kernel_spec`` returns ``(model_id, params)`` when the compiled kernel
    knows the potential, ``None`` otherwise.
    """

    dim: int
    name = "potential"

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        raise NotImplementedError

    def third(self, x):
        raise NotImplementedError

    def kernel_spec(self):
        return None

    def minimum_guesses(self):
        """Starting points for locating the global minimizer."""
        return [np.zeros(self.dim)]

    def __repr__(self):
        return f"{type(self).__name__}(dim={self.dim})"


class QuadraticPotential(Potential):
    """``V(x) = x^T A x / 2`` with a symmetric matrix ``A``."""

    name = "quadratic"

    def __init__(self, matrix):
        A = np.atleast_2d(np.asarray(matrix, dtype=float))
        if A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(A, A.T, rtol=0, atol=1e-14 * max(1.0, np.abs(A).max())):
            raise ValueError("matrix must be symmetric")
        self.matrix = 0.5 * (A + A.T)
        self.dim = A.shape[0]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return 0.5 * np.einsum("...i,ij,...j->...", x, self.matrix, x)

    def gradient(self, x):
        return np.asarray(x, dtype=float) @ self.matrix

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return np.broadcast_to(self.matrix, x.shape[:-1] + self.matrix.shape).copy()

    def third(self, x):
        x = np.asarray(x, dtype=float)
        d = self.dim
        return np.zeros(x.shape[:-1] + (d, d, d))

    def kernel_spec(self):
        return KERNEL_QUADRATIC, self.matrix.ravel().copy()

    def __repr__(self):
        return f"QuadraticPotential({self.matrix.tolist()})"


class DoubleWell1D(Potential):
    """``V(x) = (1 - x^2)^2``."""

    name = "doublewell1d"
    dim = 1

    def value(self, x):
        x = np.asarray(x, dtype=float)[..., 0]
        return (1.0 - x * x) ** 2

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return 4.0 * x * x * x - 4.0 * x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        return (12.0 * x * x - 4.0)[..., None]

    def third(self, x):
        x = np.asarray(x, dtype=float)
        return (24.0 * x)[..., None, None]

    def kernel_spec(self):
        return KERNEL_DOUBLEWELL, np.zeros(0)

    def minimum_guesses(self):
        return [np.array([1.0]), np.array([-1.0])]


class NonStiff2D(Potential):
    """``V = (1-x1^2)^2 + x2^4 - x1 + x1 cos(x2) + (x2 + x1^2)^2``.

    The linear term is taken as ``-x1``.
    """

    name = "nonstiff2d"
    dim = 2

    def value(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        return ((1 - x1 * x1) ** 2 + x2 ** 4 - x1 + x1 * np.cos(x2)
                + (x2 + x1 * x1) ** 2)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        s = x2 + x1 * x1
        g1 = -4 * x1 * (1 - x1 * x1) - 1 + np.cos(x2) + 4 * x1 * s
        g2 = 4 * x2 ** 3 - x1 * np.sin(x2) + 2 * s
        return np.stack([g1, g2], axis=-1)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        h11 = -4 + 24 * x1 * x1 + 4 * x2
        h12 = -np.sin(x2) + 4 * x1
        h22 = 12 * x2 * x2 - x1 * np.cos(x2) + 2
        return np.stack([np.stack([h11, h12], -1), np.stack([h12, h22], -1)], -2)

    def third(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2 = x[..., 0], x[..., 1]
        T = np.zeros(x.shape[:-1] + (2, 2, 2))
        T[..., 0, 0, 0] = 48 * x1
        for idx in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
            T[(Ellipsis,) + idx] = 4.0
        for idx in [(0, 1, 1), (1, 0, 1), (1, 1, 0)]:
            T[(Ellipsis,) + idx] = -np.cos(x2)
        T[..., 1, 1, 1] = 24 * x2 + x1 * np.sin(x2)
        return T

    def kernel_spec(self):
        return KERNEL_NONSTIFF2D, np.zeros(0)

    def minimum_guesses(self):
        return [np.array(p, dtype=float) for p in [(1, -1), (-1, -1), (0, 0), (1, 1), (-1, 1)]]


class Stiff3D(Potential):
    """``V = (1-x1^2)^2 + x2^4 - x1 + x3 cos(x2) + 100 (x2+x1^2)^2 + 1e6 (x1-x3)^2 / 2``."""

    name = "stiff3d"
    dim = 3

    def __init__(self, coupling=1e6, well=100.0):
        self.coupling = float(coupling)
        self.well = float(well)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        return ((1 - x1 * x1) ** 2 + x2 ** 4 - x1 + x3 * np.cos(x2)
                + self.well * (x2 + x1 * x1) ** 2 + 0.5 * self.coupling * (x1 - x3) ** 2)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        s = x2 + x1 * x1
        k, w = self.coupling, self.well
        g1 = -4 * x1 * (1 - x1 * x1) - 1 + 4 * w * x1 * s + k * (x1 - x3)
        g2 = 4 * x2 ** 3 - x3 * np.sin(x2) + 2 * w * s
        g3 = np.cos(x2) - k * (x1 - x3)
        return np.stack([g1, g2, g3], axis=-1)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        k, w = self.coupling, self.well
        H = np.zeros(x.shape[:-1] + (3, 3))
        H[..., 0, 0] = -4 + 12 * x1 * x1 + 4 * w * x2 + 12 * w * x1 * x1 + k
        H[..., 0, 1] = H[..., 1, 0] = 4 * w * x1
        H[..., 0, 2] = H[..., 2, 0] = -k
        H[..., 1, 1] = 12 * x2 * x2 - x3 * np.cos(x2) + 2 * w
        H[..., 1, 2] = H[..., 2, 1] = -np.sin(x2)
        H[..., 2, 2] = k
        return H

    def third(self, x):
        x = np.asarray(x, dtype=float)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        w = self.well
        T = np.zeros(x.shape[:-1] + (3, 3, 3))
        T[..., 0, 0, 0] = 24 * x1 + 24 * w * x1
        for idx in [(0, 0, 1), (0, 1, 0), (1, 0, 0)]:
            T[(Ellipsis,) + idx] = 4 * w
        T[..., 1, 1, 1] = 24 * x2 + x3 * np.sin(x2)
        for idx in [(1, 1, 2), (1, 2, 1), (2, 1, 1)]:
            T[(Ellipsis,) + idx] = -np.cos(x2)
        return T

    def kernel_spec(self):
        return KERNEL_STIFF3D, np.array([self.coupling, self.well])

    def minimum_guesses(self):
        return [np.array(p, dtype=float) for p in [(1, -1, 1), (-1, -1, -1), (0, 0, 0)]]


class SpringPotential(Potential):
    """``V(x) = k (1 - |x|)^4`` in ``d`` dimensions (default ``k = 25``)."""

    name = "spring"

    def __init__(self, dim=10, stiffness=25.0):
        self.dim = int(dim)
        self.stiffness = float(stiffness)

    def _radius(self, x):
        r = np.sqrt(np.sum(x * x, axis=-1))
        return np.maximum(r, 1e-300)

    def radial(self, r, order=0):
        """``g(r) = k (1-r)^4`` and its derivatives in ``r``."""
        k, u = self.stiffness, 1.0 - np.asarray(r, dtype=float)
        return [k * u ** 4, -4 * k * u ** 3, 12 * k * u ** 2, -24 * k * u][order]

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.radial(np.sqrt(np.sum(x * x, axis=-1)))

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = self._radius(x)
        return (self.radial(r, 1) / r)[..., None] * x

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        r = self._radius(x)
        u = x / r[..., None]
        g1, g2 = self.radial(r, 1), self.radial(r, 2)
        alpha = g2 - g1 / r
        beta = g1 / r
        eye = np.eye(self.dim)
        return alpha[..., None, None] * u[..., :, None] * u[..., None, :] + beta[..., None, None] * eye

    def third(self, x):
        x = np.asarray(x, dtype=float)
        r = self._radius(x)
        u = x / r[..., None]
        g1, g2, g3 = self.radial(r, 1), self.radial(r, 2), self.radial(r, 3)
        alpha = g2 - g1 / r
        dalpha = g3 - g2 / r + g1 / r ** 2
        dbeta = g2 / r - g1 / r ** 2
        eye = np.eye(self.dim)
        P = eye - u[..., :, None] * u[..., None, :]
        uuu = u[..., :, None, None] * u[..., None, :, None] * u[..., None, None, :]
        # d/dx_k of alpha u_i u_j + beta delta_ij
        t = dalpha[..., None, None, None] * uuu
        a_r = (alpha / r)[..., None, None, None]
        t = t + a_r * (P[..., :, None, :] * u[..., None, :, None] + u[..., :, None, None] * P[..., None, :, :])
        t = t + dbeta[..., None, None, None] * eye[:, :, None] * u[..., None, None, :]
        return t

    def kernel_spec(self):
        return KERNEL_SPRING, np.array([self.stiffness])

    def minimum_guesses(self):
        e = np.zeros(self.dim)
        e[0] = 1.0
        return [e]


@dataclass(frozen=True)
class BrownianDynamics:
    """``dX = -grad V(X) dt + sigma dW`` with ``W`` of the same dimension as ``X``."""

    potential: Potential
    sigma: float = DEFAULT_SIGMA
    name: str = field(default="custom", compare=False)

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")

    @property
    def dim(self):
        return self.potential.dim


def drift(problem: BrownianDynamics, x):
    """``f(x) = -grad V(x)``; raises :class:`DomainError` on non-finite output."""
    g = problem.potential.gradient(x)
    if not np.all(np.isfinite(g)):
        raise DomainError(f"non-finite gradient at x={np.asarray(x).tolist()}")
    return -g


def drift_jacobian(problem: BrownianDynamics, x):
    return -problem.potential.hessian(x)


def gibbs_log_density(problem: BrownianDynamics, x):
    """Unnormalized log of the Gibbs density, ``-2 V(x) / sigma^2``."""
    return -2.0 * problem.potential.value(x) / problem.sigma ** 2


def ou(gamma=1.0):
    return QuadraticPotential([[float(gamma)]])


def linear2d(epsilon=1.0):
    return QuadraticPotential([[1.0, 0.25], [0.25, 1.0 / epsilon]])


_REGISTRY = {
    "ou": lambda gamma=1.0: ou(gamma),
    "linear2d": lambda epsilon=1.0: linear2d(epsilon),
    "doublewell1d": lambda: DoubleWell1D(),
    "nonstiff2d": lambda: NonStiff2D(),
    "stiff3d": lambda: Stiff3D(),
    "spring": lambda dim=10: SpringPotential(dim),
    "free": lambda dim=1: QuadraticPotential(np.zeros((int(dim), int(dim)))),
}

PROBLEM_NAMES = tuple(_REGISTRY)


def make_potential(name, **params):
    try:
        factory = _REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; known: {', '.join(_REGISTRY)}") from None
    return factory(**params)


def make_problem(name, sigma=DEFAULT_SIGMA, **params) -> BrownianDynamics:
    """Build a registered problem, e.g. ``make_problem("linear2d", epsilon=1e-4)``."""
    return BrownianDynamics(make_potential(name, **params), float(sigma), name=name)


class NoiseStream:
    """Reproducible stream of i.i.d. standard Gaussian vectors.

    The stream is keyed by ``(seed, trajectory_index)`` through a Philox
    counter-based generator, so each trajectory can be regenerated on any
    worker independently of scheduling.
    """

    def __init__(self, seed: int, trajectory_index: int, dim: int):
        self.seed = int(seed)
        self.trajectory_index = int(trajectory_index)
        self.dim = int(dim)
        ss = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.trajectory_index,))
        self._gen = np.random.Generator(np.random.Philox(ss))
        self.consumed = 0

    def next(self):
        self.consumed += 1
        return self._gen.standard_normal(self.dim)

    def block(self, n):
        """The next ``n`` vectors as an ``(n, dim)`` array (same values as ``n`` calls to ``next``)."""
        self.consumed += n
        return self._gen.standard_normal((n, self.dim))


def next_noise(stream: NoiseStream):
    return stream.next()
