"""Test functions phi with analytic derivative tensors.

Polynomial observables carry exact derivatives of every order (as full
tensors, which is cheap for the small dimensions where derivatives are
needed). Non-polynomial observables such as ``(|x| - 1)^2`` only provide
values and are used for ergodic averages and references.
"""
from __future__ import annotations

import itertools
import math

import numpy as np


class Observable:
    dim: int
    name = "observable"

    def __call__(self, x):
        return self.value(x)

    def value(self, x):
        raise NotImplementedError

    def derivative(self, x, order: int):
        """Tensor of ``order``-th partial derivatives, shape ``x.shape + (d,) * (order - 1)``."""
        raise NotImplementedError(f"{self.name} has no derivatives")

    def gradient(self, x):
        return self.derivative(x, 1)

    def hessian(self, x):
        return self.derivative(x, 2)

    @property
    def has_derivatives(self):
        return False


class Polynomial(Observable):
    """``sum_k c_k x^{alpha_k}`` given as ``{alpha: c}``."""

    def __init__(self, terms: dict, dim: int, name: str = "polynomial"):
        self.dim = int(dim)
        self.name = name
        self.terms = {}
        for alpha, coef in terms.items():
            alpha = tuple(int(v) for v in alpha)
            if len(alpha) != self.dim or min(alpha) < 0:
                raise ValueError(f"bad exponent {alpha} for dim {dim}")
            if coef != 0:
                self.terms[alpha] = self.terms.get(alpha, 0.0) + float(coef)
        self._cache = {}

    @property
    def has_derivatives(self):
        return True

    @property
    def degree(self):
        return max((sum(a) for a in self.terms), default=0)

    def _partial(self, index):
        """Terms of ``d/dx_{index[0]} ... d/dx_{index[-1]}`` of the polynomial."""
        key = tuple(sorted(index))
        if key not in self._cache:
            terms = self.terms
            for i in key:
                new = {}
                for alpha, c in terms.items():
                    if alpha[i] == 0:
                        continue
                    beta = alpha[:i] + (alpha[i] - 1,) + alpha[i + 1:]
                    new[beta] = new.get(beta, 0.0) + c * alpha[i]
                terms = new
            self._cache[key] = terms
        return self._cache[key]

    @staticmethod
    def _eval_terms(terms, x):
        out = np.zeros(x.shape[:-1])
        for alpha, c in terms.items():
            t = np.full(x.shape[:-1], c)
            for i, p in enumerate(alpha):
                if p:
                    t = t * x[..., i] ** p
            out = out + t
        return out

    def value(self, x):
        return self._eval_terms(self.terms, np.asarray(x, dtype=float))

    def derivative(self, x, order: int):
        x = np.asarray(x, dtype=float)
        d = self.dim
        out = np.empty(x.shape[:-1] + (d,) * order)
        for index in itertools.product(range(d), repeat=order):
            out[(Ellipsis,) + index] = self._eval_terms(self._partial(index), x)
        return out

    def __add__(self, other):
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return Polynomial(terms, self.dim, f"{self.name}+{other.name}")

    def __mul__(self, other):
        if not isinstance(other, Polynomial):
            return Polynomial({a: c * float(other) for a, c in self.terms.items()}, self.dim, self.name)
        terms = {}
        for (a, c), (b, e) in itertools.product(self.terms.items(), other.terms.items()):
            k = tuple(u + v for u, v in zip(a, b))
            terms[k] = terms.get(k, 0.0) + c * e
        return Polynomial(terms, self.dim, f"({self.name})*({other.name})")

    __rmul__ = __mul__

    def __repr__(self):
        return f"Polynomial({self.terms}, dim={self.dim})"


def monomial(alpha, coef=1.0, name=None):
    alpha = tuple(alpha)
    return Polynomial({alpha: coef}, len(alpha), name or f"x^{alpha}")


def _unit(dim, i, power):
    a = [0] * dim
    a[i] = power
    return tuple(a)


class RadialObservable(Observable):
    """``g(|x|)`` for a vectorized scalar ``g`` (values only)."""

    def __init__(self, g, dim: int, name: str = "radial"):
        self.g = g
        self.dim = int(dim)
        self.name = name

    def value(self, x):
        x = np.asarray(x, dtype=float)
        return self.g(np.sqrt(np.sum(x * x, axis=-1)))


class CosGaussian(Observable):
    """``cos(k . x) exp(-|x|^2 / 2)`` in one dimension, derivatives by the Leibniz rule."""

    def __init__(self, k: float = 1.0):
        self.k = float(k)
        self.dim = 1
        self.name = f"cosgauss({k:g})"

    @property
    def has_derivatives(self):
        return True

    def _cos_der(self, x, n):
        k = self.k
        return k ** n * np.cos(k * x + n * math.pi / 2)

    @staticmethod
    def _gauss_der(x, n):
        # (-1)^n He_n(x) exp(-x^2/2)
        he = np.polynomial.hermite_e.hermeval(x, [0] * n + [1])
        return (-1) ** n * he * np.exp(-0.5 * x * x)

    def value(self, x):
        return self.derivative(x, 0)

    def derivative(self, x, order: int):
        x = np.asarray(x, dtype=float)[..., 0]
        out = sum(math.comb(order, j) * self._cos_der(x, j) * self._gauss_der(x, order - j)
                  for j in range(order + 1))
        return out.reshape(x.shape + (1,) * order) if order else out


def second_moment(dim):
    return Polynomial({_unit(dim, i, 2): 1.0 for i in range(dim)}, dim, "second_moment")


def pb2_observable(dim=2):
    """``(x_2 + x_1^2)^2``."""
    p = Polynomial({_unit(dim, 1, 1): 1.0, _unit(dim, 0, 2): 1.0}, dim)
    out = p * p
    out.name = "pb2"
    return out


_REGISTRY = {
    "const": lambda d: Polynomial({(0,) * d: 1.0}, d, "const"),
    "x": lambda d: monomial(_unit(d, 0, 1), name="x"),
    "x1sq": lambda d: monomial(_unit(d, 0, 2), name="x1sq"),
    "x4": lambda d: monomial(_unit(d, 0, 4), name="x4"),
    "second_moment": second_moment,
    "pb2": pb2_observable,
    "radial_sq": lambda d: RadialObservable(lambda r: (r - 1.0) ** 2, d, "radial_sq"),
}

OBSERVABLE_NAMES = tuple(_REGISTRY)


def make_observable(name: str, dim: int) -> Observable:
    try:
        return _REGISTRY[name](int(dim))
    except KeyError:
        raise KeyError(f"unknown observable {name!r}; known: {', '.join(_REGISTRY)}") from None
