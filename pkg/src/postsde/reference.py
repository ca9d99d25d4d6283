"""Reference values of Gibbs averages ``int phi rho`` with ``rho ~ exp(-2V/sigma^2)``.

Three routes: Gaussian moments for quadratic potentials, tensor quadrature
for d <= 3 on a box adapted to the potential, and a 1D radial integral for
spherically symmetric problems. Every value comes with an error estimate
taken from the difference between two successive refinements.
"""
from __future__ import annotations

import enum
import itertools
import math
import os
from dataclasses import dataclass

import numpy as np
import scipy.optimize

from .errors import DomainError, QuadratureError
from .model import BrownianDynamics, QuadraticPotential, SpringPotential
from .observables import Observable, RadialObservable

REL_TOL = 1e-8
TAIL_LOG = 60.0  # box faces must lie where log-density is this far below its maximum


class Method(str, enum.Enum):
    GAUSSIAN = "GaussianClosedForm"
    TENSOR = "TensorQuadrature"
    RADIAL = "RadialQuadrature"


@dataclass(frozen=True)
class ReferenceValue:
    value: float
    method: Method
    estimated_error: float


# ---------------------------------------------------------------- Gaussian case

def gaussian_covariance(A, sigma):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if not np.allclose(A, A.T):
        raise DomainError("matrix must be symmetric")
    try:
        np.linalg.cholesky(A)
    except np.linalg.LinAlgError:
        raise DomainError("matrix must be positive definite") from None
    return 0.5 * sigma ** 2 * np.linalg.inv(A)


def gaussian_rule(cov, q=None, degree=4):
    """Points and weights integrating polynomials of N(0, cov) up to ``degree`` exactly."""
    cov = np.atleast_2d(cov)
    d = cov.shape[0]
    q = q or (degree // 2 + 1)
    z, w = np.polynomial.hermite_e.hermegauss(q)
    w = w / math.sqrt(2 * math.pi)
    L = np.linalg.cholesky(cov)
    Z = np.array(list(itertools.product(z, repeat=d)))
    W = np.prod(np.array(list(itertools.product(w, repeat=d))), axis=1)
    return Z @ L.T, W


def gaussian_reference(A, sigma, observable: Observable) -> ReferenceValue:
    """Exact average of a polynomial observable under N(0, (sigma^2/2) A^{-1})."""
    cov = gaussian_covariance(A, sigma)
    if observable.name == "second_moment":
        return ReferenceValue(float(np.trace(cov)), Method.GAUSSIAN, 0.0)
    degree = getattr(observable, "degree", None)
    if degree is None:
        raise DomainError("closed form needs a polynomial observable")
    X, W = gaussian_rule(cov, degree=degree)
    return ReferenceValue(float(W @ observable.value(X)), Method.GAUSSIAN, 0.0)


# ---------------------------------------------------------------- tensor quadrature

def find_minimum(problem: BrownianDynamics):
    """Global minimizer among local minima reached from the potential's guesses."""
    pot = problem.potential
    best = None
    for g in pot.minimum_guesses():
        res = scipy.optimize.minimize(lambda x: float(pot.value(x)), np.asarray(g, dtype=float),
                                      jac=lambda x: pot.gradient(x), method="BFGS",
                                      options={"gtol": 1e-12})
        res = scipy.optimize.minimize(lambda x: float(pot.value(x)), res.x, jac=lambda x: pot.gradient(x),
                                      hess=lambda x: pot.hessian(x), method="trust-exact",
                                      options={"gtol": 1e-12})
        if best is None or res.fun < best.fun:
            best = res
    return best.x, float(best.fun)


@dataclass
class IntegrationBox:
    center: np.ndarray
    rotation: np.ndarray  # columns are the box axes
    lower: np.ndarray
    upper: np.ndarray

    def to_x(self, y):
        return self.center + y @ self.rotation.T


def _face_points(box, axis, side, n=41):
    d = len(box.center)
    grids = [np.linspace(box.lower[k], box.upper[k], n) for k in range(d)]
    grids[axis] = np.array([box.upper[axis] if side > 0 else box.lower[axis]])
    Y = np.array(list(itertools.product(*grids)))
    return box.to_x(Y)


def integration_box(problem: BrownianDynamics, width=8.0, tail_log=TAIL_LOG, max_growth=60) -> IntegrationBox:
    """Box in the Hessian eigenbasis at the minimizer, grown until the faces carry negligible mass.

    Starts at ``width`` standard deviations of the local Gaussian approximation
    per axis (capped for nearly flat minima), then pushes each face out by 25% while the log-density anywhere on
    it is within ``tail_log`` of the maximum. The growth step covers secondary
    wells that the local Gaussian does not see.
    """
    pot, s2 = problem.potential, problem.sigma ** 2
    xmin, vmin = find_minimum(problem)
    lam, Q = np.linalg.eigh(np.atleast_2d(pot.hessian(xmin)))
    lam = np.maximum(lam, 1e-300)
    # flat (e.g. quartic) minima give no usable curvature; cap and let the growth step decide
    half = np.minimum(width * np.sqrt(0.5 * s2 / lam), width * max(1.0, float(np.max(np.abs(xmin)))))
    box = IntegrationBox(xmin, Q, -half.copy(), half.copy())
    for axis, side in itertools.product(range(len(xmin)), (-1, 1)):
        for _ in range(max_growth):
            X = _face_points(box, axis, side)
            with np.errstate(over="ignore", invalid="ignore"):
                logd = -2.0 * (pot.value(X) - vmin) / s2
            if np.nanmax(logd) < -tail_log:
                break
            if side > 0:
                box.upper[axis] += 0.25 * (box.upper[axis] - box.lower[axis])
            else:
                box.lower[axis] -= 0.25 * (box.upper[axis] - box.lower[axis])
        else:
            raise QuadratureError("integration box did not close; density tails too heavy")
    return box


def _composite_legendre(lo, hi, panels, order):
    z, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(lo, hi, panels + 1)
    mid, rad = 0.5 * (edges[1:] + edges[:-1]), 0.5 * (edges[1:] - edges[:-1])
    return (mid[:, None] + rad[:, None] * z).ravel(), (rad[:, None] * w).ravel()


def _tensor_integrals(problem, observable, box, vmin, panels, order, chunk=1 << 18):
    d = len(box.center)
    axes = [_composite_legendre(box.lower[k], box.upper[k], panels[k], order) for k in range(d)]
    n = [len(a[0]) for a in axes]
    total = int(np.prod(n))
    num = den = 0.0
    s2 = problem.sigma ** 2
    for start in range(0, total, chunk):
        idx = np.unravel_index(np.arange(start, min(total, start + chunk)), n)
        Y = np.stack([axes[k][0][idx[k]] for k in range(d)], axis=-1)
        W = np.prod(np.stack([axes[k][1][idx[k]] for k in range(d)], axis=-1), axis=-1)
        X = box.to_x(Y)
        with np.errstate(over="ignore", under="ignore"):
            rho = np.exp(-2.0 * (problem.potential.value(X) - vmin) / s2) * W
        den += rho.sum()
        num += rho @ observable.value(X)
    return num / den


def tensor_quadrature(problem: BrownianDynamics, observable: Observable, box: IntegrationBox | None = None,
                      panels=4, order=20, rel_tol=REL_TOL, max_panels=256) -> ReferenceValue:
    """Gibbs average by composite Gauss-Legendre on ``box``.

    Panels are doubled one axis at a time, keeping a doubling only when it
    changes the value by more than ``rel_tol``; stops after a sweep in which no
    axis needed refinement. Stiff axes thus stay coarse.
    """
    if problem.dim > 3:
        raise DomainError("tensor quadrature is limited to d <= 3")
    box = box or integration_box(problem)
    _, vmin = find_minimum(problem)
    d = problem.dim
    counts = [int(panels)] * d
    cur = _tensor_integrals(problem, observable, box, vmin, counts, order)
    while True:
        changed, err = False, 0.0
        for k in range(d):
            while True:
                if counts[k] >= max_panels:
                    raise QuadratureError(f"tensor quadrature did not converge along axis {k}")
                trial = list(counts)
                trial[k] *= 2
                new = _tensor_integrals(problem, observable, box, vmin, trial, order)
                delta = abs(new - cur)
                if delta <= rel_tol * max(abs(new), 1e-300):
                    err = max(err, delta)
                    break
                counts, cur, changed = trial, new, True
        if not changed:
            return ReferenceValue(float(cur), Method.TENSOR, float(err))


def gibbs_rule(problem: BrownianDynamics, panels=16, order=20):
    """Points and normalized Gibbs weights for computing ``<u>`` by quadrature (d <= 3)."""
    box = integration_box(problem)
    _, vmin = find_minimum(problem)
    d = problem.dim
    axes = [_composite_legendre(box.lower[k], box.upper[k], panels, order) for k in range(d)]
    Y = np.array(list(itertools.product(*[a[0] for a in axes])))
    W = np.prod(np.array(list(itertools.product(*[a[1] for a in axes]))), axis=1)
    X = box.to_x(Y)
    with np.errstate(under="ignore"):
        rho = np.exp(-2.0 * (problem.potential.value(X) - vmin) / problem.sigma ** 2) * W
    return X, rho / rho.sum()


# ---------------------------------------------------------------- radial quadrature

def radial_quadrature(g_log_weight, phi_r, dim, rmax=None, panels=8, order=20, rel_tol=REL_TOL,
                      max_panels=4096) -> ReferenceValue:
    """``int phi(r) w(r) r^{d-1} dr / int w(r) r^{d-1} dr`` with ``log w = g_log_weight(r)``."""
    if rmax is None:
        rmax = 1.0
        r0 = np.linspace(1e-6, rmax, 200)
        peak = np.max(g_log_weight(r0) + (dim - 1) * np.log(r0))
        while g_log_weight(rmax) + (dim - 1) * math.log(rmax) > peak - TAIL_LOG:
            rmax *= 1.25
            r0 = np.linspace(1e-6, rmax, 400)
            peak = max(peak, np.max(g_log_weight(r0) + (dim - 1) * np.log(r0)))

    def integrate(p):
        r, w = _composite_legendre(0.0, rmax, p, order)
        lw = g_log_weight(r) + (dim - 1) * np.log(r)
        wt = np.exp(lw - lw.max()) * w
        return float(wt @ phi_r(r) / wt.sum())

    prev = integrate(panels)
    while panels < max_panels:
        panels *= 2
        cur = integrate(panels)
        err = abs(cur - prev)
        if err <= rel_tol * max(abs(cur), 1e-300):
            return ReferenceValue(cur, Method.RADIAL, err)
        prev = cur
    raise QuadratureError("radial quadrature did not converge")


def spring_reference(problem: BrownianDynamics, phi_r) -> ReferenceValue:
    pot = problem.potential
    if not isinstance(pot, SpringPotential):
        raise DomainError("radial reference needs a spherically symmetric potential")
    s2 = problem.sigma ** 2
    return radial_quadrature(lambda r: -2.0 * pot.radial(r) / s2, phi_r, pot.dim)


# ---------------------------------------------------------------- dispatch and cache

def reference_value(problem: BrownianDynamics, observable: Observable) -> ReferenceValue:
    pot = problem.potential
    if isinstance(pot, QuadraticPotential) and np.all(np.linalg.eigvalsh(pot.matrix) > 0):
        return gaussian_reference(pot.matrix, problem.sigma, observable)
    if isinstance(pot, SpringPotential) and isinstance(observable, RadialObservable):
        return spring_reference(problem, observable.g)
    return tensor_quadrature(problem, observable)


class ReferenceCache:
    """Plain-text ``key = value error method`` file."""

    def __init__(self, path):
        self.path = path

    @staticmethod
    def key(problem_name, sigma, observable_name, level="default"):
        return f"{problem_name}|{sigma!r}|{observable_name}|{level}"

    def load(self) -> dict:
        out = {}
        if not os.path.exists(self.path):
            return out
        with open(self.path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith("#"):
                    continue
                k, v = line.split(" = ", 1)
                val, err, meth = v.split()
                out[k] = ReferenceValue(float(val), Method(meth), float(err))
        return out

    def get(self, key):
        return self.load().get(key)

    def put(self, key, ref: ReferenceValue):
        data = self.load()
        data[key] = ref
        tmp = self.path + ".tmp"
        with open(tmp, "w") as fh:
            for k in sorted(data):
                r = data[k]
                fh.write(f"{k} = {r.value!r} {r.estimated_error!r} {r.method.value}\n")
        os.replace(tmp, self.path)
