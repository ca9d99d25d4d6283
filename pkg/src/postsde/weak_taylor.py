"""Weak Taylor expansion of one step, checked against Gauss-Hermite quadrature.

``U(x, h) = E phi(X_1 | X_0 = x)`` is computed deterministically by
quadrature over the step noise, and compared with the expansion
``phi + h L phi + h^2 A_1 phi + O(h^3)``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .model import BrownianDynamics, drift
from .newton import NewtonConfig
from .observables import Observable
from .schemes import SchemeSpec, initial_state, step_theta_modified

DEFAULT_NODES = 30
H_LIST = tuple(2.0 ** -k for k in range(6, 13))


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray  # (n, d)
    weights: np.ndarray  # (n,)


def gauss_hermite_rule(dim: int, q: int = DEFAULT_NODES) -> QuadratureRule:
    """Tensor Gauss-Hermite rule for the standard normal in ``dim`` dimensions."""
    z, w = np.polynomial.hermite_e.hermegauss(q)
    w = w / math.sqrt(2 * math.pi)
    nodes = np.array(list(itertools.product(z, repeat=dim)))
    weights = np.prod(np.array(list(itertools.product(w, repeat=dim))), axis=1)
    return QuadratureRule(nodes, weights)


def one_step_expectation(problem: BrownianDynamics, spec: SchemeSpec, h, x, phi: Observable,
                         rule: QuadratureRule | None = None, newton: NewtonConfig | None = None):
    """``U(x, h)`` for the kernel of ``spec`` (postprocessor ignored)."""
    rule = rule or gauss_hermite_rule(problem.dim)
    kernel = spec.kernel()
    state = initial_state(np.atleast_1d(np.asarray(x, dtype=float)))
    vals = np.empty(len(rule.weights))
    for k, xi in enumerate(rule.nodes):
        out = step_theta_modified(problem, kernel, h, state, xi, newton, compute_post=False)
        vals[k] = phi.value(out.next.x)
    return float(np.dot(rule.weights, vals))


def _f_derivatives(problem, x):
    pot = problem.potential
    return drift(problem, x), -pot.hessian(x), -pot.third(x)


def apply_generator(problem: BrownianDynamics, phi: Observable, x) -> float:
    """``L phi = f . grad phi + (sigma^2 / 2) Laplacian phi``."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    f = drift(problem, x)
    return float(f @ phi.gradient(x) + 0.5 * problem.sigma ** 2 * np.trace(phi.hessian(x)))


def apply_A1(problem: BrownianDynamics, spec: SchemeSpec, phi: Observable, x) -> float:
    """h^2 coefficient of the one-step weak expansion of the (modified) theta kernel.

    With ``a = 0`` this is the standard theta-method operator; the shifted
    kernel replaces the coefficients theta of the last two terms by
    ``(1-theta) a^2 + theta (a+1)^2`` and ``a + theta``.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    theta, a, s2 = spec.theta, spec.a, problem.sigma ** 2
    f, fp, fpp = _f_derivatives(problem, x)
    d1, d2, d3, d4 = (phi.derivative(x, k) for k in (1, 2, 3, 4))
    lap_f = np.einsum("kii->k", fpp)  # sum_i f''(e_i, e_i)
    k1 = (1 - theta) * a * a + theta * (a + 1) ** 2
    k2 = a + theta
    out = 0.5 * f @ d2 @ f
    out += 0.5 * s2 * np.einsum("iik,k->", d3, f)
    out += s2 * s2 / 8 * np.einsum("iijj->", d4)
    out += theta * d1 @ (fp @ f)
    out += k1 * 0.5 * s2 * d1 @ lap_f
    out += k2 * s2 * np.sum(d2 * fp)  # sum_i phi''(f' e_i, e_i)
    return float(out)


def apply_L2_half(problem: BrownianDynamics, phi: Observable, x) -> float:
    """``(1/2) L^2 phi`` for additive noise (exact h^2 term of the true flow)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    s2 = problem.sigma ** 2
    f, fp, fpp = _f_derivatives(problem, x)
    d1, d2, d3, d4 = (phi.derivative(x, k) for k in (1, 2, 3, 4))
    # L(L phi) with L phi = f.d1 + s2/2 tr d2
    grad_Lphi = fp.T @ d1 + d2 @ f + 0.5 * s2 * np.einsum("iik->k", d3)
    # Hessian of L phi, traced
    lap_fd1 = np.einsum("kii,k->", fpp, d1) + 2 * np.sum(fp * d2) + np.einsum("kii,k->", d3, f)
    lap_Lphi = lap_fd1 + 0.5 * s2 * np.einsum("iijj->", d4)
    return 0.5 * float(f @ grad_Lphi + 0.5 * s2 * lap_Lphi)


@dataclass
class TaylorDefects:
    h: np.ndarray
    order1: np.ndarray  # |U - phi - h L phi|
    order2: np.ndarray  # |U - phi - h L phi - h^2 A1 phi|
    floor: float = 0.0  # roundoff level of U

    def slopes(self):
        return (fit_slope(self.h, self.order1, self.floor),
                fit_slope(self.h, self.order2, self.floor))


def aggregate_slopes(defects: list[TaylorDefects]):
    """Slopes of the mean defect over several points ``x`` sharing one h grid."""
    h = defects[0].h
    floor = max(d.floor for d in defects)
    e1 = np.mean([d.order1 for d in defects], axis=0)
    e2 = np.mean([d.order2 for d in defects], axis=0)
    return fit_slope(h, e1, floor), fit_slope(h, e2, floor)


def taylor_defects(problem, spec, phi, x, h_list=H_LIST, rule=None, second=None) -> TaylorDefects:
    """Defects of the first- and second-order expansions at ``x`` over ``h_list``.

    ``second(problem, spec, phi, x)`` gives the h^2 coefficient, ``apply_A1`` by default.
    """
    rule = rule or gauss_hermite_rule(problem.dim)
    second = second or apply_A1
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p0 = float(phi.value(x))
    L = apply_generator(problem, phi, x)
    A1 = second(problem, spec, phi, x)
    h = np.asarray(h_list, dtype=float)
    U = np.array([one_step_expectation(problem, spec, hh, x, phi, rule) for hh in h])
    e1 = np.abs(U - p0 - h * L)
    e2 = np.abs(U - p0 - h * L - h * h * A1)
    floor = 1e-14 * max(1.0, float(np.max(np.abs(U))))
    return TaylorDefects(h, e1, e2, floor)


def fit_slope(h, err, floor=0.0):
    """Least-squares slope of log(err) against log(h) over points above ``floor``.

    Returns ``inf`` when every point is at or below the floor (the expansion is
    exact up to roundoff) and ``nan`` when only one point is above it.
    """
    h, err = np.asarray(h, dtype=float), np.asarray(err, dtype=float)
    ok = err > floor
    if not ok.any():
        return float("inf")
    if ok.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(h[ok]), np.log(err[ok]), 1)[0])


# ---------------------------------------------------------------- integration by parts

@dataclass(frozen=True)
class IbpResiduals:
    lhs: tuple
    rhs: tuple

    @property
    def residuals(self):
        return tuple(abs(u - v) for u, v in zip(self.lhs, self.rhs))


def check_ibp_identities(problem: BrownianDynamics, phi: Observable, rule=None) -> IbpResiduals:
    """Both sides of the four Gibbs-average identities used to reduce ``<A_1 phi>``.

    ``rule`` is ``(points, normalized weights)`` for the Gibbs law; built by
    tensor quadrature when omitted.
    """
    if rule is None:
        from .reference import gibbs_rule
        rule = gibbs_rule(problem)
    X, W = rule
    s2 = problem.sigma ** 2
    pot = problem.potential
    f = drift(problem, X)
    fp = -pot.hessian(X)
    fpp = -pot.third(X)
    d1, d2, d3, d4 = (phi.derivative(X, k) for k in (1, 2, 3, 4))
    div_f = np.einsum("nii->n", fp)
    fpf = np.einsum("nij,nj->ni", fp, f)
    f2 = np.sum(f * f, axis=1)
    lap_f = np.einsum("nkii->nk", fpp)
    dot = lambda u, v: np.sum(u * v, axis=1)

    lhs = (
        np.einsum("ni,nij,nj->n", f, d2, f),
        s2 * np.einsum("nkii,nk->n", d3, f),
        s2 * np.einsum("niijj->n", d4),
        s2 * np.sum(d2 * fp, axis=(1, 2)),
    )
    rhs = (
        -dot(d1, fpf + div_f[:, None] * f + (2 / s2) * f2[:, None] * f),
        dot(d1, s2 * lap_f + 4 * fpf + 2 * div_f[:, None] * f + (4 / s2) * f2[:, None] * f),
        -2 * np.einsum("nkii,nk->n", d3, f),
        -dot(d1, s2 * lap_f + 2 * fpf),
    )
    return IbpResiduals(tuple(float(W @ u) for u in lhs), tuple(float(W @ v) for v in rhs))
