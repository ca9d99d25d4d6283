"""Plain Newton iteration with dense LU solves for the implicit stages."""
from __future__ import annotations

import enum
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DomainError, FactorizationError, NewtonError


class JacobianRefresh(str, enum.Enum):
    EVERY_ITERATION = "every"
    ONCE = "once"


@dataclass(frozen=True)
class NewtonConfig:
    tolerance: float = 1e-13
    max_iterations: int = 50
    jacobian_refresh: JacobianRefresh = JacobianRefresh.EVERY_ITERATION

    def __post_init__(self):
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        object.__setattr__(self, "jacobian_refresh", JacobianRefresh(self.jacobian_refresh))


class LuFactors:
    """Row-pivoted LU factorization of a small dense matrix.

    ``offset_norm`` is the max-norm of ``M - I``, used to scale the Newton
    stopping test.
    """

    def __init__(self, matrix):
        M = np.atleast_2d(np.asarray(matrix, dtype=float))
        if not np.all(np.isfinite(M)):
            raise FactorizationError("non-finite matrix entries")
        with warnings.catch_warnings():
            # zero pivots are reported as FactorizationError below
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(M, check_finite=False)
        if np.any(np.diag(lu) == 0.0):
            raise FactorizationError("singular matrix: zero pivot")
        self._lu = (lu, piv)
        self.shape = M.shape
        self.offset_norm = _offset_norm(M)

    def solve(self, rhs):
        return scipy.linalg.lu_solve(self._lu, np.asarray(rhs, dtype=float), check_finite=False)


def _offset_norm(M):
    D = M - np.eye(M.shape[0])
    return float(np.max(np.sum(np.abs(D), axis=1)))


def lu_factor(matrix) -> LuFactors:
    return LuFactors(matrix)


def lu_solve(factors: LuFactors, rhs):
    """``J^{-1} rhs`` from precomputed factors (the inverse is never formed)."""
    return factors.solve(rhs)


@dataclass
class NewtonResult:
    x: np.ndarray
    iterations: int
    residual_norm: float
    factorizations: int
    lu: LuFactors | None
    tolerance: float = 0.0


def newton_iterate(residual, jacobian, guess, config: NewtonConfig | None = None,
                   lu: LuFactors | None = None) -> NewtonResult:
    """Solve ``residual(y) = 0`` by Newton's method from ``guess``.

    ``jacobian(y)`` must return the matrix ``I + K(y)`` of the stage
    equation. Convergence is declared when

        max|residual(y)| <= tolerance * max(1, |K(y)|_inf |y|_inf),

    which is the plain absolute test unless the stage is stiff enough for
    roundoff in ``K(y) y`` to exceed the tolerance. With
    ``JacobianRefresh.ONCE`` the matrix is factorized a single time (or
    ``lu`` is reused) and the iteration is a chord method.
    """
    config = config or NewtonConfig()
    once = config.jacobian_refresh is JacobianRefresh.ONCE
    y = np.array(guess, dtype=float)
    factorizations = 0
    it = 0
    M = None
    knorm = lu.offset_norm if lu is not None else 0.0
    while True:
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                r = residual(y)
        except DomainError:
            r = np.array([np.inf])
        rnorm = float(np.max(np.abs(r)))
        if not np.isfinite(rnorm):
            raise NewtonError(f"Newton diverged after {it} iterations", np.inf, it,
                              factorizations)
        if lu is None or not once:
            M = np.atleast_2d(jacobian(y))
            knorm = _offset_norm(M)
        tol = config.tolerance * max(1.0, knorm * float(np.max(np.abs(y))))
        if rnorm <= tol:
            return NewtonResult(y, it, rnorm, factorizations, lu, tol)
        if it >= config.max_iterations:
            raise NewtonError(
                f"Newton failed after {it} iterations (residual {rnorm:.3e})",
                residual_norm=rnorm, iterations=it, factorizations=factorizations)
        if lu is None or not once:
            factorizations += 1
            try:
                lu = LuFactors(M)
            except FactorizationError as exc:
                exc.residual_norm, exc.iterations = rnorm, it
                exc.factorizations = factorizations
                raise
        y = y - lu.solve(r)
        it += 1


def solve_fixed_point(residual, jacobian, guess, config: NewtonConfig | None = None):
    """Return ``y`` with the residual below the (scaled) Newton tolerance."""
    return newton_iterate(residual, jacobian, guess, config).x
