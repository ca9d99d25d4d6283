"""Pure-Python trajectory kernel; same contract as the compiled ``_core.advance``."""
from __future__ import annotations

import numpy as np

from ..errors import DomainError, StepFailure
from ..model import (KERNEL_DOUBLEWELL, KERNEL_NONSTIFF2D, KERNEL_QUADRATIC, KERNEL_SPRING,
                     KERNEL_STIFF3D, BrownianDynamics, DoubleWell1D, NonStiff2D,
                     QuadraticPotential, SpringPotential, Stiff3D)
from ..newton import JacobianRefresh, NewtonConfig
from ..schemes import POST_CODES, ChainState, SchemeSpec, step_theta_modified

STATUS_OK = 0
STATUS_EXPLODED = 1
STATUS_NEWTON = 2
STATUS_SINGULAR = 3

_POST_BY_CODE = {v: k for k, v in POST_CODES.items()}


def potential_from_kernel_spec(model, params, dim):
    params = np.asarray(params, dtype=float)
    if model == KERNEL_QUADRATIC:
        return QuadraticPotential(params.reshape(dim, dim))
    if model == KERNEL_DOUBLEWELL:
        return DoubleWell1D()
    if model == KERNEL_NONSTIFF2D:
        return NonStiff2D()
    if model == KERNEL_STIFF3D:
        return Stiff3D(params[0], params[1])
    if model == KERNEL_SPRING:
        return SpringPotential(dim, params[0])
    raise ValueError(f"unknown kernel model id {model}")


def run_steps(problem, spec, h, x, prev_xi, has_prev, noise, processed, newton, threshold,
              compute_post=True):
    """Generic stepping loop for any :class:`BrownianDynamics` problem.

    ``x`` and ``prev_xi`` are updated in place; returns the same tuple as
    ``advance``.
    """
    state = ChainState(np.array(x, dtype=float), np.array(prev_xi, dtype=float) if has_prev else None, 0)
    iters = facts = 0
    status = STATUS_OK
    steps = 0
    rnorm = 0.0
    for n in range(noise.shape[0]):
        try:
            out = step_theta_modified(problem, spec, h, state, noise[n], newton, compute_post)
        except StepFailure as exc:
            status = STATUS_SINGULAR if "singular" in str(exc) else STATUS_NEWTON
            iters += exc.iterations
            facts += exc.factorizations
            rnorm = exc.residual_norm
            break
        except DomainError:
            status = STATUS_EXPLODED
            break
        iters += out.newton_iterations
        facts += out.factorizations
        if compute_post:
            processed[n] = out.processed
        state = out.next
        steps += 1
        m = np.max(np.abs(state.x))
        if not np.isfinite(m) or m > threshold:
            status = STATUS_EXPLODED
            break
    x[:] = state.x
    if state.prev_xi is not None:
        prev_xi[:] = state.prev_xi
        has_prev = 1
    return steps, status, has_prev, iters, facts, rnorm


def advance(model, params, dim, theta, a, b, c, post_kind, compute_post, h, sigma,
            x, prev_xi, has_prev, noise, processed, tol, max_iter, refresh_once, threshold):
    problem = BrownianDynamics(potential_from_kernel_spec(model, params, dim), sigma)
    spec = SchemeSpec(theta, a, b, c, _POST_BY_CODE[post_kind])
    newton = NewtonConfig(tol, max_iter,
                          JacobianRefresh.ONCE if refresh_once else JacobianRefresh.EVERY_ITERATION)
    return run_steps(problem, spec, h, x, prev_xi, has_prev, noise, processed, newton,
                     threshold, bool(compute_post))
