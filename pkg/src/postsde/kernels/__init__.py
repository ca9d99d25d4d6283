"""Trajectory kernels: compiled ``_core`` when importable, pure Python otherwise.

``advance_problem`` dispatches a block of steps to the compiled kernel for
built-in potentials and to the pure loop for any other potential.
"""
from __future__ import annotations

import numpy as np

from ..newton import JacobianRefresh
from ..schemes import POST_CODES
from . import _pure

try:
    from . import _core
except ImportError:  # pragma: no cover - depends on the build
    _core = None

COMPILED_AVAILABLE = _core is not None
_backend = "compiled" if COMPILED_AVAILABLE else "pure"

STATUS_OK = _pure.STATUS_OK
STATUS_EXPLODED = _pure.STATUS_EXPLODED
STATUS_NEWTON = _pure.STATUS_NEWTON
STATUS_SINGULAR = _pure.STATUS_SINGULAR


def backend() -> str:
    return _backend


def use_backend(name: str) -> str:
    """Select ``"compiled"`` or ``"pure"``; returns the previous backend."""
    global _backend
    if name not in ("compiled", "pure"):
        raise ValueError(name)
    if name == "compiled" and not COMPILED_AVAILABLE:
        raise RuntimeError("compiled kernel not built; reinstall with Cython available")
    old, _backend = _backend, name
    return old


def get_advance(name=None):
    name = name or _backend
    return _core.advance if name == "compiled" else _pure.advance


def advance_problem(problem, spec, h, x, prev_xi, has_prev, noise, processed, newton,
                    threshold, compute_post=True):
    """Advance ``noise.shape[0]`` steps in place; returns
    ``(steps, status, has_prev, newton_iterations, factorizations, residual)``."""
    ks = problem.potential.kernel_spec()
    if ks is None or _backend == "pure":
        if ks is None:
            return _pure.run_steps(problem, spec, h, x, prev_xi, has_prev, noise, processed,
                                   newton, threshold, compute_post)
    model, params = ks
    fn = get_advance()
    return fn(int(model), np.ascontiguousarray(params, dtype=float), int(problem.dim),
              float(spec.theta), float(spec.a), float(spec.b), float(spec.c),
              POST_CODES[spec.post_kind], int(bool(compute_post)), float(h), float(problem.sigma),
              x, prev_xi, int(has_prev), noise, processed,
              float(newton.tolerance), int(newton.max_iterations),
              int(newton.jacobian_refresh is JacobianRefresh.ONCE), float(threshold))
