"""One-step kernels of the (modified) stochastic theta-method and their postprocessors.

The kernel is

    X_{n+1} = X_n + h(1-theta) f(X_n + a s xi_n) + h theta f(X_{n+1} + a s xi_n) + s xi_n,

with ``s = sigma sqrt(h)``, and the postprocessed sample ``Xbar_n`` is built
from ``X_n`` and the same ``xi_n``. The kernel update never depends on the
postprocessor, so the chain ``X_n`` is identical whatever ``post_kind`` is.
"""
from __future__ import annotations

import enum
import math
import re
from dataclasses import dataclass, replace

import numpy as np

from .errors import DomainError, FactorizationError, NewtonError, StepFailure
from .model import BrownianDynamics, drift, drift_jacobian
from .newton import JacobianRefresh, LuFactors, NewtonConfig, newton_iterate


class PostKind(str, enum.Enum):
    NONE = "none"
    NOISE_SHIFT = "noise_shift"
    STOCHASTIC_STABILIZED = "stochastic_stabilized"
    STOCHASTIC_PLAIN = "stochastic_plain"
    DETERMINISTIC_IMPLICIT = "deterministic_implicit"


# Integer codes used by the trajectory kernels.
POST_CODES = {
    PostKind.NONE: 0,
    PostKind.NOISE_SHIFT: 1,
    PostKind.STOCHASTIC_STABILIZED: 2,
    PostKind.STOCHASTIC_PLAIN: 3,
    PostKind.DETERMINISTIC_IMPLICIT: 4,
}


@dataclass(frozen=True)
class SchemeSpec:
    theta: float
    a: float = 0.0
    b: float = 0.0
    c: float = 0.0
    post_kind: PostKind = PostKind.NONE
    label: str = ""

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError("theta must lie in [0, 1]")
        if self.c < 0:
            raise ValueError("c must be nonnegative")
        object.__setattr__(self, "post_kind", PostKind(self.post_kind))

    def kernel(self) -> "SchemeSpec":
        """Same kernel with the postprocessor removed."""
        return replace(self, b=0.0, c=0.0, post_kind=PostKind.NONE, label=self.label + "/kernel")

    def with_post(self, post_kind, b=None, c=None, label=None) -> "SchemeSpec":
        return replace(self, post_kind=PostKind(post_kind),
                       b=self.b if b is None else b, c=self.c if c is None else c,
                       label=self.label if label is None else label)


@dataclass
class ChainState:
    x: np.ndarray
    prev_xi: np.ndarray | None = None
    step: int = 0


@dataclass
class StepOutput:
    next: ChainState
    processed: np.ndarray
    xi_used: np.ndarray
    newton_iterations: int = 0
    factorizations: int = 0


SQRT2 = math.sqrt(2.0)
THETA1_A = -0.5 + SQRT2 / 2
THETA1_C_STOCHASTIC = math.sqrt(2 * SQRT2 - 1) / 2
THETA1_B_DETERMINISTIC = SQRT2 / 2
THETA1_C_DETERMINISTIC = math.sqrt(4 * SQRT2 - 1) / 2

_PRESETS = {
    "euler": SchemeSpec(0.0, label="euler"),
    "theta_half": SchemeSpec(0.5, label="theta_half"),
    "implicit_euler": SchemeSpec(1.0, label="implicit_euler"),
    "em_shift": SchemeSpec(0.0, a=0.5, c=0.5, post_kind=PostKind.NOISE_SHIFT, label="em_shift"),
    "em_shift_det": SchemeSpec(0.0, a=0.5, b=-0.25, c=0.0,
                               post_kind=PostKind.DETERMINISTIC_IMPLICIT, label="em_shift_det"),
    "theta1_stab": SchemeSpec(1.0, a=THETA1_A, c=THETA1_C_STOCHASTIC,
                              post_kind=PostKind.STOCHASTIC_STABILIZED, label="theta1_stab"),
    "theta1_plain": SchemeSpec(1.0, a=THETA1_A, c=THETA1_C_STOCHASTIC,
                               post_kind=PostKind.STOCHASTIC_PLAIN, label="theta1_plain"),
    "theta1_det": SchemeSpec(1.0, a=THETA1_A, b=THETA1_B_DETERMINISTIC, c=THETA1_C_DETERMINISTIC,
                             post_kind=PostKind.DETERMINISTIC_IMPLICIT, label="theta1_det"),
}

PRESET_NAMES = tuple(_PRESETS) + ("theta_std(<theta>)",)
_THETA_STD = re.compile(r"^theta_std\(\s*([0-9.eE+-]+)\s*\)$")


def preset(name: str) -> SchemeSpec:
    """Published coefficient sets by name; ``theta_std(0.75)`` gives a plain theta-method."""
    m = _THETA_STD.match(name.strip())
    if m:
        theta = float(m.group(1))
        return SchemeSpec(theta, label=f"theta_std({m.group(1)})")
    try:
        return _PRESETS[name.strip()]
    except KeyError:
        raise KeyError(f"unknown scheme {name!r}; known: {', '.join(PRESET_NAMES)}") from None


def _eye_minus(problem, scale, y):
    return np.eye(problem.dim) - scale * drift_jacobian(problem, y)


def _stage_point(problem, spec, h, state):
    """``X_n + a sigma sqrt(h) xi_{n-1}`` (just ``X_n`` before the first step)."""
    if state.prev_xi is None or spec.a == 0.0:
        return state.x
    return state.x + spec.a * (problem.sigma * math.sqrt(h)) * state.prev_xi


def _failure(what, exc, iterations=0, factorizations=0):
    return StepFailure(f"{what}: {exc}", getattr(exc, "residual_norm", float("inf")),
                       iterations + getattr(exc, "iterations", 0),
                       factorizations + getattr(exc, "factorizations", 0))


def _factor(matrix):
    try:
        return LuFactors(matrix)
    except FactorizationError as exc:
        raise StepFailure(f"singular Jacobian: {exc}", factorizations=1) from exc


def stabilization_factors(problem, spec, h, state) -> LuFactors:
    """LU factors of ``J_n = I - h f'(X_n + a sigma sqrt(h) xi_{n-1})``."""
    return _factor(_eye_minus(problem, h, _stage_point(problem, spec, h, state)))


def postprocess(problem: BrownianDynamics, spec: SchemeSpec, h, state: ChainState, xi,
                newton: NewtonConfig | None = None, lu: LuFactors | None = None):
    """Postprocessed sample ``Xbar_n = G_n(X_n)`` using the step noise ``xi_n``."""
    return _postprocess(problem, spec, h, state, xi, newton, lu)[0]


def _postprocess(problem, spec, h, state, xi, newton=None, lu=None):
    x = np.asarray(state.x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    sq = problem.sigma * math.sqrt(h)
    kind = spec.post_kind
    if kind is PostKind.NONE:
        return x.copy(), 0, 0
    if kind is PostKind.NOISE_SHIFT:
        return x + 0.5 * sq * xi, 0, 0
    if kind is PostKind.STOCHASTIC_PLAIN:
        return x + spec.c * sq * xi, 0, 0
    if kind is PostKind.STOCHASTIC_STABILIZED:
        facts = 0
        if lu is None:
            lu = stabilization_factors(problem, spec, h, state)
            facts = 1
        return x + spec.c * sq * lu.solve(xi), 0, facts
    # deterministic (possibly implicit) postprocessor
    theta, b = spec.theta, spec.b
    if b * (1.0 - theta) != 0.0:
        p = x + b * h * (1.0 - theta) * drift(problem, x) + spec.c * sq * xi
    else:
        p = x + spec.c * sq * xi
    if b * theta == 0.0:
        return p, 0, 0
    scale = b * h * theta
    try:
        res = newton_iterate(lambda z: z - scale * drift(problem, z) - p,
                             lambda z: _eye_minus(problem, scale, z),
                             x + spec.c * sq * xi, newton)
    except (NewtonError, FactorizationError, DomainError) as exc:
        raise _failure("postprocessor solve failed", exc) from exc
    return res.x, res.iterations, res.factorizations


def step_theta_modified(problem: BrownianDynamics, spec: SchemeSpec, h, state: ChainState, xi,
                        newton: NewtonConfig | None = None, compute_post=True) -> StepOutput:
    """Advance one step of the modified theta-method and postprocess ``X_n``."""
    if not h > 0:
        raise ValueError("h must be positive")
    newton = newton or NewtonConfig()
    x = np.asarray(state.x, dtype=float)
    xi = np.asarray(xi, dtype=float)
    theta, a = spec.theta, spec.a
    sq = problem.sigma * math.sqrt(h)
    noise = sq * xi
    shift = a * sq * xi
    once = newton.jacobian_refresh is JacobianRefresh.ONCE
    factorizations = 0
    iterations = 0

    stab = None
    if compute_post and spec.post_kind is PostKind.STOCHASTIC_STABILIZED:
        stab = stabilization_factors(problem, spec, h, state)
        factorizations += 1

    xs = x + shift
    fxs = drift(problem, xs)
    if theta == 0.0:
        x_new = x + h * fxs + noise
    else:
        q = xs + h * (1.0 - theta) * fxs + noise
        guess = x + h * fxs + noise + shift
        lu0 = None
        if once:
            if stab is not None and theta == 1.0:
                lu0 = stab
            else:
                try:
                    lu0 = _factor(_eye_minus(problem, h * theta, _stage_point(problem, spec, h, state)))
                except StepFailure as exc:
                    raise _failure("implicit stage failed", exc, 0, factorizations) from exc
                factorizations += 1
        scale = h * theta
        try:
            res = newton_iterate(lambda y: y - scale * drift(problem, y) - q,
                                 lambda y: _eye_minus(problem, scale, y),
                                 guess, newton, lu=lu0)
        except (NewtonError, FactorizationError, DomainError) as exc:
            raise _failure("implicit stage failed", exc, 0, factorizations) from exc
        iterations = res.iterations
        factorizations += res.factorizations
        x_new = res.x - shift

    if compute_post:
        try:
            processed, it_p, f_p = _postprocess(problem, spec, h, state, xi, newton, lu=stab)
        except StepFailure as exc:
            raise _failure("postprocessing failed", exc, iterations, factorizations) from exc
        iterations += it_p
        factorizations += f_p
    else:
        processed = x.copy()
    nxt = ChainState(x_new, xi.copy(), state.step + 1)
    return StepOutput(nxt, processed, xi, iterations, factorizations)


def step_theta_standard(problem: BrownianDynamics, spec: SchemeSpec, h, state: ChainState, xi,
                        newton: NewtonConfig | None = None, compute_post=True) -> StepOutput:
    """Standard stochastic theta-method (no shift of the drift argument)."""
    if spec.a != 0.0:
        raise ValueError("standard theta-method requires a = 0")
    return step_theta_modified(problem, spec, h, state, xi, newton, compute_post)


step = step_theta_modified


def step_nonmarkovian(problem: BrownianDynamics, h, state_bar, xi_n, xi_next):
    """``Xbar_{n+1} = Xbar_n + h f(Xbar_n) + sigma sqrt(h) (xi_n + xi_{n+1}) / 2``."""
    xb = np.asarray(state_bar, dtype=float)
    sq = problem.sigma * math.sqrt(h)
    return xb + h * drift(problem, xb) + 0.5 * sq * (np.asarray(xi_n) + np.asarray(xi_next))


def initial_state(x0) -> ChainState:
    return ChainState(np.array(x0, dtype=float), None, 0)
