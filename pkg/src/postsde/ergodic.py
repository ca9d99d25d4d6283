"""Ergodic averages of postprocessed chains.

Two estimators of ``int phi dmu``:

* ``time_average``: M long trajectories, each averaging ``phi(Xbar_n)`` over
  its steps after a burn-in;
* ``ensemble_average``: M trajectories run to ``T``, postprocessed once at
  the end.

Trajectory ``i`` always draws its noise from ``NoiseStream(base_seed, i)`` and
results are reduced in trajectory order, so the output does not depend on the
number of worker threads.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ConfigError, EstimationError, StepFailure
from .model import BrownianDynamics, NoiseStream
from .newton import NewtonConfig
from .observables import Observable
from .schemes import ChainState, SchemeSpec, postprocess

BLOCK = 4096
THREADS_ENV = "POSTSDE_THREADS"


def default_workers() -> int:
    env = os.environ.get(THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


@dataclass(frozen=True)
class RunConfig:
    h: float
    T: float
    M: int = 10
    burn_in: float = 0.1
    explosion_threshold: float = 1e6
    base_seed: int = 0
    x0: tuple | None = None
    workers: int | None = None
    newton: NewtonConfig = field(default_factory=NewtonConfig)

    def __post_init__(self):
        if not self.h > 0 or not self.T > 0:
            raise ConfigError("h and T must be positive")
        if self.M < 1:
            raise ConfigError("M must be at least 1")
        if not 0.0 <= self.burn_in < 1.0:
            raise ConfigError("burn_in must lie in [0, 1)")
        if self.steps < 1:
            raise ConfigError("T/h must give at least one step")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))

    @property
    def burn_in_steps(self) -> int:
        return int(math.floor(self.burn_in * self.steps))

    def with_h(self, h) -> "RunConfig":
        from dataclasses import replace
        return replace(self, h=float(h))


def default_x0(problem: BrownianDynamics):
    """Starting points of the experiments: -3 per axis for the linear 2D problem, ``x_i = i`` otherwise."""
    d = problem.dim
    if problem.name == "linear2d":
        return np.full(d, -3.0)
    if problem.name in ("ou", "free"):
        return np.zeros(d)
    if problem.name == "spring":
        x = np.zeros(d)
        x[0] = 1.0
        return x
    return np.arange(1.0, d + 1.0)


@dataclass
class EstimatorResult:
    estimate: float
    per_trajectory: np.ndarray  # nan marks a rejected trajectory
    spread: float
    rejected: int
    newton_failures: int = 0
    newton_iterations: int = 0

    @property
    def accepted(self) -> int:
        return int(np.sum(np.isfinite(self.per_trajectory)))


@dataclass
class _Trajectory:
    value: float
    status: int
    iterations: int


def _start(problem, cfg):
    x0 = default_x0(problem) if cfg.x0 is None else np.asarray(cfg.x0, dtype=float)
    if x0.shape != (problem.dim,):
        raise ConfigError(f"x0 must have {problem.dim} components")
    return np.array(x0, dtype=float)


def _run_time_average(problem, spec, cfg, phi, i) -> _Trajectory:
    d = problem.dim
    stream = NoiseStream(cfg.base_seed, i, d)
    x = _start(problem, cfg)
    prev = np.zeros(d)
    has_prev = 0
    total = cfg.steps + 1  # samples Xbar_0 .. Xbar_N
    n0 = cfg.burn_in_steps
    acc = 0.0
    done = 0
    iters = 0
    processed = np.empty((min(BLOCK, total), d))
    while done < total:
        nb = min(BLOCK, total - done)
        noise = stream.block(nb)
        out = processed[:nb]
        steps, status, has_prev, it, _, _ = kernels.advance_problem(
            problem, spec, cfg.h, x, prev, has_prev, noise, out, cfg.newton,
            cfg.explosion_threshold, True)
        iters += it
        if status != kernels.STATUS_OK:
            return _Trajectory(math.nan, status, iters)
        lo = max(0, n0 - done)
        if lo < nb:
            vals = phi.value(out[lo:nb])
            if not np.all(np.isfinite(vals)):
                return _Trajectory(math.nan, kernels.STATUS_EXPLODED, iters)
            acc += float(np.sum(vals))
        done += nb
    return _Trajectory(acc / (total - n0), kernels.STATUS_OK, iters)


def _run_ensemble(problem, spec, cfg, phi, i) -> _Trajectory:
    d = problem.dim
    stream = NoiseStream(cfg.base_seed, i, d)
    x = _start(problem, cfg)
    prev = np.zeros(d)
    has_prev = 0
    done = 0
    iters = 0
    dummy = np.empty((1, d))
    while done < cfg.steps:
        nb = min(BLOCK, cfg.steps - done)
        noise = stream.block(nb)
        steps, status, has_prev, it, _, _ = kernels.advance_problem(
            problem, spec, cfg.h, x, prev, has_prev, noise, dummy, cfg.newton,
            cfg.explosion_threshold, False)
        iters += it
        if status != kernels.STATUS_OK:
            return _Trajectory(math.nan, status, iters)
        done += nb
    state = ChainState(x, prev.copy() if has_prev else None, cfg.steps)
    try:
        xbar = postprocess(problem, spec, cfg.h, state, stream.next(), cfg.newton)
    except StepFailure:
        return _Trajectory(math.nan, kernels.STATUS_NEWTON, iters)
    val = float(phi.value(xbar))
    if not math.isfinite(val):
        return _Trajectory(math.nan, kernels.STATUS_EXPLODED, iters)
    return _Trajectory(val, kernels.STATUS_OK, iters)


def _collect(runner, problem, spec, cfg, phi) -> EstimatorResult:
    if phi.dim != problem.dim:
        raise ConfigError("observable and problem dimensions differ")
    workers = cfg.workers or default_workers()
    task = lambda i: runner(problem, spec, cfg, phi, i)
    if workers == 1 or cfg.M == 1:
        trajs = [task(i) for i in range(cfg.M)]
    else:
        with ThreadPoolExecutor(max_workers=min(workers, cfg.M)) as pool:
            trajs = list(pool.map(task, range(cfg.M)))
    values = np.array([t.value for t in trajs])
    ok = np.isfinite(values)
    rejected = int(np.sum(~ok))
    newton_failures = sum(t.status in (kernels.STATUS_NEWTON, kernels.STATUS_SINGULAR) for t in trajs)
    iterations = sum(t.iterations for t in trajs)
    if not ok.any():
        raise EstimationError(f"all {cfg.M} trajectories rejected "
                              f"({newton_failures} Newton failures, {rejected - newton_failures} explosions)")
    good = values[ok]
    spread = float(np.std(good, ddof=1)) if good.size > 1 else 0.0
    return EstimatorResult(float(np.mean(good)), values, spread, rejected, newton_failures, iterations)


def time_average(problem: BrownianDynamics, spec: SchemeSpec, cfg: RunConfig, phi: Observable) -> EstimatorResult:
    """Average of ``phi(Xbar_n)`` over ``n = n0..N`` per trajectory, then over trajectories."""
    return _collect(_run_time_average, problem, spec, cfg, phi)


def ensemble_average(problem: BrownianDynamics, spec: SchemeSpec, cfg: RunConfig, phi: Observable) -> EstimatorResult:
    """Average of ``phi(Xbar_N)`` over independent trajectories (postprocessed at the end only)."""
    return _collect(_run_ensemble, problem, spec, cfg, phi)


# ---------------------------------------------------------------- convergence

@dataclass
class ConvergenceRow:
    h: float
    estimate: float
    reference: float
    abs_error: float
    spread: float
    rejected: int
    newton_failures: int

    @property
    def above_floor(self) -> bool:
        return math.isfinite(self.abs_error) and self.abs_error > 2 * self.spread


@dataclass
class ConvergenceReport:
    label: str
    rows: list
    slope: float

    @property
    def usable(self):
        return [r for r in self.rows if r.above_floor]


def fit_loglog_slope(rows) -> float:
    """Least-squares slope of log error vs log h over rows above the Monte-Carlo floor."""
    use = [r for r in rows if r.above_floor and r.abs_error > 0]
    if len(use) < 2:
        return math.nan
    h = np.log([r.h for r in use])
    e = np.log([r.abs_error for r in use])
    return float(np.polyfit(h, e, 1)[0])


def convergence_study(problem: BrownianDynamics, spec: SchemeSpec, cfg_template: RunConfig, phi: Observable,
                      h_list, reference: float, estimator=time_average) -> ConvergenceReport:
    rows = []
    for h in h_list:
        cfg = cfg_template.with_h(h)
        try:
            res = estimator(problem, spec, cfg, phi)
        except EstimationError:
            rows.append(ConvergenceRow(float(h), math.nan, reference, math.nan, math.nan, cfg.M, cfg.M))
            continue
        rows.append(ConvergenceRow(float(h), res.estimate, reference, abs(res.estimate - reference),
                                   res.spread, res.rejected, res.newton_failures))
    return ConvergenceReport(spec.label, rows, fit_loglog_slope(rows))
