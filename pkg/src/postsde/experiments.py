"""Desk-scale analogues of the convergence figures.

Each figure is a list of panels; a panel fixes a problem, an observable and a
set of schemes and runs ``convergence_study`` for each scheme on a shared
step-size grid chosen before any run.
"""
from __future__ import annotations

from dataclasses import dataclass

from .ergodic import RunConfig, convergence_study, ensemble_average, time_average
from .model import DEFAULT_SIGMA, make_problem
from .observables import make_observable
from .reference import ReferenceCache, ReferenceValue, reference_value
from .schemes import preset

# 0.05 * 2^(k/2), k = 0..6
DEFAULT_H = tuple(0.05 * 2.0 ** (k / 2) for k in range(7))

FIG1_SCHEMES = ("implicit_euler", "theta_half", "theta1_plain", "theta1_stab", "theta1_det")
NONLINEAR_SCHEMES = ("implicit_euler", "theta1_stab", "theta1_det")


@dataclass(frozen=True)
class Panel:
    name: str
    problem: str
    params: tuple  # ((key, value), ...)
    observable: str
    schemes: tuple

    def make_problem(self, sigma=DEFAULT_SIGMA):
        return make_problem(self.problem, sigma=sigma, **dict(self.params))


def figure_panels(figure: str, epsilon: float | None = None) -> list[Panel]:
    if figure == "fig1":
        eps = 1.0 if epsilon is None else float(epsilon)
        return [Panel(f"linear2d_eps{eps:g}", "linear2d", (("epsilon", eps),), "second_moment", FIG1_SCHEMES)]
    if figure == "fig2":
        return [Panel("nonstiff2d", "nonstiff2d", (), "pb2", NONLINEAR_SCHEMES),
                Panel("stiff3d", "stiff3d", (), "pb2", NONLINEAR_SCHEMES)]
    if figure == "fig3":
        return [Panel("spring10", "spring", (("dim", 10),), "radial_sq", NONLINEAR_SCHEMES)]
    if figure == "fig4":
        return [Panel("doublewell1d", "doublewell1d", (), "x1sq", NONLINEAR_SCHEMES)]
    raise KeyError(f"unknown figure {figure!r}; known: fig1, fig2, fig3, fig4")


FIGURES = ("fig1", "fig2", "fig3", "fig4")


def cached_reference(problem, phi, cache: ReferenceCache | None = None, key_name=None) -> ReferenceValue:
    if cache is None:
        return reference_value(problem, phi)
    key = ReferenceCache.key(key_name or problem.name, problem.sigma, phi.name)
    ref = cache.get(key)
    if ref is None:
        ref = reference_value(problem, phi)
        cache.put(key, ref)
    return ref


def run_panel(panel: Panel, cfg: RunConfig, h_list=DEFAULT_H, sigma=DEFAULT_SIGMA, cache=None,
              estimator="time") -> tuple[ReferenceValue, dict]:
    """Reference value and ``{scheme: ConvergenceReport}`` for one panel."""
    problem = panel.make_problem(sigma)
    phi = make_observable(panel.observable, problem.dim)
    ref = cached_reference(problem, phi, cache, key_name=panel.name)
    est = time_average if estimator == "time" else ensemble_average
    reports = {}
    for name in panel.schemes:
        reports[name] = convergence_study(problem, preset(name), cfg, phi, h_list, ref.value, est)
    return ref, reports


def default_run_config(T=1e4, M=10, seed=1, workers=None) -> RunConfig:
    return RunConfig(h=DEFAULT_H[0], T=T, M=M, base_seed=seed, workers=workers)


def run_figure(figure: str, cfg: RunConfig | None = None, epsilon=None, h_list=DEFAULT_H, cache=None):
    cfg = cfg or default_run_config()
    return {p.name: run_panel(p, cfg, h_list, cache=cache) for p in figure_panels(figure, epsilon)}

