"""Command-line driver.

Every subcommand accepts ``--config FILE`` (an ``[experiment]`` INI section,
see :mod:`postsde.config`); explicit flags override values from the file.
CSV output uses ``.16e`` floats so that identical inputs give byte-identical
files.
"""
from __future__ import annotations

import argparse
import io
import math
import os
import sys
from dataclasses import replace

import numpy as np

from . import config as config_mod
from .config import ExperimentConfig
from .errors import PostSDEError
from .ergodic import RunConfig, convergence_study, ensemble_average, time_average
from .experiments import DEFAULT_H, FIGURES, cached_reference, figure_panels, run_panel
from .linear_analysis import DEFAULT_ORDER, invariant_defect, method_functions, variance_amplification
from .model import PROBLEM_NAMES, make_problem
from .observables import OBSERVABLE_NAMES, make_observable
from .order_conditions import preset_residuals
from .reference import ReferenceCache
from .weak_taylor import H_LIST, aggregate_slopes, taylor_defects

CSV_HEADER_CONVERGE = ("h", "estimate", "reference", "abs_error", "spread", "rejected", "newton_failures")


def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return f"{float(v):.16e}"


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _emit(text, path):
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------- config handling

_FLAG_FIELDS = ("problem", "epsilon", "gamma", "dim", "sigma", "scheme", "theta", "a", "b", "c", "post",
                "observable", "T", "M", "seed", "burn_in", "estimator", "workers", "output")


def resolve_config(args) -> ExperimentConfig:
    cfg = config_mod.load(args.config) if getattr(args, "config", None) else ExperimentConfig()
    updates = {}
    for name in _FLAG_FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            updates[name] = v
    if getattr(args, "h", None):
        updates["h_list"] = tuple(args.h)
    cfg = replace(cfg, **updates)
    config_mod.validate(cfg)
    return cfg


def _problem(cfg: ExperimentConfig):
    return make_problem(cfg.problem, sigma=cfg.sigma, **cfg.problem_params())


def _problem_key(cfg: ExperimentConfig):
    params = cfg.problem_params()
    return cfg.problem + "".join(f",{k}={v!r}" for k, v in sorted(params.items()))


def _run_config(cfg: ExperimentConfig, h=None) -> RunConfig:
    return RunConfig(h=h or cfg.h_list[0], T=cfg.T, M=cfg.M, burn_in=cfg.burn_in,
                     explosion_threshold=cfg.explosion_threshold, base_seed=cfg.seed,
                     workers=cfg.workers, newton=cfg.newton())


def _estimator(cfg):
    return time_average if cfg.estimator == "time" else ensemble_average


# ---------------------------------------------------------------- subcommands

def cmd_analyze_linear(args):
    cfg = resolve_config(args)
    fns = method_functions(cfg.scheme_spec())
    K = args.order
    ser = fns.series(K)
    R = variance_amplification(fns).series(K)
    defect = invariant_defect(fns, K)
    rows = [(k, ser["A"][k], ser["B"][k], ser["C"][k], ser["D"][k], R[k], defect[k]) for k in range(K + 1)]
    _emit(csv_text(("k", "A", "B", "C", "D", "R", "defect"), rows), cfg.output)
    order = defect.leading_order()
    print(f"# leading defect order: {order}", file=sys.stderr)
    return 0


def cmd_check_orders(args):
    lines = [f"{'scheme':<14}{'theta':>10}{'a':>12}{'b':>12}{'c':>12}{'r1':>12}{'r2':>12}  status"]
    ok = True
    for name, theta, a, b, c, res in preset_residuals():
        good = res.certified()
        ok &= good
        lines.append(f"{name:<14}{float(theta):>10.6f}{float(a):>12.8f}{float(b):>12.8f}{float(c):>12.8f}"
                     f"{float(res.r1):>12.3e}{float(res.r2):>12.3e}  {'ok' if good else 'FAIL'}")
    _emit("\n".join(lines) + "\n", getattr(args, "output", None))
    return 0 if ok else 1


def cmd_weak_taylor(args):
    cfg = resolve_config(args)
    problem = _problem(cfg)
    phi = make_observable(cfg.observable, problem.dim)
    spec = cfg.scheme_spec()
    rng = np.random.default_rng(args.seed_x)
    xs = rng.uniform(-1.0, 1.0, size=(args.points, problem.dim))
    defects = [taylor_defects(problem, spec, phi, x, H_LIST) for x in xs]
    rows = []
    for j, h in enumerate(H_LIST):
        rows.append((h, np.mean([d.order1[j] for d in defects]), np.mean([d.order2[j] for d in defects])))
    _emit(csv_text(("h", "defect1", "defect2"), rows), cfg.output)
    s1, s2 = aggregate_slopes(defects)
    print(f"# slopes: order1={s1:.4f} order2={s2:.4f}", file=sys.stderr)
    return 0


def cmd_reference(args):
    cfg = resolve_config(args)
    problem = _problem(cfg)
    phi = make_observable(cfg.observable, problem.dim)
    cache = ReferenceCache(args.cache) if args.cache else None
    ref = cached_reference(problem, phi, cache, key_name=_problem_key(cfg))
    _emit(f"value = {ref.value!r}\nerror = {ref.estimated_error!r}\nmethod = {ref.method.value}\n", cfg.output)
    return 0


def cmd_sample(args):
    cfg = resolve_config(args)
    problem = _problem(cfg)
    phi = make_observable(cfg.observable, problem.dim)
    spec = cfg.scheme_spec()
    rows = []
    for h in cfg.h_list:
        res = _estimator(cfg)(problem, spec, _run_config(cfg, h), phi)
        for i, v in enumerate(res.per_trajectory):
            rows.append((h, i, v))
    _emit(csv_text(("h", "trajectory", "estimate"), rows), cfg.output)
    return 0


def cmd_converge(args):
    cfg = resolve_config(args)
    problem = _problem(cfg)
    phi = make_observable(cfg.observable, problem.dim)
    cache = ReferenceCache(args.cache) if args.cache else None
    ref = cached_reference(problem, phi, cache, key_name=_problem_key(cfg))
    rep = convergence_study(problem, cfg.scheme_spec(), _run_config(cfg), phi, cfg.h_list, ref.value,
                            _estimator(cfg))
    rows = [(r.h, r.estimate, r.reference, r.abs_error, r.spread, r.rejected, r.newton_failures) for r in rep.rows]
    _emit(csv_text(CSV_HEADER_CONVERGE, rows), cfg.output)
    print(f"# slope above floor: {rep.slope:.4f}", file=sys.stderr)
    failed = [r for r in rep.rows if math.isnan(r.estimate)]
    for r in failed:
        print(f"postsde converge: error: h={r.h!r}: all {r.rejected} trajectories rejected "
              f"({r.newton_failures} Newton failures)", file=sys.stderr)
    return 3 if failed else 0


def _gnuplot(figure, panel_name, files, out_name):
    lines = [
        "set terminal pngcairo size 800,600",
        f"set output '{out_name}'",
        "set logscale xy",
        "set datafile separator ','",
        "set key left top",
        "set xlabel 'h'",
        "set ylabel 'error'",
        f"set title '{figure}: {panel_name}'",
    ]
    plots = [f"'{fname}' using 1:2:3 with yerrorlines title '{label}'" for label, fname in files]
    lines.append("plot " + ", \\\n     ".join(plots))
    return "\n".join(lines) + "\n"


def cmd_figures(args):
    cfg = resolve_config(args)
    out = args.out_dir
    os.makedirs(out, exist_ok=True)
    h_list = tuple(args.h) if args.h else DEFAULT_H
    run_cfg = _run_config(cfg, h_list[0])
    cache = ReferenceCache(args.cache) if args.cache else None
    for panel in figure_panels(args.figure, args.epsilon):
        if args.schemes:
            panel = replace(panel, schemes=tuple(args.schemes))
        ref, reports = run_panel(panel, run_cfg, h_list, sigma=cfg.sigma, cache=cache, estimator=cfg.estimator)
        files = []
        for scheme, rep in reports.items():
            fname = f"{args.figure}_{panel.name}_{scheme}.csv"
            rows = [(r.h, r.abs_error, r.spread) for r in rep.rows]
            with open(os.path.join(out, fname), "w", newline="") as fh:
                fh.write(csv_text(("h", "error", "spread"), rows))
            files.append((scheme, fname))
            print(f"{panel.name} {scheme}: slope {rep.slope:.4f}", file=sys.stderr)
            for r in rep.rows:
                if r.rejected:
                    print(f"  h={r.h:.4g}: {r.rejected} rejected, {r.newton_failures} Newton failures",
                          file=sys.stderr)
        gp = _gnuplot(args.figure, panel.name, files, f"{args.figure}_{panel.name}.png")
        with open(os.path.join(out, f"{args.figure}_{panel.name}.gp"), "w") as fh:
            fh.write(gp)
    return 0


# ---------------------------------------------------------------- parser

def _add_common(p, problem=True, scheme=True, run=False):
    p.add_argument("--config", help="INI file with an [experiment] section")
    p.add_argument("-o", "--output", help="write the result here instead of stdout")
    if problem:
        p.add_argument("--problem", choices=PROBLEM_NAMES)
        p.add_argument("--epsilon", type=float)
        p.add_argument("--gamma", type=float)
        p.add_argument("--dim", type=int)
        p.add_argument("--sigma", type=float)
        p.add_argument("--observable", choices=OBSERVABLE_NAMES)
    if scheme:
        p.add_argument("--scheme")
        p.add_argument("--theta", type=float)
        p.add_argument("--a", type=float)
        p.add_argument("--b", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--post")
    if run:
        p.add_argument("--h", type=float, nargs="+", help="step sizes")
        p.add_argument("--T", type=float)
        p.add_argument("--M", type=int)
        p.add_argument("--seed", type=int)
        p.add_argument("--burn-in", dest="burn_in", type=float)
        p.add_argument("--estimator", choices=("time", "ensemble"))
        p.add_argument("--workers", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="postsde", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze-linear", help="series of A, B, C, D, R and the invariant defect")
    _add_common(p, problem=False)
    p.add_argument("--order", type=int, default=DEFAULT_ORDER)
    p.set_defaults(func=cmd_analyze_linear)

    p = sub.add_parser("check-orders", help="order-condition residuals of the presets")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_check_orders)

    p = sub.add_parser("weak-taylor", help="one-step weak Taylor defects vs h")
    _add_common(p)
    p.add_argument("--points", type=int, default=5)
    p.add_argument("--seed-x", type=int, default=0)
    p.set_defaults(func=cmd_weak_taylor)

    p = sub.add_parser("reference", help="reference Gibbs average by quadrature")
    _add_common(p, scheme=False)
    p.add_argument("--cache", help="key-value cache file")
    p.set_defaults(func=cmd_reference)

    p = sub.add_parser("sample", help="per-trajectory estimates")
    _add_common(p, run=True)
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("converge", help="error vs h against the reference value")
    _add_common(p, run=True)
    p.add_argument("--cache", help="key-value cache file for the reference")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("figures", help="desk-scale convergence figures as CSV + gnuplot")
    p.add_argument("figure", choices=FIGURES)
    p.add_argument("--config")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--out-dir", default="figures")
    p.add_argument("--schemes", nargs="+")
    p.add_argument("--h", type=float, nargs="+")
    p.add_argument("--T", type=float)
    p.add_argument("--M", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--workers", type=int)
    p.add_argument("--estimator", choices=("time", "ensemble"))
    p.add_argument("--cache")
    p.set_defaults(func=cmd_figures)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "figures":
        # figure runs default to the fixed experiment protocol
        for key, default in (("T", 1e4), ("M", 10), ("seed", 1)):
            if getattr(args, key) is None and not args.config:
                setattr(args, key, default)
    try:
        return args.func(args)
    except (PostSDEError, KeyError, ValueError, OSError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"postsde {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
