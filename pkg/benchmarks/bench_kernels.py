"""Compare the compiled and pure-Python trajectory kernels.

Usage: python benchmarks/bench_kernels.py [--steps N] [--repeat R]

For each (problem, scheme) pair both backends advance the same chain on the
same noise; the script reports steps per second, the speedup and the largest
difference of the final states.
"""
import argparse
import time

import numpy as np

from postsde import kernels
from postsde.ergodic import default_x0
from postsde.model import NoiseStream, make_problem
from postsde.newton import NewtonConfig
from postsde.schemes import preset

CASES = [
    ("ou", {}, "em_shift", 0.1),
    ("linear2d", {"epsilon": 1e-4}, "theta1_stab", 0.1),
    ("doublewell1d", {}, "theta1_stab", 0.05),
    ("nonstiff2d", {}, "theta1_det", 0.02),
    ("stiff3d", {}, "theta1_stab", 0.02),
    ("spring", {"dim": 10}, "implicit_euler", 0.02),
]


def run(backend, problem, spec, h, noise, repeat):
    kernels.use_backend(backend)
    best = np.inf
    for _ in range(repeat):
        x = default_x0(problem).copy()
        prev = np.zeros(problem.dim)
        out = np.empty_like(noise)
        t0 = time.perf_counter()
        steps, status, *_ = kernels.advance_problem(problem, spec, h, x, prev, 0, noise, out,
                                                    NewtonConfig(), 1e6, True)
        best = min(best, time.perf_counter() - t0)
    return steps, status, x, best


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--steps", type=int, default=20000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    if not kernels.COMPILED_AVAILABLE:
        raise SystemExit("compiled kernel not built")
    old = kernels.backend()
    print(f"{'problem':<14}{'scheme':<16}{'compiled/s':>14}{'pure/s':>12}{'speedup':>10}{'max|dx|':>12}")
    try:
        for name, params, scheme, h in CASES:
            problem = make_problem(name, **params)
            spec = preset(scheme)
            noise = NoiseStream(0, 0, problem.dim).block(args.steps)
            n_c, s_c, x_c, t_c = run("compiled", problem, spec, h, noise, args.repeat)
            n_p, s_p, x_p, t_p = run("pure", problem, spec, h, noise, 1)
            assert (n_c, s_c) == (n_p, s_p), (name, n_c, s_c, n_p, s_p)
            print(f"{name:<14}{scheme:<16}{n_c / t_c:>14.3g}{n_p / t_p:>12.3g}{t_p / t_c * n_c / max(n_p, 1):>10.1f}"
                  f"{np.max(np.abs(x_c - x_p)):>12.2e}")
    finally:
        kernels.use_backend(old)


if __name__ == "__main__":
    main()
