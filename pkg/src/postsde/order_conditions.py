"""Order-two conditions for the invariant measure of the postprocessed theta family.

A kernel ``(theta, a)`` with postprocessor ``(b, c)`` has order two for the
invariant measure (assuming ergodicity) when

    r1 = a^2 + 2 theta a + b - c^2 = 0,
    r2 = a + b - c^2 - 1/4 + theta/2 = 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational

from .errors import NoRealSolution

CERTIFY_TOL = 1e-12


@dataclass(frozen=True)
class OrderConditionResidual:
    r1: float | Fraction
    r2: float | Fraction

    def certified(self, tol: float = CERTIFY_TOL) -> bool:
        return abs(self.r1) <= tol and abs(self.r2) <= tol

    def max_abs(self) -> float:
        return float(max(abs(self.r1), abs(self.r2)))


def _all_rational(*vals):
    return all(isinstance(v, Rational) for v in vals)


def check_order2(theta, a, b, c) -> OrderConditionResidual:
    """Residuals of both conditions; exact when every input is an int or Fraction."""
    if _all_rational(theta, a, b, c):
        theta, a, b, c = map(Fraction, (theta, a, b, c))
        quarter, half = Fraction(1, 4), Fraction(1, 2)
    else:
        theta, a, b, c = map(float, (theta, a, b, c))
        quarter, half = 0.25, 0.5
    r1 = a * a + 2 * theta * a + b - c * c
    r2 = a + b - c * c - quarter + theta * half
    return OrderConditionResidual(r1, r2)


def solve_family(theta, c) -> list[tuple]:
    """All real ``(a, b)`` satisfying both conditions for given ``theta`` and ``c``.

    Two branches for theta > 1/2, one (double root) for theta in {0, 1/2}.
    """
    exact = _all_rational(theta, c)
    if exact:
        theta, c = Fraction(theta), Fraction(c)
    if 0 < theta < 0.5 or theta < 0:
        raise NoRealSolution(f"no real solution for theta={float(theta)}: need theta = 0 or theta >= 1/2")
    disc = 2 * theta * (2 * theta - 1)
    half = Fraction(1, 2) if exact else 0.5
    a0 = half - theta
    b0 = c * c - half / 2 + theta * half
    if disc == 0:
        return [(a0, b0)]
    root = math.sqrt(float(disc)) / 2
    a0, b0 = float(a0), float(b0)
    return [(a0 + root, b0 - root), (a0 - root, b0 + root)]


def preset_residuals():
    """``(name, theta, a, b, c, residual)`` for every postprocessed preset."""
    from .schemes import _PRESETS, PostKind

    rows = []
    for name, spec in _PRESETS.items():
        if spec.post_kind is PostKind.NONE:
            continue
        c = 0.5 if spec.post_kind is PostKind.NOISE_SHIFT else spec.c
        rows.append((name, spec.theta, spec.a, spec.b, c, check_order2(spec.theta, spec.a, spec.b, c)))
    return rows
