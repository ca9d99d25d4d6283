"""Accuracy and stability of the schemes on the scalar test equation.

For ``dX = -gamma X dt + sigma dW`` every scheme of the theta family reduces to

    X_{n+1} = A(z) X_n + B(z) sqrt(h) sigma xi_n,
    Xbar_n  = C(z) X_n + D(z) sqrt(h) sigma xi_n,         z = -gamma h,

with rational A, B, C, D. Everything here is computed from those four
functions. Coefficients are converted to ``Fraction`` exactly (a float is a
dyadic rational), so cancellations that are exact for the published
coefficient sets stay exact, e.g. the defect of ``em_shift`` is identically 0.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational as _RationalNumber

import numpy as np

from .errors import PoleError, StabilityError, SynthesisError
from .schemes import PostKind, SchemeSpec

DEFAULT_ORDER = 8
ZERO_TOL = 1e-14


def _exact(v):
    if isinstance(v, _RationalNumber):
        return Fraction(v)
    return Fraction(float(v))


# ---------------------------------------------------------------- polynomials

def _trim(p):
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return tuple(p) if p else (Fraction(0),)


def _padd(p, q):
    n = max(len(p), len(q))
    return _trim([(p[i] if i < len(p) else 0) + (q[i] if i < len(q) else 0) for i in range(n)])


def _pscale(p, s):
    return _trim([s * v for v in p])


def _pmul(p, q):
    out = [Fraction(0)] * (len(p) + len(q) - 1)
    for i, u in enumerate(p):
        if u == 0:
            continue
        for j, v in enumerate(q):
            out[i + j] += u * v
    return _trim(out)


def _is_zero(p):
    return len(p) == 1 and p[0] == 0


def _pdivmod(p, q):
    p = list(p)
    dq = len(q) - 1
    if len(p) - 1 < dq:
        return (Fraction(0),), _trim(p)
    quot = [Fraction(0)] * (len(p) - dq)
    for k in range(len(p) - 1 - dq, -1, -1):
        coef = p[k + dq] / q[-1]
        quot[k] = coef
        for j, v in enumerate(q):
            p[k + j] -= coef * v
    return _trim(quot), _trim(p[:dq] if dq else [0])


def _pgcd(p, q):
    while not _is_zero(q):
        p, q = q, _pdivmod(p, q)[1]
    return _pscale(p, 1 / p[-1])


def _peval(p, z):
    acc = 0.0
    for v in reversed(p):
        acc = acc * z + float(v)
    return acc


def _low_order(p):
    """Index of the lowest nonzero coefficient (``len(p)`` for the zero polynomial)."""
    for i, v in enumerate(p):
        if v != 0:
            return i
    return len(p)


class Rational:
    """Exact rational function ``num(z) / den(z)`` with Fraction coefficients."""

    def __init__(self, num, den=(1,)):
        num = _trim([_exact(v) for v in num])
        den = _trim([_exact(v) for v in den])
        if _is_zero(den):
            raise PoleError("zero denominator polynomial")
        if _is_zero(num):
            num, den = (Fraction(0),), (Fraction(1),)
        else:
            g = _pgcd(num, den)
            if len(g) > 1:
                num, den = _pdivmod(num, g)[0], _pdivmod(den, g)[0]
            lead = den[_low_order(den)]
            num, den = _pscale(num, 1 / lead), _pscale(den, 1 / lead)
        self.num, self.den = num, den

    @classmethod
    def const(cls, v):
        return cls((v,))

    def __add__(self, other):
        other = other if isinstance(other, Rational) else Rational.const(other)
        return Rational(_padd(_pmul(self.num, other.den), _pmul(other.num, self.den)),
                        _pmul(self.den, other.den))

    __radd__ = __add__

    def __neg__(self):
        return Rational(_pscale(self.num, -1), self.den)

    def __sub__(self, other):
        return self + (-(other if isinstance(other, Rational) else Rational.const(other)))

    def __rsub__(self, other):
        return Rational.const(other) - self

    def __mul__(self, other):
        other = other if isinstance(other, Rational) else Rational.const(other)
        return Rational(_pmul(self.num, other.num), _pmul(self.den, other.den))

    __rmul__ = __mul__

    def __truediv__(self, other):
        other = other if isinstance(other, Rational) else Rational.const(other)
        if other.is_zero():
            raise PoleError("division by the zero function")
        return Rational(_pmul(self.num, other.den), _pmul(self.den, other.num))

    def __pow__(self, k: int):
        out = Rational.const(1)
        for _ in range(k):
            out = out * self
        return out

    def is_zero(self):
        return _is_zero(self.num)

    def __call__(self, z):
        d = _peval(self.den, z)
        if d == 0.0:
            raise PoleError(f"pole at z={z}")
        return _peval(self.num, z) / d

    def limit_neg_inf(self):
        """Limit as z -> -infinity (may be +-inf)."""
        dn, dd = len(self.num) - 1, len(self.den) - 1
        if self.is_zero() or dn < dd:
            return 0.0
        ratio = float(self.num[-1] / self.den[-1])
        if dn == dd:
            return ratio
        return math.copysign(math.inf, ratio * (-1) ** (dn - dd))

    def series(self, order: int = DEFAULT_ORDER) -> "TruncatedSeries":
        if self.den[0] == 0:
            raise PoleError("rational function has a pole at z=0")
        return TruncatedSeries(self.num, order) / TruncatedSeries(self.den, order)

    def __repr__(self):
        f = lambda p: "[" + ", ".join(f"{float(v):.6g}" for v in p) + "]"
        return f"Rational(num={f(self.num)}, den={f(self.den)})"


Z = Rational((0, 1))


# ---------------------------------------------------------------- power series

class TruncatedSeries:
    """Power series ``c_0 + c_1 z + ... + c_K z^K`` with everything above z^K dropped.

    Coefficients may be floats or Fractions; Fraction inputs stay exact under
    ``+ - * /`` and under powers whose leading coefficient is 1.
    """

    def __init__(self, coefficients, order: int | None = None):
        c = list(coefficients)
        K = len(c) - 1 if order is None else int(order)
        if K < 0:
            raise ValueError("order must be nonnegative")
        c = c[:K + 1] + [0] * (K + 1 - len(c))
        self.coefficients = tuple(c)
        self.order = K

    def __len__(self):
        return self.order + 1

    def __getitem__(self, k):
        return self.coefficients[k]

    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            if other.order != self.order:
                K = min(self.order, other.order)
                return TruncatedSeries(self.coefficients, K), TruncatedSeries(other.coefficients, K)
            return self, other
        return self, TruncatedSeries([other], self.order)

    def __add__(self, other):
        a, b = self._coerce(other)
        return TruncatedSeries([u + v for u, v in zip(a, b)], a.order)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-u for u in self], self.order)

    def __sub__(self, other):
        a, b = self._coerce(other)
        return TruncatedSeries([u - v for u, v in zip(a, b)], a.order)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        a, b = self._coerce(other)
        K = a.order
        return TruncatedSeries([sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(K + 1)], K)

    __rmul__ = __mul__

    def __truediv__(self, other):
        a, b = self._coerce(other)
        if b[0] == 0:
            raise ZeroDivisionError("series division needs a nonzero constant term")
        K = a.order
        q = []
        for k in range(K + 1):
            s = a[k] - sum(q[j] * b[k - j] for j in range(k))
            q.append(s / b[0])
        return TruncatedSeries(q, K)

    def __rtruediv__(self, other):
        return TruncatedSeries([other], self.order) / self

    def power(self, alpha):
        """``self ** alpha`` for real alpha, needs c_0 > 0 unless alpha is a nonnegative integer."""
        f = self.coefficients
        if isinstance(alpha, int) and alpha >= 0:
            out = TruncatedSeries([1], self.order)
            for _ in range(alpha):
                out = out * self
            return out
        if not f[0] > 0:
            raise ValueError("fractional power needs a positive constant term")
        alpha = _exact(alpha) if isinstance(f[0], Fraction) else float(alpha)
        g0 = Fraction(1) if f[0] == 1 else float(f[0]) ** float(alpha)
        g = [g0]
        # (f g' = alpha f' g) gives the recurrence for g = f^alpha
        for k in range(1, self.order + 1):
            s = sum(((alpha + 1) * j - k) * f[j] * g[k - j] for j in range(1, k + 1))
            g.append(s / (k * f[0]))
        return TruncatedSeries(g, self.order)

    def sqrt(self):
        return self.power(Fraction(1, 2))

    def __pow__(self, alpha):
        return self.power(alpha)

    def __call__(self, z):
        acc = 0.0
        for v in reversed(self.coefficients):
            acc = acc * z + float(v)
        return acc

    def to_float(self):
        return np.array([float(v) for v in self.coefficients])

    def leading_order(self, tol: float = ZERO_TOL):
        """Index of the first coefficient above ``tol`` in magnitude; ``inf`` if none."""
        for k, v in enumerate(self.coefficients):
            if abs(float(v)) > tol:
                return k
        return math.inf

    def is_exactly_zero(self):
        return all(v == 0 for v in self.coefficients)

    def __repr__(self):
        return f"TruncatedSeries({[float(v) for v in self.coefficients]})"


# ---------------------------------------------------------------- method functions

@dataclass(frozen=True)
class LinearMethodFunctions:
    A: Rational
    B: Rational
    C: Rational
    D: Rational
    label: str = ""

    def series(self, order: int = DEFAULT_ORDER) -> dict:
        return {k: getattr(self, k).series(order) for k in "ABCD"}


def method_functions(spec: SchemeSpec) -> LinearMethodFunctions:
    """A, B, C, D of a theta-family scheme applied to ``f(x) = -gamma x``."""
    theta, a = _exact(spec.theta), _exact(spec.a)
    b, c = _exact(spec.b), _exact(spec.c)
    one = Rational.const(1)
    den = one - theta * Z
    A = (one + (1 - theta) * Z) / den
    B = (one + a * Z) / den
    kind = spec.post_kind
    if kind is PostKind.NONE:
        C, D = one, Rational.const(0)
    elif kind is PostKind.NOISE_SHIFT:
        C, D = one, Rational.const(Fraction(1, 2))
    elif kind is PostKind.STOCHASTIC_PLAIN:
        C, D = one, Rational.const(c)
    elif kind is PostKind.STOCHASTIC_STABILIZED:
        C, D = one, Rational.const(c) / (one - Z)
    elif kind is PostKind.DETERMINISTIC_IMPLICIT:
        pden = one - theta * b * Z
        C = (one + (1 - theta) * b * Z) / pden
        D = Rational.const(c) / pden
    else:  # pragma: no cover
        raise ValueError(kind)
    return LinearMethodFunctions(A, B, C, D, spec.label)


class VarianceAmplification(Rational):
    """``R(z) = 2 z B^2 / (A^2 - 1)``, stored in lowest terms.

    Evaluation refuses points where ``|A(z)| = 1`` (other than the removable
    point z = 0), where the stationary variance is undefined.
    """

    def __init__(self, fns: LinearMethodFunctions):
        R = 2 * Z * fns.B * fns.B / (fns.A * fns.A - 1)
        super().__init__(R.num, R.den)
        self._A = fns.A

    def __call__(self, z):
        if z != 0 and abs(self._A(z)) == 1.0:
            raise PoleError(f"|A(z)| = 1 at z={z}")
        return super().__call__(z)


def variance_amplification(fns: LinearMethodFunctions) -> VarianceAmplification:
    return VarianceAmplification(fns)


def invariant_defect_rational(fns: LinearMethodFunctions) -> Rational:
    R = variance_amplification(fns)
    return R * fns.C * fns.C - 2 * Z * fns.D * fns.D - 1


def invariant_defect(fns: LinearMethodFunctions, order: int = DEFAULT_ORDER) -> TruncatedSeries:
    """Series of ``R C^2 - 2 z D^2 - 1``; its leading order is the OU order of accuracy."""
    return invariant_defect_rational(fns).series(order)


def defect_order(fns: LinearMethodFunctions, order: int = DEFAULT_ORDER, tol: float = ZERO_TOL):
    return invariant_defect(fns, order).leading_order(tol)


def stationary_variance(fns: LinearMethodFunctions, gamma, sigma, h) -> float:
    """Exact ``lim E(Xbar_n^2)`` of the postprocessed chain on the OU process."""
    z = -gamma * h
    if not is_mean_square_stable(fns, z):
        raise StabilityError(f"|A(z)| >= 1 at z={z}")
    R = variance_amplification(fns)(z)
    C, D = fns.C(z), fns.D(z)
    return sigma ** 2 / (2 * gamma) * C * C * abs(R) + h * sigma ** 2 * D * D


# ---------------------------------------------------------------- stability

def is_mean_square_stable(fns: LinearMethodFunctions, z) -> bool:
    try:
        return abs(fns.A(z)) < 1.0
    except PoleError:
        return False


def a_stability_scan(fns: LinearMethodFunctions, points: int = 2001) -> bool:
    """Numerical A-stability check on z in [-1e8, -1e-4] plus the limit z -> -inf."""
    zs = -np.logspace(-4, 8, points)
    if not all(is_mean_square_stable(fns, z) for z in zs):
        return False
    return abs(fns.A.limit_neg_inf()) <= 1.0


@dataclass(frozen=True)
class LStability:
    kernel_limit: float
    postprocessed_damping: float

    @property
    def kernel_l_stable(self):
        return self.kernel_limit == 0.0

    @property
    def postprocessed_damped(self):
        return self.postprocessed_damping == 0.0


def l_stability(fns: LinearMethodFunctions) -> LStability:
    """Limits as z -> -inf of ``A`` and of the postprocessed one-step response.

    ``Xbar_1 = C A X_0 + C B s xi_0 + D s xi_1``; the damping reported is
    ``max(lim (C A)^2, lim D^2)``, i.e. the postprocessor must kill both the
    stiff deterministic mode and its own injected noise.
    """
    CA = (fns.C * fns.A).limit_neg_inf()
    Dl = fns.D.limit_neg_inf()
    return LStability(fns.A.limit_neg_inf(), max(CA * CA, Dl * Dl))


# ---------------------------------------------------------------- synthesis

def synthesize_postprocessor(fns: LinearMethodFunctions, s: int) -> TruncatedSeries:
    """Polynomial ``C`` of degree < s with ``R C^2 - 1 = O(z^s)`` (D = 0)."""
    if s < 1:
        raise ValueError("s must be at least 1")
    R = variance_amplification(fns).series(max(s - 1, 0))
    if not float(R[0]) > 0:
        raise SynthesisError("R(0) must be positive")
    return R.power(Fraction(-1, 2))
