"""Real polynomials and real-root isolation on an interval.

Roots are isolated by recursive subdivision at the critical points: the
real roots of ``p'`` split ``[lo, hi]`` into pieces on which ``p`` is
monotone, so each piece holds at most one root and a sign change brackets it.
Critical points where ``|p|`` is negligible and ``p`` does not change sign are
reported as even-multiplicity roots.

Evaluation uses compensated Horner (error-free transformations), which
returns values as accurate as Horner run in doubled working precision. This
matters for the Chebyshev-like polynomials used by the solvers, whose
coefficients grow geometrically and cancel heavily near ``|x| = 2``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from optphase.errors import InvalidArgumentError

TRIM_EPS = 1e-30
MAX_DEGREE = 64

_SPLITTER = 134217729.0  # 2**27 + 1


def _two_sum(a, b):
    s = a + b
    z = s - a
    return s, (a - (s - z)) + (b - z)


def _split(a):
    c = _SPLITTER * a
    hi = c - (c - a)
    return hi, a - hi


def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, al * bl - (((p - ah * bh) - al * bh) - ah * bl)


def comp_horner(coeffs: Sequence[float], x):
    """Compensated Horner evaluation; ``x`` may be a scalar or an array."""
    x = np.asarray(x, dtype=float)
    s = np.full_like(x, coeffs[-1])
    err = np.zeros_like(x)
    for a in coeffs[-2::-1]:
        p, pi = _two_prod(s, x)
        s, sigma = _two_sum(p, a)
        err = err * x + (pi + sigma)
    return s + err


@dataclass(frozen=True)
class RealPolynomial:
    """Polynomial with real coefficients in ascending degree order."""

    coeffs: tuple

    def __post_init__(self):
        c = [float(v) for v in self.coeffs]
        while c and abs(c[-1]) <= TRIM_EPS:
            c.pop()
        object.__setattr__(self, "coeffs", tuple(c))

    @classmethod
    def constant(cls, k: float) -> "RealPolynomial":
        return cls((k,))

    @classmethod
    def x(cls) -> "RealPolynomial":
        return cls((0.0, 1.0))

    @property
    def degree(self) -> int:
        # zero polynomial reports -1
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return not self.coeffs

    def __call__(self, x):
        return eval_poly(self, x)

    def derivative(self) -> "RealPolynomial":
        return RealPolynomial(tuple(k * a for k, a in enumerate(self.coeffs) if k))

    def __add__(self, other):
        return add(self, _lift(other))

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, _lift(other))

    def __rsub__(self, other):
        return sub(_lift(other), self)

    def __mul__(self, other):
        if isinstance(other, RealPolynomial):
            return mul(self, other)
        return scale(self, other)

    __rmul__ = __mul__

    def __neg__(self):
        return scale(self, -1.0)

    def __truediv__(self, k):
        return scale(self, 1.0 / k)


def _lift(v) -> RealPolynomial:
    return v if isinstance(v, RealPolynomial) else RealPolynomial.constant(v)


def eval_poly(p: RealPolynomial, x):
    if p.is_zero():
        return np.zeros_like(np.asarray(x, dtype=float))[()]
    return comp_horner(p.coeffs, x)[()]


def add(p: RealPolynomial, q: RealPolynomial) -> RealPolynomial:
    n = max(len(p.coeffs), len(q.coeffs))
    a = list(p.coeffs) + [0.0] * (n - len(p.coeffs))
    b = list(q.coeffs) + [0.0] * (n - len(q.coeffs))
    return RealPolynomial(tuple(u + v for u, v in zip(a, b)))


def sub(p: RealPolynomial, q: RealPolynomial) -> RealPolynomial:
    return add(p, scale(q, -1.0))


def scale(p: RealPolynomial, k: float) -> RealPolynomial:
    return RealPolynomial(tuple(k * a for a in p.coeffs))


def mul(p: RealPolynomial, q: RealPolynomial) -> RealPolynomial:
    if p.is_zero() or q.is_zero():
        return RealPolynomial(())
    return RealPolynomial(tuple(np.convolve(p.coeffs, q.coeffs)))


def _bisect(p: RealPolynomial, lo: np.ndarray, hi: np.ndarray, tol: float) -> np.ndarray:
    """Vectorised bisection; every bracket must carry a strict sign change."""
    lo = lo.copy()
    hi = hi.copy()
    s_lo = np.sign(comp_horner(p.coeffs, lo))
    for _ in range(2000):
        width = hi - lo
        mid = lo + 0.5 * width
        live = (width >= tol) & (mid > lo) & (mid < hi)
        if not live.any():
            break
        s_mid = np.sign(comp_horner(p.coeffs, mid))
        exact = live & (s_mid == 0)
        lo[exact] = mid[exact]
        hi[exact] = mid[exact]
        go_right = live & ~exact & (s_mid == s_lo)
        go_left = live & ~exact & (s_mid != s_lo)
        lo[go_right] = mid[go_right]
        hi[go_left] = mid[go_left]
    return lo + 0.5 * (hi - lo)


def _roots(p: RealPolynomial, lo: float, hi: float, tol: float) -> list:
    if p.degree <= 0:
        return []
    if p.degree == 1:
        r = -p.coeffs[0] / p.coeffs[1]
        return [r] if lo <= r <= hi else []

    crit = _roots(p.derivative(), lo, hi, tol)
    knots = np.array([lo] + [c for c in crit if lo < c < hi] + [hi])
    vals = comp_horner(p.coeffs, knots)
    sgn = np.sign(vals)
    flat = tol * (1.0 + max(abs(a) for a in p.coeffs))

    found = [float(k) for k, v in zip(knots, vals) if v == 0.0]

    change = sgn[:-1] * sgn[1:] < 0
    if change.any():
        idx = np.nonzero(change)[0]
        found.extend(_bisect(p, knots[idx], knots[idx + 1], tol).tolist())

    # tangential (even-multiplicity) roots at interior critical points
    for i in range(1, len(knots) - 1):
        if sgn[i] != 0 and abs(vals[i]) <= flat and sgn[i - 1] == sgn[i] == sgn[i + 1]:
            found.append(float(knots[i]))

    return found


def real_roots_in(p: RealPolynomial, lo: float, hi: float, tol: float = 1e-12) -> list:
    """All real roots of ``p`` in ``[lo, hi]``, ascending, refined to ``tol``."""
    if p.is_zero():
        raise InvalidArgumentError("zero polynomial has no isolated roots")
    if not lo < hi:
        raise InvalidArgumentError(f"empty interval [{lo}, {hi}]")
    if p.degree > MAX_DEGREE:
        raise InvalidArgumentError(f"degree {p.degree} exceeds supported maximum {MAX_DEGREE}")
    roots = sorted(_roots(p, float(lo), float(hi), tol))
    out = []
    for r in roots:
        if out and r - out[-1] <= 10 * tol:
            continue
        out.append(r)
    return out
