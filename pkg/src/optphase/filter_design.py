"""Optimal Fock-diagonal filter for phase measurement at fixed success probability.

For an input state with amplitudes ``c_n > 0`` write ``x_n = c_n**2`` and
``a_n = c_n c_{n+1}``. A filter ``f`` transmits with probability
``sum x_n f_n**2`` and leaves a state with ``mu = sum a_n f_n f_{n+1} / P``.
Above a threshold ``N`` the filter is the identity; below it the Lagrange
conditions

    f_{n-1} a_{n-1} + f_{n+1} a_n = lam * f_n * x_n,    n = 0..N-1

give ``f_n = P_n(lam) / P_N(lam)`` with the three-term recursion in
:func:`filter_recursion_polys`, and the probability constraint becomes the
polynomial equation of :func:`constraint_polynomial`.

Roots are located through the equivalent secular form. With
``z_n = c_n f_n`` the interior equations read ``(lam - M) z = b``, where
``M`` is the symmetric tridiagonal matrix with entries
``a_n / sqrt(x_n x_{n+1})`` and ``b`` collects the pinned neighbours
(``b = c_N e_{N-1}`` for a plain threshold). The constraint is

    s(lam) = sum_k w_k / (lam - theta_k)**2 - R = 0,

with ``theta_k`` the eigenvalues of ``M``, ``w_k`` the squared projections of
``b`` on its eigenvectors and ``R`` the probability left for the free levels.
``s`` is convex between consecutive poles and monotone outside them, so every
root is bracketed exactly and refined by bisection.

For large amplitudes the best filter can also pass a few of the lowest levels
untouched: levels ``0..L-1`` pinned at one, ``L..N-1`` free, ``N..`` pinned.
:func:`optimal_filter` searches these blocks too; ``L = 0`` is the plain
threshold form.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import eigh_tridiagonal

from optphase.errors import InfeasibleProbabilityError, InvalidArgumentError, UnsupportedStateError
from optphase.fock_core import CLIP_TOL, Filter, FockVector
from optphase.polyroot import RealPolynomial

DEFAULT_N_MAX = 30
TIE_TOL = 1e-10
_MAX_STEPS = 200


@dataclass(frozen=True)
class FilterProblem:
    state: FockVector
    target_prob: float

    def __post_init__(self):
        if not 0.0 < self.target_prob <= 1.0:
            raise InvalidArgumentError(f"success probability must lie in (0, 1], got {self.target_prob!r}")
        if self.state.trunc_dim < 2:
            raise UnsupportedStateError("filtering needs a state with at least two Fock levels")

    @property
    def x(self) -> np.ndarray:
        return self.state.populations

    @property
    def a(self) -> np.ndarray:
        c = self.state.coeffs
        return c[:-1] * c[1:]

    @property
    def dim(self) -> int:
        return self.state.trunc_dim

    def feasibility_floor(self, threshold: int) -> float:
        """Smallest success probability reachable with ``f_n = 1`` for ``n >= threshold``."""
        return float(np.sum(self.x[threshold:]))

    def with_prob(self, prob: float) -> "FilterProblem":
        return FilterProblem(self.state, prob)


@dataclass(frozen=True)
class FilterSolution:
    filter: Filter | None  # None when the root is unphysical
    transmissions: np.ndarray  # raw f_0..f_{N-1} before clipping
    lam: float
    threshold: int
    achieved_prob: float
    mu_out: float
    physical: bool
    global_opt: bool = False
    lower: int = 0  # levels below this index pass untouched


def _check_threshold(problem: FilterProblem, threshold: int) -> None:
    if not 1 <= threshold < problem.dim:
        raise InvalidArgumentError(f"threshold N={threshold} outside [1, {problem.dim - 1}]")
    if np.any(problem.a[:threshold] <= 0):
        raise UnsupportedStateError(f"state has a zero amplitude below threshold N={threshold}")


def stationarity_residual(problem: FilterProblem, filt: Filter | np.ndarray, lam: float) -> float:
    """Largest violation of the Lagrange conditions over the free filter entries."""
    if isinstance(filt, Filter):
        threshold = filt.threshold
        f = filt.padded(problem.dim)
    else:
        f = np.asarray(filt, dtype=float)
        threshold = f.size
        f = np.concatenate([f, np.ones(problem.dim - f.size)])
    a, x = problem.a, problem.x
    worst = 0.0
    for n in range(min(threshold, problem.dim - 1)):
        if not 0.0 < f[n] < 1.0:
            continue
        left = f[n - 1] * a[n - 1] if n > 0 else 0.0
        worst = max(worst, abs(left + f[n + 1] * a[n] - lam * f[n] * x[n]))
    return worst


def filter_recursion_polys(problem: FilterProblem, threshold: int) -> list[RealPolynomial]:
    """``P_0 .. P_N`` in ``lam`` with ``f_n = f_0 P_n(lam)``."""
    _check_threshold(problem, threshold)
    a, x = problem.a, problem.x
    lam = RealPolynomial.x()
    polys = [RealPolynomial.constant(1.0), lam * (x[0] / a[0])]
    for n in range(1, threshold):
        polys.append((lam * polys[n] * x[n] - polys[n - 1] * a[n - 1]) / a[n])
    return polys


def constraint_polynomial(problem: FilterProblem, threshold: int, weighted: bool = True) -> RealPolynomial:
    """Polynomial whose real roots are the multipliers meeting the probability target.

    ``sum_{n<=N} x_n P_n**2 - (P - 1 + sum_{n<=N} x_n) P_N**2``. With
    ``weighted=False`` the ``x_n`` weights of the first sum are dropped; that
    variant does not encode the constraint and exists for comparison only.
    """
    polys = filter_recursion_polys(problem, threshold)
    x = problem.x
    k = problem.target_prob - float(np.sum(x[threshold + 1:]))
    total = RealPolynomial(())
    for n, p in enumerate(polys):
        total = total + (p * p) * (x[n] if weighted else 1.0)
    return total - (polys[-1] * polys[-1]) * k


def _recursion_values(problem: FilterProblem, threshold: int, lam: float) -> np.ndarray:
    a, x = problem.a, problem.x
    p = np.empty(threshold + 1)
    p[0] = 1.0
    p[1] = lam * x[0] / a[0]
    for n in range(1, threshold):
        p[n + 1] = (lam * x[n] * p[n] - a[n - 1] * p[n - 1]) / a[n]
    return p


def _refine(fun, lo, hi, positive_at_lo: bool) -> np.ndarray:
    """Safeguarded Newton, elementwise over brackets where ``fun`` changes sign once.

    ``fun`` returns the value and the derivative. Steps that leave the
    current bracket are replaced by bisection.
    """
    lo = np.array(lo, dtype=float)
    hi = np.array(hi, dtype=float)
    x = lo + 0.5 * (hi - lo)
    active = np.ones(x.shape, dtype=bool)
    for _ in range(_MAX_STEPS):
        fx, dfx = fun(x)
        move_lo = (fx > 0) == positive_at_lo
        lo = np.where(active & move_lo, x, lo)
        hi = np.where(active & ~move_lo, x, hi)
        mid = lo + 0.5 * (hi - lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = fx / dfx
        done = (fx == 0) | (np.abs(step) <= 5e-16 * np.abs(x)) | ~((lo < mid) & (mid < hi))
        nxt = x - step
        nxt = np.where((lo < nxt) & (nxt < hi), nxt, mid)
        x = np.where(active & ~done, nxt, x)
        active &= ~done
        if not active.any():
            break
    return x


@dataclass(frozen=True)
class _Secular:
    """Secular data for free levels ``lower..threshold-1``."""

    theta: np.ndarray  # descending
    vecs: np.ndarray
    proj: np.ndarray  # eigenvector projections of b
    rem: float

    def s(self, lam):
        d = np.subtract.outer(lam, self.theta)
        return np.sum(self.proj**2 / d**2, axis=-1) - self.rem

    def psi(self, lam):
        """``(s + R)**-0.5 - R**-0.5`` and its slope; nearly linear next to each pole."""
        w = self.proj**2
        d = np.subtract.outer(lam, self.theta)
        g = np.sum(w / d**2, axis=-1)
        dg = -2.0 * np.sum(w / d**3, axis=-1)
        return g**-0.5 - self.rem**-0.5, -0.5 * g**-1.5 * dg

    def ds(self, lam):
        """``s'`` and ``s''``."""
        w = self.proj**2
        d = np.subtract.outer(lam, self.theta)
        return -2.0 * np.sum(w / d**3, axis=-1), 6.0 * np.sum(w / d**4, axis=-1)

    def z(self, lam: float) -> np.ndarray:
        return self.vecs @ (self.proj / (lam - self.theta))


def _secular(problem: FilterProblem, threshold: int, lower: int = 0) -> _Secular | None:
    x, a, c = problem.x, problem.a, problem.state.coeffs
    rem = problem.target_prob - float(np.sum(x[threshold:])) - float(np.sum(x[:lower]))
    if rem <= 0:
        return None
    m = threshold - lower
    if m == 1:
        theta, vecs = np.zeros(1), np.ones((1, 1))
    else:
        free = slice(lower, threshold)
        offdiag = a[free][:-1] / np.sqrt(x[free][:-1] * x[free][1:])
        theta, vecs = eigh_tridiagonal(np.zeros(m), offdiag)
        theta, vecs = theta[::-1], vecs[:, ::-1]
    b = np.zeros(m)
    b[-1] = a[threshold - 1] / c[threshold - 1]
    if lower:
        b[0] += a[lower - 1] / c[lower]
    return _Secular(theta, vecs, vecs.T @ b, rem)


def _secular_roots(sec: _Secular, mode: str = "all") -> list[float]:
    """Real roots of ``s``, ascending.

    ``mode="top"`` keeps just the root above the spectrum, the global
    maximizer of the reduced problem without the box constraint.
    ``mode="upper"`` adds the roots in the highest gap between poles, where
    the only other local maximum can sit.
    """
    theta = sec.theta
    mass = float(np.sum(sec.proj**2))
    # outside the spectrum s falls monotonically from +inf towards -rem;
    # psi has the opposite sign of s
    reach = math.sqrt(mass / sec.rem)
    roots = [float(_refine(sec.psi, theta[0], theta[0] + reach, False))]
    if mode == "top":
        return roots
    if mode == "all":
        roots.append(float(_refine(sec.psi, theta[-1] - reach, theta[-1], True)))
    gaps = theta.size - 1 if mode == "all" else min(1, theta.size - 1)
    if gaps:
        lo, hi = theta[1 : gaps + 1], theta[:gaps]
        # s is convex on each gap; its minimum is where s' crosses zero
        m = _refine(sec.ds, lo, hi, False)
        smin = sec.s(m)
        tangent = np.abs(smin) <= 1e-14 * (sec.rem + mass)
        roots.extend(m[tangent].tolist())
        cross = (smin < 0) & ~tangent
        if cross.any():
            roots.extend(_refine(sec.psi, lo[cross], m[cross], False).tolist())
            roots.extend(_refine(sec.psi, m[cross], hi[cross], True).tolist())
    return sorted(roots)


def _build_solution(
    problem: FilterProblem, threshold: int, lam: float, lower: int = 0, sec: _Secular | None = None
) -> FilterSolution:
    if lower == 0:
        p = _recursion_values(problem, threshold, lam)
        raw = p[:threshold] / p[threshold]
    else:
        raw = np.ones(threshold)
        raw[lower:] = sec.z(lam) / problem.state.coeffs[lower:threshold]
    physical = bool(np.all(np.isfinite(raw)) and np.all(raw >= -CLIP_TOL) and np.all(raw <= 1.0 + CLIP_TOL))
    f = np.clip(raw, 0.0, 1.0) if physical else raw
    full = np.concatenate([f, np.ones(problem.dim - threshold)])
    prob = float(np.sum(problem.x * full * full))
    mu = float(np.sum(problem.a * full[:-1] * full[1:]) / prob) if prob > 0 else 0.0
    return FilterSolution(
        filter=Filter(f) if physical else None,
        transmissions=raw,
        lam=float(lam),
        threshold=threshold,
        achieved_prob=prob,
        mu_out=mu,
        physical=physical,
        lower=lower,
    )


def solve_for_threshold(problem: FilterProblem, threshold: int) -> list[FilterSolution]:
    """Every stationary filter with identity above ``threshold``, best ``mu_out`` first.

    An empty list means the threshold cannot reach the target probability.
    """
    _check_threshold(problem, threshold)
    sec = _secular(problem, threshold)
    if sec is None:
        return []
    sols = [_build_solution(problem, threshold, lam) for lam in _secular_roots(sec)]
    sols.sort(key=lambda s: (-s.mu_out, s.lam))
    return sols


def _identity_solution(problem: FilterProblem) -> FilterSolution:
    # P = 1 pins every transmission to one; the N = 1 multiplier is a_0 / x_0
    x, a = problem.x, problem.a
    mu = float(np.dot(problem.state.coeffs[:-1], problem.state.coeffs[1:]))
    return FilterSolution(
        filter=Filter(np.ones(1)),
        transmissions=np.ones(1),
        lam=float(a[0] / x[0]),
        threshold=1,
        achieved_prob=float(np.sum(x)),
        mu_out=mu,
        physical=True,
        global_opt=True,
    )


def _block_candidates(problem: FilterProblem, threshold: int, lower: int, sec: _Secular) -> list[FilterSolution]:
    if lower == 0:
        return solve_for_threshold(problem, threshold)
    # a local maximum of the reduced problem sits above the spectrum or in its top gap
    return [_build_solution(problem, threshold, lam, lower, sec) for lam in _secular_roots(sec, "upper")]


def _envelope(problem: FilterProblem, thresholds) -> FilterSolution | None:
    best = None
    for n in thresholds:
        _check_threshold(problem, n)
        for lower in range(n):
            sec = _secular(problem, n, lower)
            if sec is None:
                break  # pinning more levels only uses up more probability
            lead = _build_solution(problem, n, _secular_roots(sec, "top")[0], lower, sec)
            # the top root bounds every stationary point of this block and of
            # every block with more levels pinned
            if best is not None and lead.mu_out <= best.mu_out + TIE_TOL:
                break
            if lead.physical:
                best = lead
                break
            for sol in sorted(_block_candidates(problem, n, lower, sec), key=lambda s: s.lam):
                if sol.physical and (best is None or sol.mu_out > best.mu_out + TIE_TOL):
                    best = sol
    return best


def optimal_filter(problem: FilterProblem, n_max: int = DEFAULT_N_MAX) -> FilterSolution:
    """Best physical filter over thresholds ``1..n_max``.

    Each threshold is tried with ``lower = 0, 1, ...`` low levels left
    untouched, stopping once the bound from the unconstrained top root drops
    below the incumbent.

    If the winner sits at ``n_max`` the sweep is repeated with ``2 * n_max``
    (bounded by the state's support).
    """
    if n_max < 1:
        raise InvalidArgumentError("n_max must be >= 1")
    if problem.target_prob == 1.0:
        return _identity_solution(problem)
    top = problem.dim - 1
    lo = 1
    best = None
    while True:
        hi = min(n_max, top)
        cand = _envelope(problem, range(lo, hi + 1))
        if cand is not None and (best is None or cand.mu_out > best.mu_out + TIE_TOL):
            best = cand
        if best is None or best.threshold < n_max or n_max >= top:
            break
        lo, n_max = n_max + 1, 2 * n_max
    if best is None:
        floor = problem.feasibility_floor(min(n_max, top))
        raise InfeasibleProbabilityError(
            f"no physical filter reaches P={problem.target_prob:g} with N <= {min(n_max, top)}; "
            f"feasibility floor is {floor:.6g}",
            floor=floor,
        )
    return replace(best, global_opt=True)
