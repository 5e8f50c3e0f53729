"""Best phase-encoding pure state on the Fock levels ``0..N``.

Maximizing ``sum c_n c_{n+1}`` on the unit sphere gives the stationarity
condition ``c_{n+1} = lam * c_n - c_{n-1}`` with ``c_{-1} = c_{N+1} = 0``, so
``c_n = P_n(lam) * c_0``. The objective is symmetric under ``n -> N - n``,
hence ``c_N = c_0`` and ``lam`` is a root of ``P_N(lam) = 1``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from optphase.errors import InvalidArgumentError, NumericalFailure
from optphase.fock_core import FockVector, compute_mu
from optphase.polyroot import RealPolynomial, real_roots_in

ROOT_TOL = 1e-13


@dataclass(frozen=True)
class OptimalStateSolution:
    state: FockVector
    lam: float
    mu: float

    @property
    def n_max(self) -> int:
        return self.state.trunc_dim - 1


def state_recursion_polys(n_max: int) -> list[RealPolynomial]:
    """``P_0 .. P_N`` with ``P_0 = 1``, ``P_1 = lam``, ``P_{n+1} = lam P_n - P_{n-1}``."""
    if n_max < 1:
        raise InvalidArgumentError("N must be >= 1")
    lam = RealPolynomial.x()
    polys = [RealPolynomial.constant(1.0), lam]
    for _ in range(1, n_max):
        polys.append(lam * polys[-1] - polys[-2])
    return polys


def _recursion_values(n_max: int, lam: float) -> np.ndarray:
    vals = np.empty(n_max + 1)
    vals[0] = 1.0
    vals[1] = lam
    for n in range(1, n_max):
        vals[n + 1] = lam * vals[n] - vals[n - 1]
    return vals


def optimal_state(n_max: int) -> OptimalStateSolution:
    """Optimal state on ``n_max + 1`` Fock levels and its multiplier ``lam = 2 mu``."""
    polys = state_recursion_polys(n_max)
    roots = real_roots_in(polys[-1] - 1.0, 0.0, 2.0, tol=ROOT_TOL)

    best = None
    for lam in roots:
        if not 0.0 < lam < 2.0:
            continue
        vals = _recursion_values(n_max, lam)
        if np.any(vals < 0):
            # sign-changing amplitudes cannot be the maximizer
            continue
        state = FockVector.from_amplitudes(vals)
        mu = compute_mu(state)
        if best is None or mu > best.mu:
            best = OptimalStateSolution(state, lam, mu)
    if best is None:
        raise NumericalFailure(f"no admissible root of P_{n_max}(lam) = 1 in (0, 2)")
    if abs(polys[-1](best.lam) - 1.0) > 1e-10:
        raise NumericalFailure("root refinement did not reach P_N(lam) = 1")
    return best

