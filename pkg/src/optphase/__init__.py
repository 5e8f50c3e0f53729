"""Optimal deterministic and probabilistic measurement of optical phase."""

from optphase.errors import (
    DegenerateFilterError,
    InfeasibleProbabilityError,
    InvalidArgumentError,
    NumericalFailure,
    UnsupportedStateError,
)
from optphase.fock_core import (
    Filter,
    FockVector,
    PhaseStats,
    apply_filter,
    canonical_distribution,
    coherent_state,
    compute_mu,
    phase_stats,
)
from optphase.polyroot import RealPolynomial, real_roots_in
from optphase.optimal_state import OptimalStateSolution, optimal_state, state_recursion_polys
from optphase.filter_design import (
    FilterProblem,
    FilterSolution,
    constraint_polynomial,
    filter_recursion_polys,
    optimal_filter,
    solve_for_threshold,
    stationarity_residual,
)

__version__ = "0.1.0"

__all__ = [
    "DegenerateFilterError",
    "Filter",
    "FilterProblem",
    "FilterSolution",
    "FockVector",
    "InfeasibleProbabilityError",
    "InvalidArgumentError",
    "NumericalFailure",
    "OptimalStateSolution",
    "PhaseStats",
    "RealPolynomial",
    "UnsupportedStateError",
    "apply_filter",
    "canonical_distribution",
    "coherent_state",
    "compute_mu",
    "constraint_polynomial",
    "filter_recursion_polys",
    "optimal_filter",
    "optimal_state",
    "phase_stats",
    "real_roots_in",
    "solve_for_threshold",
    "state_recursion_polys",
    "stationarity_residual",
]
