import math

import numpy as np
import pytest

from optphase.errors import InfeasibleProbabilityError, InvalidArgumentError, UnsupportedStateError
from optphase.filter_design import (
    FilterProblem,
    constraint_polynomial,
    filter_recursion_polys,
    optimal_filter,
    solve_for_threshold,
    stationarity_residual,
)
from optphase.fock_core import Filter, FockVector, apply_filter, coherent_state, compute_mu
from optphase.polyroot import real_roots_in


def problem(alpha, prob, **kw):
    return FilterProblem(coherent_state(alpha, **kw), prob)


class TestProblem:
    def test_probability_range(self):
        with pytest.raises(InvalidArgumentError):
            problem(0.5, 0.0)
        with pytest.raises(InvalidArgumentError):
            problem(0.5, 1.5)

    def test_single_level_state_rejected(self):
        with pytest.raises(UnsupportedStateError):
            FilterProblem(coherent_state(0.0), 0.5)

    def test_floor_is_tail_from_threshold(self):
        pr = problem(1.0, 0.5)
        assert pr.feasibility_floor(1) == pytest.approx(1 - pr.x[0])
        assert pr.feasibility_floor(3) == pytest.approx(pr.x[3:].sum())


class TestRecursion:
    def test_degrees(self):
        polys = filter_recursion_polys(problem(1.0, 0.5), 5)
        assert [p.degree for p in polys] == [0, 1, 2, 3, 4, 5]

    def test_first_polynomial_is_linear(self):
        pr = problem(0.8, 0.5)
        p1 = filter_recursion_polys(pr, 1)[1]
        assert p1.coeffs == pytest.approx((0.0, pr.x[0] / pr.a[0]))

    def test_solutions_satisfy_lagrange_conditions(self):
        pr = problem(1.2, 0.4)
        for n in range(1, 6):
            for sol in solve_for_threshold(pr, n):
                f = np.concatenate([sol.transmissions, np.ones(pr.dim - n)])
                res = stationarity_residual(pr, np.clip(sol.transmissions, 1e-300, None), sol.lam)
                if np.all((sol.transmissions > 0) & (sol.transmissions < 1)):
                    assert res < 1e-10
                assert np.sum(pr.x * f * f) == pytest.approx(0.4, abs=1e-12)


class TestConstraintPolynomial:
    @pytest.mark.parametrize("threshold", [1, 2, 3, 4])
    def test_roots_match_secular_roots(self, threshold):
        pr = problem(1.0, 0.5)
        expect = sorted(s.lam for s in solve_for_threshold(pr, threshold))
        got = real_roots_in(constraint_polynomial(pr, threshold), -50.0, 50.0)
        assert len(got) == len(expect)
        np.testing.assert_allclose(got, expect, atol=1e-9)

    def test_vanishes_at_optimum(self):
        pr = problem(0.5, 0.7)
        sol = optimal_filter(pr)
        g = constraint_polynomial(pr, sol.threshold)
        scale = max(abs(c) for c in g.coeffs)
        assert abs(g(sol.lam)) < 1e-10 * scale

    def test_unweighted_form_does_not_meet_target(self):
        # dropping the x_n weights gives multipliers that miss the probability
        pr = problem(1.0, 0.5)
        for n in (2, 3):
            for lam in real_roots_in(constraint_polynomial(pr, n, weighted=False), -50.0, 50.0):
                p = [q(lam) for q in filter_recursion_polys(pr, n)]
                f = np.concatenate([np.array(p[:-1]) / p[-1], np.ones(pr.dim - n)])
                assert abs(np.sum(pr.x * f * f) - 0.5) > 1e-3


class TestOptimalFilter:
    def test_unit_probability_is_identity(self):
        for alpha in (0.3, 1.0, 2.0):
            pr = problem(alpha, 1.0)
            sol = optimal_filter(pr)
            assert sol.mu_out == compute_mu(pr.state)
            assert np.all(sol.filter.f == 1.0)
            out, _ = apply_filter(pr.state, sol.filter)
            assert out is pr.state

    def test_mild_filtering_beats_baseline(self):
        pr = problem(0.5, 0.99)
        sol = optimal_filter(pr)
        assert sol.threshold == 1
        assert sol.mu_out > compute_mu(pr.state) + 1e-3

    def test_single_threshold_closed_form(self):
        pr = problem(0.5, 0.9)
        f0 = math.sqrt((0.9 - pr.x[1:].sum()) / pr.x[0])
        sol = optimal_filter(pr)
        assert sol.filter.f[0] == pytest.approx(f0, abs=1e-12)

    def test_output_state_mu_matches(self):
        pr = problem(1.0, 0.3)
        sol = optimal_filter(pr)
        out, prob = apply_filter(pr.state, sol.filter)
        assert prob == pytest.approx(0.3, abs=1e-12)
        assert compute_mu(out) == pytest.approx(sol.mu_out, abs=1e-12)

    def test_global_flag_and_physical(self):
        sol = optimal_filter(problem(1.0, 0.3))
        assert sol.global_opt and sol.physical
        assert np.all((sol.filter.f >= 0) & (sol.filter.f <= 1))

    def test_envelope_dominates_each_threshold(self):
        pr = problem(1.0, 0.2)
        best = optimal_filter(pr)
        for n in range(1, 10):
            for s in solve_for_threshold(pr, n):
                if s.physical:
                    assert s.mu_out <= best.mu_out + 1e-10

    def test_larger_threshold_can_be_dominated(self):
        pr = problem(0.5, 0.9)
        best = optimal_filter(pr)
        phys = [s for s in solve_for_threshold(pr, 4) if s.physical]
        assert all(s.mu_out < best.mu_out for s in phys)

    @pytest.mark.parametrize("dim", [3, 5, 8])
    def test_bounded_by_optimal_state(self, dim):
        # no filtered state on dim levels can beat cos(pi / (dim + 1))
        pr = FilterProblem(coherent_state(1.5, dim=dim), 0.5)
        sol = optimal_filter(pr)
        assert sol.mu_out <= math.cos(math.pi / (dim + 1)) + 1e-12

    def test_monotone_in_probability(self):
        pr = problem(1.0, 1.0)
        mus = [optimal_filter(pr.with_prob(p)).mu_out for p in np.linspace(1.0, 0.05, 25)]
        assert np.all(np.diff(mus) >= -1e-9)

    def test_infeasible_reports_floor(self):
        pr = problem(0.5, 1e-9)
        with pytest.raises(InfeasibleProbabilityError) as info:
            optimal_filter(pr, n_max=2)
        assert info.value.floor == pytest.approx(pr.feasibility_floor(2))

    def test_below_floor_gives_no_roots(self):
        pr = problem(1.0, 1.0)
        floor = pr.feasibility_floor(3)
        assert solve_for_threshold(pr.with_prob(floor * 0.999), 3) == []
        assert solve_for_threshold(pr.with_prob(floor * 1.001), 3)

    def test_floor_counts_level_at_threshold(self):
        # only levels at or above N are pinned, so sum_{n >= N} x_n is the true floor
        pr = problem(1.0, 1.0)
        n = 2
        between = 0.5 * (pr.x[n:].sum() + pr.x[n + 1:].sum())
        assert solve_for_threshold(pr.with_prob(between), n) == []

    def test_escalation_beyond_n_max(self):
        # the best threshold with N <= 3 is N = 3 itself, so the sweep doubles
        pr = problem(1.5, 0.5)
        sol = optimal_filter(pr, n_max=3)
        assert sol.threshold == 5
        assert sol.mu_out == optimal_filter(pr, n_max=30).mu_out

    def test_zero_amplitude_below_threshold(self):
        state = FockVector.from_amplitudes([1.0, 0.0, 1.0, 1.0])
        with pytest.raises(UnsupportedStateError):
            solve_for_threshold(FilterProblem(state, 0.5), 2)

    def test_bad_threshold(self):
        with pytest.raises(InvalidArgumentError):
            solve_for_threshold(problem(1.0, 0.5), 0)


class TestStationarityResidual:
    def test_zero_for_solution(self):
        pr = problem(0.7, 0.6)
        sol = optimal_filter(pr)
        assert stationarity_residual(pr, sol.filter, sol.lam) < 1e-12

    def test_detects_perturbation(self):
        pr = problem(0.7, 0.2)
        sol = optimal_filter(pr)
        f = sol.filter.f.copy()
        f[0] *= 0.9
        assert stationarity_residual(pr, Filter(f), sol.lam) > 1e-4


def kkt_violation(pr, sol):
    """Worst KKT violation: interior stationarity plus sign of the box multipliers."""
    f = sol.filter.padded(pr.dim)
    g = np.zeros(pr.dim)
    g[:-1] += pr.a * f[1:]
    g[1:] += pr.a * f[:-1]
    r = g - sol.lam * pr.x * f
    pinned = f >= 1.0
    interior = np.abs(r[~pinned]).max(initial=0.0)
    # raising a pinned entry is blocked, so its multiplier must be >= 0
    wrong_sign = max(0.0, -r[pinned].min(initial=0.0))
    return max(interior, wrong_sign)


class TestPinnedLowLevels:
    # at large amplitude the best filter leaves the lowest levels untouched
    cell_prob = float(np.linspace(0.05, 1.0, 40)[38])

    def test_threshold_form_alone_has_no_physical_root(self):
        pr = problem(3.0, self.cell_prob)
        phys = [s for n in range(1, 31) for s in solve_for_threshold(pr, n) if s.physical]
        assert phys == []

    def test_block_solution_found(self):
        pr = problem(3.0, self.cell_prob)
        sol = optimal_filter(pr)
        assert sol.lower > 0
        assert np.all(sol.filter.f[: sol.lower] == 1.0)
        assert sol.achieved_prob == pytest.approx(self.cell_prob, abs=1e-12)
        assert kkt_violation(pr, sol) < 1e-12

    @pytest.mark.parametrize("alpha", [0.5, 1.0, 2.0, 2.5, 3.0])
    @pytest.mark.parametrize("prob", [0.95, 0.7, 0.4, 0.1])
    def test_kkt_certificate(self, alpha, prob):
        pr = problem(alpha, prob)
        assert kkt_violation(pr, optimal_filter(pr)) < 1e-12

    @pytest.mark.parametrize("alpha", [2.0, 3.0])
    def test_monotone_at_large_amplitude(self, alpha):
        base = problem(alpha, 1.0)
        mus = [optimal_filter(base.with_prob(p)).mu_out for p in np.linspace(0.99, 0.1, 12)]
        assert np.all(np.diff(mus) >= -1e-9)

    def test_beats_threshold_form(self):
        pr = problem(3.0, 0.7)
        plain = max(s.mu_out for n in range(1, 31) for s in solve_for_threshold(pr, n) if s.physical)
        assert optimal_filter(pr).mu_out > plain + 1e-2
