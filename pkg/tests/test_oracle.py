import math

import numpy as np
import pytest

from optphase.errors import InfeasibleProbabilityError, InvalidArgumentError
from optphase.fock_core import FockVector, coherent_state, compute_mu
from optphase.oracle import maximize_mu_constrained, maximize_mu_unconstrained


class TestUnconstrained:
    @pytest.mark.parametrize("n_max", [1, 2, 6])
    def test_path_graph_eigenvalue(self, n_max):
        res = maximize_mu_unconstrained(n_max)
        assert res.converged
        assert res.best_value == pytest.approx(math.cos(math.pi / (n_max + 2)), abs=1e-9)
        assert np.linalg.norm(res.best_vector) == pytest.approx(1.0)

    def test_size_limit(self):
        with pytest.raises(InvalidArgumentError):
            maximize_mu_unconstrained(9)


class TestConstrained:
    def test_two_level_half_probability(self):
        # |0>+|1> balanced: any f with f0^2 + f1^2 = 1 gives mu = f0 f1 <= 1/2
        state = FockVector.from_amplitudes([1.0, 1.0])
        res = maximize_mu_constrained(state, 0.5, 2)
        assert res.best_value == pytest.approx(0.5, abs=1e-10)

    def test_two_level_unbalanced(self):
        # best is to balance the output: mu = 1/2 whenever P <= 2 min(x)
        state = FockVector.from_amplitudes([2.0, 1.0])
        res = maximize_mu_constrained(state, 0.4, 2)
        assert res.best_value == pytest.approx(0.5, abs=1e-10)

    def test_full_probability_is_identity(self):
        state = coherent_state(0.8, dim=5)
        res = maximize_mu_constrained(state, 1.0, 5)
        assert res.best_value == pytest.approx(compute_mu(state), abs=1e-12)
        np.testing.assert_allclose(res.best_vector, 1.0, atol=1e-12)

    def test_constraint_holds(self):
        state = coherent_state(1.0, dim=6)
        res = maximize_mu_constrained(state, 0.4, 6)
        f = res.best_vector
        assert np.sum(state.populations * f * f) == pytest.approx(0.4, abs=1e-12)
        assert np.all((f >= 0) & (f <= 1))
        assert res.converged

    def test_restart_count_stable(self):
        state = coherent_state(0.5, dim=6)
        a = maximize_mu_constrained(state, 0.5, 6, restarts=64)
        b = maximize_mu_constrained(state, 0.5, 6, restarts=128)
        assert a.best_value == pytest.approx(b.best_value, abs=1e-6)

    def test_seeded_reproducible(self):
        state = coherent_state(1.0, dim=5)
        a = maximize_mu_constrained(state, 0.3, 5, seed=3)
        b = maximize_mu_constrained(state, 0.3, 5, seed=3)
        assert a.best_value == b.best_value
        np.testing.assert_array_equal(a.best_vector, b.best_vector)

    @pytest.mark.parametrize("alpha,prob", [(0.5, 0.7), (1.0, 0.3)])
    def test_grid_scan_agrees(self, alpha, prob):
        state = coherent_state(alpha, dim=4)
        res = maximize_mu_constrained(state, prob, 4)
        assert res.provenance["grid_agrees"]
        assert res.provenance["grid_value"] <= res.best_value + 1e-12

    def test_infeasible(self):
        state = coherent_state(1.0, dim=3)
        with pytest.raises(InfeasibleProbabilityError):
            maximize_mu_constrained(state, 1.5, 3)

    def test_size_limit(self):
        with pytest.raises(InvalidArgumentError):
            maximize_mu_constrained(coherent_state(1.0), 0.5, 9)
