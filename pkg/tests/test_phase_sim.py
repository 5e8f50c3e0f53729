import math

import numpy as np
import pytest
from scipy import stats

from optphase.errors import InvalidArgumentError
from optphase.fock_core import FockVector, coherent_state, compute_mu
from optphase.phase_sim import CHUNK, SampleBatch, cdf_table, estimate_mu, sample_canonical


def test_vacuum_is_uniform():
    batch = sample_canonical(coherent_state(0.0), 20_000, seed=1)
    assert stats.kstest(batch.thetas / (2 * math.pi), "uniform").pvalue > 1e-3


def test_two_level_cosine_moment():
    # (|0> + |1>)/sqrt2 has density (1 + cos theta) / 2 pi, so <cos> = 1/2
    state = FockVector.from_amplitudes([1.0, 1.0])
    batch = sample_canonical(state, 400_000, seed=2)
    mu, se = estimate_mu(batch)
    assert abs(np.cos(batch.thetas).mean() - 0.5) < 5 * se
    assert abs(mu - 0.5) < 5 * se


def test_cdf_matches_numerical_integral():
    state = coherent_state(1.3)
    grid, cdf = cdf_table(state, bits=12)
    n = np.arange(state.trunc_dim)
    dens = np.abs(np.exp(1j * np.outer(grid, n)) @ state.coeffs) ** 2 / (2 * math.pi)
    steps = 0.5 * (dens[1:] + dens[:-1]) * np.diff(grid)
    integral = np.concatenate([[0.0], np.cumsum(steps)])
    np.testing.assert_allclose(cdf, integral, atol=1e-6)
    assert cdf[0] == 0.0 and cdf[-1] == 1.0
    assert np.all(np.diff(cdf) >= 0)


def test_deterministic_for_seed():
    s = coherent_state(0.5)
    a = sample_canonical(s, 1000, seed=9)
    b = sample_canonical(s, 1000, seed=9)
    np.testing.assert_array_equal(a.thetas, b.thetas)
    assert a.state_id == b.state_id and a.rng == "numpy.random.PCG64"
    assert not np.array_equal(a.thetas, sample_canonical(s, 1000, seed=10).thetas)


def test_worker_count_does_not_change_samples():
    s = coherent_state(0.9)
    n = 3 * CHUNK + 17
    a = sample_canonical(s, n, seed=4, workers=1)
    b = sample_canonical(s, n, seed=4, workers=3)
    np.testing.assert_array_equal(a.thetas, b.thetas)


def test_prefix_stable_across_counts():
    s = coherent_state(0.9)
    a = sample_canonical(s, CHUNK, seed=4)
    b = sample_canonical(s, 2 * CHUNK, seed=4)
    np.testing.assert_array_equal(a.thetas, b.thetas[:CHUNK])


def test_range():
    t = sample_canonical(coherent_state(2.0), 50_000, seed=5).thetas
    assert t.min() >= 0.0 and t.max() < 2 * math.pi


def test_table_resolution_bias_small():
    s = coherent_state(2.0)
    fine = estimate_mu(sample_canonical(s, 1_000_000, seed=6, table_bits=17))[0]
    coarse = estimate_mu(sample_canonical(s, 1_000_000, seed=6, table_bits=16))[0]
    assert abs(fine - coarse) < 1e-5


def test_mu_estimate_near_prediction():
    s = coherent_state(1.0)
    mu, se = estimate_mu(sample_canonical(s, 500_000, seed=11))
    assert abs(mu - compute_mu(s)) < 5 * se


class TestEstimator:
    def test_point_mass(self):
        mu, se = estimate_mu(np.zeros(10))
        assert mu == 1.0 and se == 0.0

    def test_antipodal(self):
        mu, _ = estimate_mu(np.array([0.0, math.pi]))
        assert mu == pytest.approx(0.0, abs=1e-15)

    def test_batch_and_array_agree(self):
        b = sample_canonical(coherent_state(0.5), 100, seed=1)
        assert estimate_mu(b) == estimate_mu(np.asarray(b.thetas))
        assert isinstance(b, SampleBatch) and len(b) == 100

    def test_empty_rejected(self):
        with pytest.raises(InvalidArgumentError):
            estimate_mu(np.array([]))

    def test_bad_count(self):
        with pytest.raises(InvalidArgumentError):
            sample_canonical(coherent_state(0.5), 0, seed=1)
