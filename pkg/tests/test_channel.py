import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pcmlab import ChannelParams, recurrence_stats, sample_chain, stationary_probability
from pcmlab.channel import sample_chain_batch

probs = st.floats(min_value=0.01, max_value=0.99)


class TestParams:
    @pytest.mark.parametrize("alpha,beta", [(0.0, 0.5), (1.0, 0.5), (0.5, 0.0), (0.5, 1.0), (-0.1, 0.5), (0.5, 1.2)])
    def test_boundary_and_outside_rejected(self, alpha, beta):
        with pytest.raises(ValueError):
            ChannelParams(alpha, beta)

    @pytest.mark.parametrize(
        "alpha,beta,expected",
        [(0.95, 0.05, 0.95), (0.80, 0.30, 0.77778), (0.08, 0.92, 0.08)],
    )
    def test_stationary_probability_reference_values(self, alpha, beta, expected):
        assert stationary_probability(ChannelParams(alpha, beta)) == pytest.approx(expected, abs=5e-6)

    @settings(max_examples=100, deadline=None)
    @given(alpha=probs, beta=probs)
    def test_stationary_vector_is_transition_fixed_point(self, alpha, beta):
        params = ChannelParams(alpha, beta)
        pi1 = stationary_probability(params)
        vec = np.array([pi1, 1.0 - pi1])
        out = params.transition_matrix() @ vec
        np.testing.assert_allclose(out, vec, atol=1e-14)


class TestSampleChain:
    def test_deterministic_given_seed(self):
        params = ChannelParams(0.7, 0.4)
        w1 = sample_chain(params, 0.5, 500, seed=77)
        w2 = sample_chain(params, 0.5, 500, seed=77)
        np.testing.assert_array_equal(w1, w2)
        w3 = sample_chain(params, 0.5, 500, seed=78)
        assert np.any(w1 != w3)

    def test_length_and_dtype(self):
        w = sample_chain(ChannelParams(0.5, 0.5), 1.0, 10, seed=1)
        assert w.shape == (11,)
        assert w.dtype == np.uint8
        assert w[0] == 1  # init_p1 = 1 forces the initial state

    def test_near_degenerate_stays_up(self):
        # alpha -> 1, beta -> 0: leaving state 1 is essentially impossible.
        w = sample_chain(ChannelParams(0.999999, 0.000001), 1.0, 10**5, seed=5)
        assert np.count_nonzero(w == 0) < 1

    def test_bernoulli_special_case_uncorrelated(self):
        # alpha = 1 - beta makes successive symbols independent.
        params = ChannelParams(0.7, 0.3)
        w = sample_chain(params, 0.7, 10**5, seed=6).astype(float)
        x, y = w[:-1] - w.mean(), w[1:] - w.mean()
        rho = np.mean(x * y) / np.var(w)
        assert abs(rho) <= 4.0 / np.sqrt(w.size)

    def test_law_of_large_numbers_at_stationarity(self):
        params = ChannelParams(0.95, 0.05)
        w = sample_chain(params, stationary_probability(params), 10**5, seed=7)
        assert np.mean(w) == pytest.approx(0.95, abs=0.01)

    def test_batch_matches_single_streams(self):
        params = ChannelParams(0.8, 0.3)
        batch = sample_chain_batch(params, 0.7, 200, seed=42, n_chains=5)
        for i in range(5):
            np.testing.assert_array_equal(
                batch[i], sample_chain(params, 0.7, 200, seed=42, stream=i)
            )

    def test_transition_frequencies_match_parameters(self):
        params = ChannelParams(0.80, 0.30)
        w = sample_chain(params, 0.7, 2 * 10**5, seed=8).astype(int)
        p11 = np.mean(w[1:][w[:-1] == 1])
        p00 = 1.0 - np.mean(w[1:][w[:-1] == 0])
        assert p11 == pytest.approx(0.80, abs=0.01)
        assert p00 == pytest.approx(0.30, abs=0.01)


class TestRecurrence:
    def test_constant_word(self):
        stats = recurrence_stats(np.ones(100, dtype=int), 1)
        assert stats.mean_recurrence == 1.0
        assert stats.visit_fraction == 1.0

    def test_alternating_word(self):
        word = np.tile([1, 0], 50)
        stats = recurrence_stats(word, 1)
        assert stats.mean_recurrence == 2.0
        assert stats.visit_fraction == 0.5

    def test_recurrence_reciprocal_identity(self):
        # visit fraction times mean recurrence tends to one.
        params = ChannelParams(0.95, 0.05)
        w = sample_chain(params, 0.95, 10**5, seed=9)
        for state in (0, 1):
            stats = recurrence_stats(w, state)
            assert stats.visit_fraction * stats.mean_recurrence == pytest.approx(1.0, abs=0.02)

    def test_mean_recurrence_reference(self):
        params = ChannelParams(0.95, 0.05)
        w = sample_chain(params, 0.95, 10**5, seed=10)
        stats = recurrence_stats(w, 1)
        assert stats.mean_recurrence == pytest.approx(1.0 / 0.95, rel=0.02)

    def test_insufficient_data_rejected(self):
        with pytest.raises(ValueError, match="fewer than twice"):
            recurrence_stats([1, 0, 0, 0], 1)
        with pytest.raises(ValueError, match="fewer than twice"):
            recurrence_stats([0, 0, 0], 1)

    def test_cycle_dispersion(self):
        # alternating word: every compensated cycle statistic is exactly 0
        stats = recurrence_stats(np.tile([1, 0], 50), 1)
        assert stats.sigma_hat == 0.0
        # irregular word has genuinely dispersed cycle lengths
        w = sample_chain(ChannelParams(0.7, 0.6), 0.5, 5000, seed=14)
        assert recurrence_stats(w, 1).sigma_hat > 0.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(min_value=0, max_value=1), min_size=5, max_size=60))
    def test_visit_fraction_definition(self, bits):
        word = np.array(bits)
        for state in (0, 1):
            if np.count_nonzero(word == state) < 2:
                continue
            stats = recurrence_stats(word, state)
            assert stats.visit_fraction == pytest.approx(np.mean(word == state))
            assert stats.mean_recurrence >= 1.0
