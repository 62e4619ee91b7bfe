import math

import numpy as np
import pytest

from bailab.arms import ArmFamily, BanditInstance
from bailab.errors import StoppingTimeout, UsageError
from bailab.policies import (
    HistoryState,
    fixed_weight_policy,
    make_policy,
    sigma_proportional_policy,
    threshold,
    track_and_stop_policy,
    uniform_policy,
)


def trace(policy, k, n):
    state = HistoryState.empty(k)
    arms = []
    for _ in range(n):
        i = policy.next_arm(state)
        arms.append(i)
        state.update(i, 0.0)
    return arms, state


def state_with_means(means, counts):
    counts = np.asarray(counts, dtype=np.int64)
    return HistoryState(int(counts.sum()), counts, np.asarray(means, dtype=float) * counts)


class TestUniform:
    def test_round_robin(self):
        arms, _ = trace(uniform_policy(), 3, 6)
        assert arms == [0, 1, 2, 0, 1, 2]

    def test_recommend(self):
        assert uniform_policy().recommend(state_with_means([0.2, 0.9], [5, 5])) == 1

    def test_recommend_tie(self):
        assert uniform_policy().recommend(state_with_means([0.5, 0.5], [5, 5])) == 0

    def test_unsampled_arm_is_minus_infinity(self):
        s = HistoryState(1, np.array([0, 1]), np.array([0.0, -3.0]))
        assert uniform_policy().recommend(s) == 1

    @pytest.mark.parametrize("k,m", [(2, 7), (3, 4), (5, 10)])
    def test_counts_after_full_rounds(self, k, m):
        _, state = trace(uniform_policy(), k, m * k)
        np.testing.assert_array_equal(state.counts, np.full(k, m))

    @pytest.mark.parametrize("n", [0, 1, 5, 13])
    def test_allocation_matches_trace(self, n):
        _, state = trace(uniform_policy(), 3, n)
        np.testing.assert_array_equal(uniform_policy().allocation(n, 3), state.counts)

    def test_no_stopping_rule(self):
        with pytest.raises(UsageError):
            uniform_policy().should_stop(HistoryState.empty(2), 0.1)


class TestFixedWeight:
    def test_quarter_trace(self):
        arms, _ = trace(fixed_weight_policy([0.25, 0.75]), 2, 4)
        assert arms == [1, 0, 1, 1]

    def test_degenerate(self):
        arms, _ = trace(fixed_weight_policy([1.0, 0.0]), 2, 20)
        assert arms == [0] * 20

    def test_alternation(self):
        arms, _ = trace(fixed_weight_policy([0.5, 0.5]), 2, 10)
        assert arms == [0, 1] * 5

    def test_tracking_accuracy(self):
        rng = np.random.default_rng(0)
        for trial in range(100):
            k = 2 + trial % 3
            w = rng.dirichlet(np.ones(k))
            policy = fixed_weight_policy(w)
            state = HistoryState.empty(k)
            for n in range(1, 1001):
                state.update(policy.next_arm(state), 0.0)
                assert np.max(np.abs(state.counts - n * w)) <= k

    def test_allocation_matches_trace(self):
        policy = fixed_weight_policy([0.2, 0.3, 0.5])
        _, state = trace(policy, 3, 137)
        np.testing.assert_array_equal(policy.allocation(137, 3), state.counts)

    def test_wrong_k(self):
        with pytest.raises(UsageError):
            fixed_weight_policy([0.5, 0.5]).next_arm(HistoryState.empty(3))

    def test_deterministic(self):
        s = state_with_means([0.1, 0.3, 0.2], [3, 4, 2])
        p = fixed_weight_policy([0.2, 0.5, 0.3])
        assert len({p.next_arm(s) for _ in range(5)}) == 1


class TestSigmaProportional:
    @pytest.mark.parametrize("variances,w", [
        ((1.0, 1.0), (0.5, 0.5)),
        ((1.0, 9.0), (0.25, 0.75)),
        ((9.0, 1.0), (0.75, 0.25)),
    ])
    def test_weights(self, variances, w):
        np.testing.assert_allclose(sigma_proportional_policy(variances).weights, w, atol=1e-15)

    def test_needs_two_arms(self):
        with pytest.raises(UsageError):
            sigma_proportional_policy([1.0, 1.0, 1.0])


class TestRecommendShift:
    def test_shift_does_not_change_recommendation(self):
        rng = np.random.default_rng(2)
        policy = uniform_policy()
        for _ in range(50):
            counts = rng.integers(1, 20, size=4)
            sums = rng.normal(size=4) * counts
            s = HistoryState(int(counts.sum()), counts, sums)
            c = rng.uniform(-5, 5)
            shifted = HistoryState(s.t, counts, sums + c * counts)
            assert policy.recommend(s) == policy.recommend(shifted)


class TestTrackAndStop:
    def policy(self, **kw):
        return track_and_stop_policy(0.1, ArmFamily.GAUSSIAN, [1.0, 1.0], **kw)

    def test_initialization(self):
        p = self.policy()
        state = HistoryState.empty(2)
        assert not p.should_stop(state, 0.1)
        assert p.next_arm(state) == 0
        state.update(0, 100.0)
        assert not p.should_stop(state, 0.1)
        assert p.next_arm(state) == 1

    @pytest.mark.parametrize("n", [2, 10, 100])
    def test_glr_two_arm_gaussian(self, n):
        state = state_with_means([1.0, 0.0], [n // 2, n // 2])
        assert self.policy().glr(state) == pytest.approx(n * 0.125, rel=1e-14)

    def test_stops_when_glr_exceeds_threshold(self):
        p = self.policy()
        n = 200
        state = state_with_means([1.0, 0.0], [n // 2, n // 2])
        assert p.glr(state) > threshold(n, 0.1)
        assert p.should_stop(state, 0.1)
        close = state_with_means([1.0, 0.9], [n // 2, n // 2])
        assert not p.should_stop(close, 0.1)

    def test_threshold_shape(self):
        assert threshold(0, 0.5) == pytest.approx(math.log(2.0))
        assert threshold(99, 0.1) == pytest.approx(math.log((1 + math.log(100)) / 0.1))

    def test_forced_exploration(self):
        p = track_and_stop_policy(0.1, ArmFamily.GAUSSIAN, [1.0, 1.0, 1.0])
        # sqrt(100) - 1.5 = 8.5 > 1, so arm 2 is starving
        state = state_with_means([1.0, 0.0, -1.0], [50, 49, 1])
        assert p.next_arm(state) == 2

    def test_tracks_plugin_weights(self):
        p = track_and_stop_policy(0.1, ArmFamily.GAUSSIAN, [1.0, 9.0])
        state = HistoryState.empty(2)
        rng = np.random.default_rng(0)
        means = np.array([1.0, 0.0])
        for _ in range(400):
            i = p.next_arm(state)
            state.update(i, means[i] + rng.normal() * math.sqrt([1.0, 9.0][i]))
        frac = state.counts / state.t
        assert frac[1] > 0.6  # target is 0.75 once the means are learned

    def test_timeout(self):
        p = self.policy(t_max=4)
        state = state_with_means([1.0, 0.99], [2, 2])
        with pytest.raises(StoppingTimeout):
            p.should_stop(state, 0.1)

    def test_bad_delta(self):
        with pytest.raises(UsageError):
            track_and_stop_policy(1.5, ArmFamily.GAUSSIAN, [1.0, 1.0])

    def test_bernoulli_boundary_means(self):
        p = track_and_stop_policy(0.1, ArmFamily.BERNOULLI)
        state = state_with_means([1.0, 0.0], [3, 3])
        assert p.next_arm(state) in (0, 1)
        assert p.glr(state) > 0

    def test_deterministic(self):
        p = track_and_stop_policy(0.1, ArmFamily.GAUSSIAN, [1.0, 1.0, 1.0])
        s = state_with_means([1.0, 0.2, -0.5], [10, 9, 4])
        assert len({p.next_arm(s) for _ in range(3)}) == 1


class TestMakePolicy:
    inst = BanditInstance.gaussian([1.0, 0.0], [1.0, 9.0])

    def test_names(self):
        assert make_policy("uniform", self.inst).name == "uniform"
        assert make_policy("fixed_weight", self.inst, weights=[0.3, 0.7]).name == "fixed_weight"
        assert make_policy("sigma_proportional", self.inst).name == "sigma_proportional"
        assert make_policy("track_and_stop", self.inst, delta=0.1).name == "track_and_stop"

    def test_unknown(self):
        with pytest.raises(UsageError):
            make_policy("successive_rejects", self.inst)

    def test_missing_params(self):
        with pytest.raises(UsageError):
            make_policy("fixed_weight", self.inst)
        with pytest.raises(UsageError):
            make_policy("track_and_stop", self.inst)
