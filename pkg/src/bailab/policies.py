"""Sampling, stopping and decision rules.

A policy is an immutable blueprint. Each episode owns a :class:`HistoryState`
and asks the policy for the next arm, whether to stop, and which arm to
recommend. Every tie is broken toward the lowest index.
"""

import math
from dataclasses import dataclass

import numpy as np

from .arms import ArmFamily, BanditInstance, check_weights
from .complexity import FC, _Costs, solve
from .errors import StoppingTimeout, UsageError

POLICY_NAMES = ("uniform", "fixed_weight", "sigma_proportional", "track_and_stop")
# Empirical Bernoulli means are clipped into this band before solving for weights.
BERNOULLI_CLIP = 1e-6


@dataclass
class HistoryState:
    t: int
    counts: np.ndarray
    sums: np.ndarray

    @classmethod
    def empty(cls, k):
        return cls(0, np.zeros(k, dtype=np.int64), np.zeros(k, dtype=float))

    @property
    def k(self):
        return self.counts.size

    def update(self, arm, obs):
        self.t += 1
        self.counts[arm] += 1
        self.sums[arm] += obs

    def empirical_means(self):
        """Sample means; unsampled arms get -inf."""
        out = np.full(self.k, -np.inf)
        seen = self.counts > 0
        out[seen] = self.sums[seen] / self.counts[seen]
        return out


def _argmax_first(values):
    return int(np.argmax(values))


def tracking_arm(t, weights, counts):
    """argmax_i ((t + 1) w_i - N_i), lowest index on ties."""
    return _argmax_first((t + 1) * weights - counts)


class Policy:
    name = "policy"
    non_adaptive = False

    def next_arm(self, state: HistoryState) -> int:
        raise NotImplementedError

    def should_stop(self, state: HistoryState, delta: float) -> bool:
        raise UsageError(f"policy {self.name!r} has no stopping rule")

    def recommend(self, state: HistoryState) -> int:
        return _argmax_first(state.empirical_means())

    def allocation(self, n, k):
        """Pull counts after ``n`` steps; only defined for non-adaptive rules."""
        raise UsageError(f"policy {self.name!r} is adaptive")


class UniformPolicy(Policy):
    name = "uniform"
    non_adaptive = True

    def next_arm(self, state):
        return state.t % state.k

    def allocation(self, n, k):
        counts = np.full(k, n // k, dtype=np.int64)
        counts[: n % k] += 1
        return counts


class FixedWeightPolicy(Policy):
    name = "fixed_weight"
    non_adaptive = True

    def __init__(self, weights):
        self.weights = check_weights(weights)
        self._alloc = {}

    def next_arm(self, state):
        if state.k != self.weights.size:
            raise UsageError(f"policy built for k={self.weights.size}, history has k={state.k}")
        return tracking_arm(state.t, self.weights, state.counts)

    def allocation(self, n, k):
        if k != self.weights.size:
            raise UsageError(f"policy built for k={self.weights.size}, got k={k}")
        if n not in self._alloc:
            counts = np.zeros(k, dtype=np.int64)
            for t in range(n):
                counts[tracking_arm(t, self.weights, counts)] += 1
            self._alloc[n] = counts
        return self._alloc[n].copy()

    def __repr__(self):
        return f"FixedWeightPolicy({self.weights.tolist()})"


def uniform_policy():
    return UniformPolicy()


def fixed_weight_policy(weights):
    return FixedWeightPolicy(weights)


def sigma_proportional_policy(variances):
    """Fixed weights proportional to the two arms' standard deviations."""
    v = np.asarray(variances, dtype=float)
    if v.shape != (2,):
        raise UsageError(f"sigma-proportional sampling needs exactly two variances, got {v.shape}")
    if np.any(~(v > 0)):
        raise UsageError("variances must be positive")
    s = np.sqrt(v)
    policy = FixedWeightPolicy(s / s.sum())
    policy.name = "sigma_proportional"
    return policy


def threshold(t, delta):
    """Stopping threshold ln((1 + ln(t + 1)) / delta)."""
    return math.log((1.0 + math.log(t + 1.0)) / delta)


class TrackAndStopPolicy(Policy):
    """D-tracking of the plug-in optimal weights plus a GLR stopping rule.

    Knows the family (and Gaussian variances) but not the means.
    """

    name = "track_and_stop"

    def __init__(self, family, delta, variances=None, t_max=10_000_000, tol=1e-6):
        if not 0.0 < delta < 1.0:
            raise UsageError(f"delta must lie in (0, 1), got {delta!r}")
        self.family = family
        self.delta = float(delta)
        self.variances = None if variances is None else np.asarray(variances, dtype=float)
        if family is ArmFamily.GAUSSIAN and self.variances is None:
            raise UsageError("Gaussian track-and-stop needs the known variances")
        self.t_max = int(t_max)
        self.tol = tol

    def _unique_leader(self, means):
        b = _argmax_first(means)
        others = np.delete(means, b)
        if np.any(others >= means[b]):
            return None
        return b

    def target_weights(self, means):
        """Plug-in optimal allocation; uniform when the leader is not unique."""
        k = means.size
        if self.family is ArmFamily.BERNOULLI:
            means = np.clip(means, BERNOULLI_CLIP, 1.0 - BERNOULLI_CLIP)
        b = self._unique_leader(means)
        if b is None:
            return np.full(k, 1.0 / k)
        costs = _Costs(self.family, means, self.variances, FC)
        w, _ = solve(costs, b, tol=self.tol)
        return w

    def next_arm(self, state):
        counts = state.counts
        k = state.k
        unseen = np.nonzero(counts == 0)[0]
        if unseen.size:
            return int(unseen[0])
        starving = counts < math.sqrt(state.t) - k / 2.0
        if np.any(starving):
            return _argmax_first(np.where(starving, -counts, np.iinfo(np.int64).min))
        w = self.target_weights(state.empirical_means())
        return tracking_arm(state.t, w, counts)

    def glr(self, state):
        """min over challengers of the empirical transport cost with raw counts."""
        if np.any(state.counts == 0):
            return 0.0
        means = state.empirical_means()
        b = self._unique_leader(means)
        if b is None:
            return 0.0
        costs = _Costs(self.family, means, self.variances, FC)
        n = state.counts.astype(float)
        return min(costs.pair_cost(b, j, n[b], n[j])[0] for j in range(state.k) if j != b)

    def should_stop(self, state, delta=None):
        delta = self.delta if delta is None else delta
        if np.all(state.counts > 0) and self.glr(state) > threshold(state.t, delta):
            return True
        if state.t >= self.t_max:
            raise StoppingTimeout(state.t)
        return False

    def __repr__(self):
        return f"TrackAndStopPolicy({self.family.value}, delta={self.delta})"


def track_and_stop_policy(delta, family, variances=None, t_max=10_000_000, tol=1e-6):
    return TrackAndStopPolicy(family, delta, variances=variances, t_max=t_max, tol=tol)


def make_policy(name, instance: BanditInstance, weights=None, delta=None, t_max=None):
    """Build a policy from its config identifier."""
    if name == "uniform":
        return uniform_policy()
    if name == "fixed_weight":
        if weights is None:
            raise UsageError("fixed_weight policy needs 'weights'")
        return fixed_weight_policy(check_weights(weights, instance.k))
    if name == "sigma_proportional":
        if instance.family is not ArmFamily.GAUSSIAN:
            raise UsageError("sigma_proportional needs a Gaussian instance")
        return sigma_proportional_policy(instance.variances)
    if name == "track_and_stop":
        if delta is None:
            raise UsageError("track_and_stop policy needs 'delta'")
        kw = {} if t_max is None else {"t_max": t_max}
        return track_and_stop_policy(delta, instance.family, instance.variances, **kw)
    raise UsageError(f"unknown policy {name!r}; expected one of {', '.join(POLICY_NAMES)}")
