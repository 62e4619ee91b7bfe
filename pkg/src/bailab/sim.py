"""Seeded Monte-Carlo runs for fixed-budget and fixed-confidence play.

Replications are independent work units keyed by
:func:`bailab.seeding.derive`, so results do not depend on the number of
workers. Aggregation always folds in (budget, replication) order.
"""

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from scipy import stats

from .arms import ArmFamily, BanditInstance, best_arm, sample, validate
from .complexity import gamma_fc, gamma_na
from .errors import InsufficientDataError, StoppingTimeout, UsageError
from .policies import HistoryState, Policy, fixed_weight_policy, uniform_policy
from .seeding import rng_for

log = logging.getLogger(__name__)

Z95 = float(stats.norm.ppf(0.975))
DEFAULT_WINDOW = (1e-4, 0.3)
CHUNK = 5000


def wilson_interval(errors, replications, z=Z95):
    """Wilson score interval for a binomial proportion."""
    if replications <= 0:
        raise UsageError("replications must be positive")
    if not 0 <= errors <= replications:
        raise UsageError(f"errors={errors} outside [0, {replications}]")
    p = errors / replications
    z2 = z * z
    denom = 1.0 + z2 / replications
    center = (p + z2 / (2.0 * replications)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / replications + z2 / (4.0 * replications ** 2))
    low = 0.0 if errors == 0 else max(0.0, min(p, center - half))
    high = 1.0 if errors == replications else min(1.0, max(p, center + half))
    return low, high


@dataclass
class BudgetRow:
    n: int
    replications: int
    errors: int
    p_hat: float
    ci_low: float
    ci_high: float

    @property
    def neg_log_p(self):
        return -math.log(self.p_hat) if self.errors > 0 else None


@dataclass
class FixedBudgetReport:
    rows: List[BudgetRow]
    policy: str = ""

    @property
    def budgets(self):
        return [r.n for r in self.rows]

    def to_dict(self):
        return {
            "policy": self.policy,
            "rows": [dict(asdict(r), neg_log_p=r.neg_log_p) for r in self.rows],
        }


@dataclass
class RateEstimate:
    slope: float
    intercept: float
    r_squared: float
    slope_stderr: float
    budgets_used: List[int]
    window: Tuple[float, float]

    @property
    def inverse_slope(self):
        """Finite-n estimate of n / ln(1/p)."""
        return 1.0 / self.slope if self.slope > 0 else math.inf

    def to_dict(self):
        d = asdict(self)
        d["window"] = list(self.window)
        d["inverse_slope"] = self.inverse_slope
        return d


@dataclass
class FixedConfidenceReport:
    taus: np.ndarray
    correct: np.ndarray
    timed_out: np.ndarray
    delta: float
    policy: str = ""

    @property
    def replications(self):
        return int(self.taus.size)

    @property
    def mean_tau(self):
        return float(self.taus.mean())

    @property
    def error_rate(self):
        return float(np.count_nonzero(~self.correct) / self.correct.size)

    @property
    def ratio(self):
        return self.mean_tau / math.log(1.0 / self.delta)

    @property
    def timeouts(self):
        return int(self.timed_out.sum())

    def summary(self):
        return {
            "policy": self.policy,
            "delta": self.delta,
            "replications": self.replications,
            "mean_tau": self.mean_tau,
            "error_rate": self.error_rate,
            "ratio": self.ratio,
            "timeouts": self.timeouts,
        }


# -- episodes ----------------------------------------------------------------

def _draw_sums(instance, counts, rng):
    means = instance.means
    if instance.family is ArmFamily.BERNOULLI:
        return rng.binomial(counts, means).astype(float)
    sd = np.sqrt(counts * instance.variances)
    return rng.normal(counts * means, sd)


def fixed_budget_episode(instance, policy, n, rng):
    """Play ``n`` rounds and return the recommended arm.

    Non-adaptive rules know their pull counts up front, so each arm's sum
    is drawn in one shot; adaptive rules pull one sample at a time.
    """
    k = instance.k
    if policy.non_adaptive:
        counts = policy.allocation(n, k)
        state = HistoryState(n, counts, _draw_sums(instance, counts, rng))
    else:
        state = HistoryState.empty(k)
        arms = instance.arms
        for _ in range(n):
            i = policy.next_arm(state)
            state.update(i, sample(arms[i], rng))
    return policy.recommend(state)


def fixed_confidence_episode(instance, policy, delta, rng):
    """Return (tau, recommendation, timed_out)."""
    state = HistoryState.empty(instance.k)
    arms = instance.arms
    timed_out = False
    while True:
        try:
            if policy.should_stop(state, delta):
                break
        except StoppingTimeout:
            timed_out = True
            break
        i = policy.next_arm(state)
        state.update(i, sample(arms[i], rng))
    return state.t, policy.recommend(state), timed_out


def _budget_chunk(args):
    instance, policy, n, start, stop, seed, target = args
    out = np.zeros(stop - start, dtype=bool)
    for r in range(start, stop):
        try:
            out[r - start] = fixed_budget_episode(instance, policy, n, rng_for(seed, n, r)) != target
        except Exception as exc:
            exc.args = (f"{exc} (budget={n}, replication={r})",) + exc.args[1:]
            raise
    return out


def _confidence_chunk(args):
    instance, policy, delta, start, stop, seed, target = args
    taus = np.zeros(stop - start, dtype=np.int64)
    correct = np.zeros(stop - start, dtype=bool)
    timed = np.zeros(stop - start, dtype=bool)
    for r in range(start, stop):
        tau, rec, to = fixed_confidence_episode(instance, policy, delta, rng_for(seed, 0, r))
        taus[r - start], correct[r - start], timed[r - start] = tau, rec == target, to
    return taus, correct, timed


def _map(fn, tasks, workers):
    if workers is None or workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, tasks))


def _chunks(replications, size):
    return [(s, min(s + size, replications)) for s in range(0, replications, size)]


def run_fixed_budget(instance: BanditInstance, policy: Policy, budgets, replications: int,
                     master_seed: int, workers: int = 1, chunk: int = CHUNK) -> FixedBudgetReport:
    validate(instance)
    budgets = [int(n) for n in budgets]
    if not budgets or any(b <= 0 for b in budgets):
        raise UsageError("budgets must be positive")
    if any(b2 <= b1 for b1, b2 in zip(budgets, budgets[1:])):
        raise UsageError("budgets must be strictly increasing")
    if replications < 1:
        raise UsageError("replications must be at least 1")
    target = best_arm(instance)
    tasks = [(instance, policy, n, s, e, master_seed, target)
             for n in budgets for s, e in _chunks(replications, chunk)]
    results = iter(_map(_budget_chunk, tasks, workers))
    rows = []
    for n in budgets:
        errors = 0
        for _ in _chunks(replications, chunk):
            errors += int(next(results).sum())
        lo, hi = wilson_interval(errors, replications)
        rows.append(BudgetRow(n, replications, errors, errors / replications, lo, hi))
        log.debug("budget %d: %d/%d errors", n, errors, replications)
    return FixedBudgetReport(rows, getattr(policy, "name", ""))


def estimate_rate(report: FixedBudgetReport, window=DEFAULT_WINDOW) -> RateEstimate:
    """Least-squares slope of -ln(p_hat) against n inside ``window``."""
    p_min, p_max = window
    used = [r for r in report.rows if r.errors > 0 and p_min <= r.p_hat <= p_max]
    if len(used) < 3:
        raise InsufficientDataError(
            f"need at least 3 budgets with p_hat in [{p_min:g}, {p_max:g}], got {len(used)}")
    n = np.array([r.n for r in used], dtype=float)
    y = np.array([-math.log(r.p_hat) for r in used])
    fit = stats.linregress(n, y)
    stderr = float(fit.stderr) if len(used) > 2 else math.nan
    return RateEstimate(float(fit.slope), float(fit.intercept), float(fit.rvalue ** 2),
                        stderr, [r.n for r in used], (float(p_min), float(p_max)))


def run_fixed_confidence(instance: BanditInstance, policy: Policy, delta: float,
                         replications: int, master_seed: int, workers: int = 1,
                         chunk: int = 50) -> FixedConfidenceReport:
    validate(instance)
    if not 0.0 < delta < 1.0:
        raise UsageError(f"delta must lie in (0, 1), got {delta!r}")
    if replications < 1:
        raise UsageError("replications must be at least 1")
    target = best_arm(instance)
    tasks = [(instance, policy, delta, s, e, master_seed, target)
             for s, e in _chunks(replications, chunk)]
    parts = _map(_confidence_chunk, tasks, workers)
    taus = np.concatenate([p[0] for p in parts])
    correct = np.concatenate([p[1] for p in parts])
    timed = np.concatenate([p[2] for p in parts])
    return FixedConfidenceReport(taus, correct, timed, float(delta), getattr(policy, "name", ""))


@dataclass
class DominanceReport:
    candidate: FixedBudgetReport
    uniform: FixedBudgetReport
    rate_candidate: RateEstimate
    rate_uniform: RateEstimate
    gamma_fc: float
    gamma_na: float

    @property
    def rate_difference(self):
        return self.rate_candidate.slope - self.rate_uniform.slope

    @property
    def combined_stderr(self):
        return math.hypot(self.rate_candidate.slope_stderr, self.rate_uniform.slope_stderr)

    @property
    def no_worse(self):
        """Candidate rate within two combined standard errors of uniform, or better."""
        return self.rate_difference >= -2.0 * self.combined_stderr

    def to_dict(self):
        return {
            "policy": self.candidate.policy,
            "gamma_fc": self.gamma_fc,
            "gamma_na": self.gamma_na,
            "inverse_gamma_fc": 1.0 / self.gamma_fc,
            "inverse_gamma_na": 1.0 / self.gamma_na,
            "rate_candidate": self.rate_candidate.to_dict(),
            "rate_uniform": self.rate_uniform.to_dict(),
            "rate_difference": self.rate_difference,
            "combined_stderr": self.combined_stderr,
            "no_worse_than_uniform": self.no_worse,
            "candidate_report": self.candidate.to_dict(),
            "uniform_report": self.uniform.to_dict(),
        }


def probe_uniform_dominance(instance, policy, budgets, replications, master_seed,
                            window=DEFAULT_WINDOW, workers=1, tol=1e-8) -> DominanceReport:
    """Compare a candidate's decay rate with uniform sampling on shared seeds."""
    fc = gamma_fc(instance, tol).gamma
    na = gamma_na(instance, tol).gamma
    cand = run_fixed_budget(instance, policy, budgets, replications, master_seed, workers)
    unif = run_fixed_budget(instance, uniform_policy(), budgets, replications, master_seed, workers)
    return DominanceReport(cand, unif, estimate_rate(cand, window), estimate_rate(unif, window),
                           fc, na)


CONJECTURE_LABEL = "empirical evidence, not a resolution"


@dataclass
class ConjectureRow:
    policy: str
    weights: List[float]
    rate: RateEstimate
    report: FixedBudgetReport

    def to_dict(self, gamma_fc, gamma_na):
        inv = self.rate.inverse_slope
        return {
            "policy": self.policy,
            "weights": self.weights,
            "rate": self.rate.to_dict(),
            "inverse_slope": inv,
            "relative_gap_fc": inv / gamma_fc - 1.0,
            "relative_gap_na": inv / gamma_na - 1.0,
            "report": self.report.to_dict(),
        }


@dataclass
class ConjectureReport:
    gamma_fc: float
    gamma_na: float
    weights_fc: List[float]
    weights_na: List[float]
    rows: List[ConjectureRow] = field(default_factory=list)
    label: str = CONJECTURE_LABEL

    @property
    def fc_equals_na(self):
        return abs(self.gamma_fc - self.gamma_na) <= 1e-6 * self.gamma_fc

    def to_dict(self):
        return {
            "label": self.label,
            "gamma_fc": self.gamma_fc,
            "gamma_na": self.gamma_na,
            "weights_fc": self.weights_fc,
            "weights_na": self.weights_na,
            "gamma_fc_equals_gamma_na": self.fc_equals_na,
            "rows": [r.to_dict(self.gamma_fc, self.gamma_na) for r in self.rows],
        }


def probe_conjectures(instance, budgets, replications, master_seed,
                      window=DEFAULT_WINDOW, workers=1, tol=1e-8) -> ConjectureReport:
    """Tabulate empirical n/ln(1/p) of three allocations beside both complexities."""
    fc = gamma_fc(instance, tol)
    na = gamma_na(instance, tol)
    out = ConjectureReport(fc.gamma, na.gamma, fc.optimal_weights.tolist(),
                           na.optimal_weights.tolist())
    candidates = [
        ("uniform", uniform_policy(), [1.0 / instance.k] * instance.k),
        ("fixed_weight_fc", fixed_weight_policy(fc.optimal_weights), out.weights_fc),
        ("fixed_weight_na", fixed_weight_policy(na.optimal_weights), out.weights_na),
    ]
    for name, policy, w in candidates:
        report = run_fixed_budget(instance, policy, budgets, replications, master_seed, workers)
        report.policy = name
        out.rows.append(ConjectureRow(name, list(w), estimate_rate(report, window), report))
    return out
