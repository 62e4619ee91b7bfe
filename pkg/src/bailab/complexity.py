"""Fixed-confidence and non-adaptive fixed-budget complexities.

Both functionals have the form

    1 / max_{w in simplex} min_{j != best} c_j(w)

where ``c_j`` is the cheapest way to move the best arm and challenger ``j``
to a common mean ``m``. The fixed-confidence cost weighs ``KL(theta_i || m)``
and the non-adaptive cost weighs the reversed divergence ``KL(m || theta_i)``.

The outer maximum is found by cost equalization: for a target level ``y``
each challenger gets the weight ratio ``x_j(y)`` (relative to the best arm)
that makes its cost exactly ``y``, and the level is chosen so that the
weighted gradient condition ``sum_j D_best(m_j) / D_j(m_j) = 1`` holds.
Every returned point carries a duality certificate, so the relative error
of ``gamma`` is bounded by ``diagnostics["achieved_tol"]``.
"""

import math
from dataclasses import dataclass, field
from typing import List

import numpy as np
from scipy.optimize import brentq, linprog

from .arms import ArmFamily, BanditInstance, best_arm, check_weights, validate
from .errors import ConvergenceError, UsageError

FC = "fc"
NA = "na"
DEFAULT_TOL = 1e-8
MAX_ITER = 100_000
BISECT_WIDTH = 1e-12


@dataclass(frozen=True)
class TransportCost:
    challenger: int
    value: float
    minimizer: float


@dataclass
class ComplexityResult:
    gamma: float
    optimal_weights: np.ndarray
    challenger_costs: List[TransportCost]
    objective_value: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self):
        return {
            "gamma": self.gamma,
            "optimal_weights": [float(v) for v in self.optimal_weights],
            "objective_value": self.objective_value,
            "challenger_costs": [
                {"challenger": c.challenger, "value": c.value, "minimizer": c.minimizer}
                for c in self.challenger_costs
            ],
            "diagnostics": dict(self.diagnostics),
        }


def _xlogy(x, y):
    return 0.0 if x == 0.0 else x * math.log(y)


def _kl_bern(p, q):
    return _xlogy(p, p / q) + _xlogy(1.0 - p, (1.0 - p) / (1.0 - q))


def _logit(p):
    return math.log(p / (1.0 - p))


class _Costs:
    """Per-arm divergence to a moving mean, in one direction.

    Works on plain arrays so the tracking policy can call it with
    empirical means that would not pass instance validation.
    """

    def __init__(self, family, means, variances, direction):
        if direction not in (FC, NA):
            raise UsageError(f"direction must be 'fc' or 'na', got {direction!r}")
        self.family = family
        self.means = [float(m) for m in means]
        self.var = None if variances is None else [float(v) for v in variances]
        self.direction = direction
        self.gaussian = family is ArmFamily.GAUSSIAN

    def div(self, i, m):
        """Cost per unit weight of moving arm ``i`` to mean ``m``."""
        th = self.means[i]
        if self.gaussian:
            d = th - m
            return d * d / (2.0 * self.var[i])
        if self.direction == FC:
            return _kl_bern(th, m)
        return _kl_bern(m, th)

    def ddiv(self, i, m):
        """Derivative of :meth:`div` with respect to ``m``."""
        th = self.means[i]
        if self.gaussian:
            return (m - th) / self.var[i]
        if self.direction == FC:
            return (m - th) / (m * (1.0 - m))
        return _logit(m) - _logit(th)

    def minimizer(self, i, j, wi, wj):
        """Closed-form argmin over m of ``wi*div(i, m) + wj*div(j, m)``."""
        ti, tj = self.means[i], self.means[j]
        if wi + wj <= 0.0:
            return 0.5 * (ti + tj)
        if wi == 0.0:
            return tj
        if wj == 0.0:
            return ti
        if self.gaussian:
            pi, pj = wi / self.var[i], wj / self.var[j]
            m = (pi * ti + pj * tj) / (pi + pj)
        elif self.direction == FC:
            m = (wi * ti + wj * tj) / (wi + wj)
        else:
            eta = (wi * _logit(ti) + wj * _logit(tj)) / (wi + wj)
            m = 1.0 / (1.0 + math.exp(-eta))
        lo, hi = min(ti, tj), max(ti, tj)
        return min(max(m, lo), hi)

    def minimizer_bisect(self, i, j, wi, wj, width=BISECT_WIDTH):
        """Same argmin by bisection on the increasing derivative."""
        ti, tj = self.means[i], self.means[j]
        lo, hi = min(ti, tj), max(ti, tj)
        if wi + wj <= 0.0:
            return 0.5 * (ti + tj)
        if wi == 0.0:
            return tj
        if wj == 0.0:
            return ti
        while hi - lo > width:
            mid = 0.5 * (lo + hi)
            if mid in (lo, hi):
                break
            if wi * self.ddiv(i, mid) + wj * self.ddiv(j, mid) > 0.0:
                hi = mid
            else:
                lo = mid
        return 0.5 * (lo + hi)

    def pair_cost(self, i, j, wi, wj, bisect=False):
        m = (self.minimizer_bisect if bisect else self.minimizer)(i, j, wi, wj)
        value = 0.0
        if wi > 0.0:
            value += wi * self.div(i, m)
        if wj > 0.0:
            value += wj * self.div(j, m)
        return value, m

    # -- equalization helpers, weights normalized so the best arm has 1 --

    def ratio_at(self, b, j, m):
        """Weight ratio w_j / w_b that makes ``m`` the pair minimizer."""
        dj = self.ddiv(j, m)
        if dj == 0.0:
            return math.inf
        return -self.ddiv(b, m) / dj

    def level_at(self, b, j, m):
        """Pair cost at weights (1, ratio_at(m)); increases as m moves to theta_j."""
        if m == self.means[j]:
            return self.div(b, m)
        dj = self.ddiv(j, m)
        return self.div(b, m) - self.ddiv(b, m) * self.div(j, m) / dj

    def mean_for_level(self, b, j, y):
        """Common mean m_j at which the pair cost with w_b = 1 equals ``y``."""
        tb, tj = self.means[b], self.means[j]
        if y <= 0.0:
            return tb
        if self.gaussian:
            vb, vj = self.var[b], self.var[j]
            gap2 = (tb - tj) ** 2
            denom = gap2 / (2.0 * y) - vb
            if denom <= 0.0:
                return tj
            x = vj / denom
            pb, pj = 1.0 / vb, x / vj
            return (pb * tb + pj * tj) / (pb + pj)
        top = self.div(b, tj)
        if y >= top:
            return tj
        return brentq(lambda m: self.level_at(b, j, m) - y, tb, tj,
                      xtol=1e-15, rtol=1e-15, maxiter=500)


def _costs_for(instance, direction):
    return _Costs(instance.family, instance.means, instance.variances, direction)


def _transport(instance, weights, challenger, direction, method):
    validate(instance)
    w = check_weights(weights, instance.k)
    b = best_arm(instance)
    if not 0 <= challenger < instance.k:
        raise UsageError(f"challenger {challenger} out of range for k={instance.k}")
    if challenger == b:
        raise UsageError(f"challenger {challenger} is the best arm")
    if method not in ("closed", "bisection"):
        raise UsageError(f"unknown method {method!r}")
    costs = _costs_for(instance, direction)
    value, m = costs.pair_cost(b, challenger, w[b], w[challenger], bisect=method == "bisection")
    return TransportCost(challenger, float(value), float(m))


def transport_cost_fc(instance: BanditInstance, weights, challenger: int,
                      method: str = "closed") -> TransportCost:
    """inf over m of w_b KL(theta_b || m) + w_j KL(theta_j || m)."""
    return _transport(instance, weights, challenger, FC, method)


def transport_cost_na(instance: BanditInstance, weights, challenger: int,
                      method: str = "closed") -> TransportCost:
    """inf over m of w_b KL(m || theta_b) + w_j KL(m || theta_j)."""
    return _transport(instance, weights, challenger, NA, method)


def min_cost(costs, b, w):
    """Objective F(w): the cheapest challenger's transport cost."""
    return min(costs.pair_cost(b, j, w[b], w[j])[0]
               for j in range(len(costs.means)) if j != b)


def objective(instance: BanditInstance, weights, direction: str = FC) -> float:
    """F(w) = min over challengers of the transport cost at ``weights``."""
    validate(instance)
    w = check_weights(weights, instance.k)
    return min_cost(_costs_for(instance, direction), best_arm(instance), w)


def _certificate(costs, b, w):
    """Return (F(w), upper bound on max F, per-challenger (value, m)).

    The bound mixes challenger costs with lambda_j proportional to
    1 / D_j(m_j); by concavity and 1-homogeneity the mixture's maximum
    over the simplex is at most the largest gradient coordinate.
    """
    k = len(costs.means)
    pairs = {j: costs.pair_cost(b, j, w[b], w[j]) for j in range(k) if j != b}
    lower = min(v for v, _ in pairs.values())
    lam = {}
    for j, (_, m) in pairs.items():
        dj = costs.div(j, m)
        lam[j] = math.inf if dj == 0.0 else 1.0 / dj
    if any(math.isinf(v) for v in lam.values()):
        # a challenger with zero weight: fall back to the argmin vertex
        jmin = min(pairs, key=lambda j: pairs[j][0])
        lam = {j: float(j == jmin) for j in pairs}
    total = sum(lam.values())
    grad = np.zeros(k)
    for j, (_, m) in pairs.items():
        lj = lam[j] / total
        grad[b] += lj * costs.div(b, m)
        grad[j] += lj * costs.div(j, m)
    return lower, float(grad.max()), pairs


def _lp_upper_bound(costs, b, pairs):
    """Tightest certificate bound over all challenger mixtures lambda (an LP)."""
    k = len(costs.means)
    chal = sorted(pairs)
    # variables: lambda_j for each challenger, then t; minimize t
    n = len(chal)
    c = np.zeros(n + 1)
    c[-1] = 1.0
    a_ub = np.zeros((k, n + 1))
    a_ub[:, -1] = -1.0
    for col, j in enumerate(chal):
        m = pairs[j][1]
        a_ub[b, col] = costs.div(b, m)
        a_ub[j, col] = costs.div(j, m)
    a_eq = np.zeros((1, n + 1))
    a_eq[0, :n] = 1.0
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(k), A_eq=a_eq, b_eq=[1.0],
                  bounds=[(0, None)] * n + [(None, None)], method="highs")
    return float(res.x[-1]) if res.status == 0 else math.inf


def _equalize(costs, b, max_iter):
    k = len(costs.means)
    chal = [j for j in range(k) if j != b]
    ymax = min(costs.div(b, costs.means[j]) for j in chal)
    calls = [0]

    def g(y):
        calls[0] += 1
        total = 0.0
        for j in chal:
            m = costs.mean_for_level(b, j, y)
            dj = costs.div(j, m)
            db = costs.div(b, m)
            if dj == 0.0:
                return math.inf if db > 0.0 else -1.0
            total += db / dj
        return total - 1.0

    hi = None
    for eps in (1e-13, 1e-11, 1e-9, 1e-7, 1e-5):
        y = ymax * (1.0 - eps)
        gy = g(y)
        if math.isfinite(gy) and gy > 0.0:
            hi = y
            break
    if hi is None:
        return None, calls[0]
    y_star, info = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15,
                          maxiter=max_iter, full_output=True, disp=False)
    x = np.zeros(k)
    x[b] = 1.0
    for j in chal:
        m = costs.mean_for_level(b, j, y_star)
        x[j] = costs.ratio_at(b, j, m)
    if not np.all(np.isfinite(x)):
        return None, calls[0]
    return x / x.sum(), calls[0]


def project_simplex(v):
    """Euclidean projection of ``v`` onto the probability simplex."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    idx = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / idx > 0)[0][-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _supergradient_ascent(costs, b, w0, tol, max_iter, check_every=50, step_scale=0.03):
    """Projected supergradient ascent; returns (best w, its gap, steps).

    Every bound computed along the way caps the optimum, so the gap pairs
    the best point found with the smallest bound seen.
    """
    k = len(costs.means)
    w = np.array(w0, dtype=float)
    lower, upper, pairs = _certificate(costs, b, w)
    best_w, best_f = w.copy(), lower
    bound = min(upper, _lp_upper_bound(costs, b, pairs))
    scale = step_scale / max(upper, 1e-300)
    steps = 0
    for steps in range(1, max_iter + 1):
        (f, m), j = min(((costs.pair_cost(b, j, w[b], w[j]), j) for j in range(k) if j != b),
                        key=lambda t: t[0][0])
        if f > best_f:
            best_w, best_f = w.copy(), f
        grad = np.zeros(k)
        grad[b] = costs.div(b, m)
        grad[j] = costs.div(j, m)
        w = project_simplex(w + scale / math.sqrt(steps) * grad)
        if steps % check_every == 0:
            _, upper, pairs = _certificate(costs, b, best_w)
            bound = min(bound, upper, _lp_upper_bound(costs, b, pairs))
            if best_f > 0 and (bound - best_f) / best_f <= tol:
                break
    gap = (bound - best_f) / best_f if best_f > 0 else math.inf
    return best_w, max(gap, 0.0), steps


def solve(costs, b, tol=DEFAULT_TOL, max_iter=MAX_ITER, method="equalize"):
    """Maximize F over the simplex for a prepared cost model.

    Returns ``(w, diagnostics)``; raises ConvergenceError when neither
    equalization nor the supergradient fallback certifies ``tol``.
    """
    k = len(costs.means)
    diag = {"method": method, "iterations": 0}
    w = None
    if method == "equalize":
        w, calls = _equalize(costs, b, max_iter)
        diag["iterations"] = calls
    elif method != "subgradient":
        raise UsageError(f"unknown solver method {method!r}")
    if w is not None:
        lower, upper, _ = _certificate(costs, b, w)
        gap = float((upper - lower) / lower)
        if gap <= tol:
            diag["achieved_tol"] = gap
            return w, diag
    start = w if w is not None else np.full(k, 1.0 / k)
    w_sg, gap, steps = _supergradient_ascent(costs, b, start, tol, max_iter)
    diag["method"] = "subgradient"
    diag["iterations"] += steps
    diag["achieved_tol"] = float(gap)
    if gap > tol:
        raise ConvergenceError(
            f"relative optimality gap {gap:.3g} exceeds tol {tol:.3g} after {steps} steps",
            best=w_sg)
    return w_sg, diag


def _result(costs, b, w, diag):
    lower, upper, pairs = _certificate(costs, b, w)
    values = [v for v, _ in pairs.values()]
    diag = dict(diag)
    diag["equalization_residual"] = float(max(values) - min(values))
    diag["upper_bound"] = float(upper)
    challenger_costs = [TransportCost(j, float(v), float(m)) for j, (v, m) in sorted(pairs.items())]
    return ComplexityResult(gamma=float(1.0 / lower), optimal_weights=w,
                            challenger_costs=challenger_costs,
                            objective_value=float(lower), diagnostics=diag)


def _gamma(instance, direction, tol, max_iter, method):
    validate(instance)
    if not tol >= 1e-10:
        raise UsageError(f"tol must be at least 1e-10, got {tol!r}")
    costs = _costs_for(instance, direction)
    b = best_arm(instance)
    try:
        w, diag = solve(costs, b, tol=tol, max_iter=max_iter, method=method)
    except ConvergenceError as exc:
        if exc.best is not None:
            lower, upper, _ = _certificate(costs, b, exc.best)
            exc.best = _result(costs, b, exc.best,
                               {"method": "subgradient", "achieved_tol": (upper - lower) / lower})
        raise
    return _result(costs, b, w, diag)


def gamma_fc(instance: BanditInstance, tol: float = DEFAULT_TOL,
             max_iter: int = MAX_ITER, method: str = "equalize") -> ComplexityResult:
    """Fixed-confidence complexity and its optimal allocation."""
    return _gamma(instance, FC, tol, max_iter, method)


def gamma_na(instance: BanditInstance, tol: float = DEFAULT_TOL,
             max_iter: int = MAX_ITER, method: str = "equalize") -> ComplexityResult:
    """Non-adaptive fixed-budget complexity (reversed KL arguments)."""
    return _gamma(instance, NA, tol, max_iter, method)


def two_armed_gaussian_closed_form(instance: BanditInstance) -> ComplexityResult:
    """Exact answer for two Gaussian arms: weights proportional to the std devs."""
    if instance.k != 2 or instance.family is not ArmFamily.GAUSSIAN:
        raise UsageError("closed form needs exactly two Gaussian arms")
    validate(instance)
    s = np.sqrt(instance.variances)
    w = s / s.sum()
    gap = abs(instance.means[0] - instance.means[1])
    gamma = 2.0 * (s[0] + s[1]) ** 2 / gap ** 2
    b = best_arm(instance)
    j = 1 - b
    m = float(instance.means[b] - (instance.means[b] - instance.means[j]) * s[b] / (s[0] + s[1]))
    cost = TransportCost(j, 1.0 / gamma, m)
    return ComplexityResult(gamma=float(gamma), optimal_weights=w, challenger_costs=[cost],
                            objective_value=1.0 / gamma,
                            diagnostics={"method": "closed_form", "iterations": 0,
                                         "achieved_tol": 0.0, "equalization_residual": 0.0,
                                         "exact": True})
