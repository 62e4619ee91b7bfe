"""Bandit instances built from one-parameter arm families.

Two families are supported: Gaussian arms with a known variance and
Bernoulli arms. Alternatives move the mean only, so a Gaussian arm keeps
its variance under every change of measure used by the solvers.
"""

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import (
    DomainError,
    FamilyMismatchError,
    InstanceError,
    NonUniqueBestArmError,
    UsageError,
)

# Means closer than this to the maximum count as a tie.
TIE_TOL = 1e-12
SIMPLEX_TOL = 1e-12


class ArmFamily(enum.Enum):
    GAUSSIAN = "gaussian"
    BERNOULLI = "bernoulli"

    @classmethod
    def parse(cls, name):
        key = str(name).strip().lower().replace("_", "").replace("-", "")
        aliases = {
            "gaussian": cls.GAUSSIAN,
            "gaussianknownvariance": cls.GAUSSIAN,
            "normal": cls.GAUSSIAN,
            "bernoulli": cls.BERNOULLI,
        }
        try:
            return aliases[key]
        except KeyError:
            raise UsageError(f"unknown arm family {name!r}") from None


@dataclass(frozen=True)
class Arm:
    family: ArmFamily
    mean: float
    variance: Optional[float] = None

    @property
    def std(self):
        return math.sqrt(self.variance)

    def check(self):
        """Raise DomainError if the arm's parameters are out of range."""
        if self.family is ArmFamily.GAUSSIAN:
            if self.variance is None or not self.variance > 0 or not math.isfinite(self.variance):
                raise DomainError(f"Gaussian arm needs a positive variance, got {self.variance!r}")
            if not math.isfinite(self.mean):
                raise DomainError(f"Gaussian mean must be finite, got {self.mean!r}")
        else:
            if not 0.0 < self.mean < 1.0:
                raise DomainError(f"Bernoulli mean must lie in (0, 1), got {self.mean!r}")


@dataclass(frozen=True)
class BanditInstance:
    """An ordered tuple of arms. Use :func:`validate` before solving."""

    arms: tuple

    def __post_init__(self):
        object.__setattr__(self, "arms", tuple(self.arms))

    @classmethod
    def gaussian(cls, means, variances):
        if len(means) != len(variances):
            raise UsageError("means and variances must have the same length")
        return cls(tuple(Arm(ArmFamily.GAUSSIAN, float(m), float(v))
                         for m, v in zip(means, variances)))

    @classmethod
    def bernoulli(cls, means):
        return cls(tuple(Arm(ArmFamily.BERNOULLI, float(m)) for m in means))

    @property
    def k(self):
        return len(self.arms)

    @property
    def family(self):
        return self.arms[0].family

    @property
    def means(self):
        return np.array([a.mean for a in self.arms], dtype=float)

    @property
    def variances(self):
        if self.family is not ArmFamily.GAUSSIAN:
            return None
        return np.array([a.variance for a in self.arms], dtype=float)

    def permuted(self, perm):
        """Return the instance whose arm ``i`` is this instance's arm ``perm[i]``."""
        return BanditInstance(tuple(self.arms[p] for p in perm))

    def shifted(self, c):
        if self.family is not ArmFamily.GAUSSIAN:
            raise UsageError("only Gaussian instances can be shifted")
        return BanditInstance(tuple(Arm(a.family, a.mean + c, a.variance) for a in self.arms))


def kl_bernoulli(p, q):
    """Bernoulli KL divergence, elementwise; p may sit on {0, 1}, q may not."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0, p * np.log(p / q), 0.0)
        b = np.where(p < 1, (1 - p) * np.log((1 - p) / (1 - q)), 0.0)
    out = a + b
    return out if out.ndim else float(out)


def kl_gaussian(m1, m2, var):
    """KL between two Gaussians sharing the variance ``var``."""
    d = np.asarray(m1, dtype=float) - np.asarray(m2, dtype=float)
    out = d * d / (2.0 * np.asarray(var, dtype=float))
    return out if out.ndim else float(out)


def kl(a: Arm, b: Arm) -> float:
    """KL(a || b) for two arms of the same family."""
    if a.family is not b.family:
        raise FamilyMismatchError(f"cannot compare {a.family.value} with {b.family.value}")
    a.check()
    b.check()
    if a.family is ArmFamily.BERNOULLI:
        return float(kl_bernoulli(a.mean, b.mean))
    va, vb = a.variance, b.variance
    d = a.mean - b.mean
    return 0.5 * math.log(vb / va) + (va + d * d) / (2.0 * vb) - 0.5


def best_arm(instance: BanditInstance) -> int:
    """0-based index of the unique best arm."""
    means = instance.means
    i = int(np.argmax(means))
    others = np.delete(means, i)
    if others.size and means[i] - others.max() <= TIE_TOL:
        raise NonUniqueBestArmError(
            f"best arm is not unique: max mean {means[i]!r} is shared")
    return i


def sample(arm: Arm, rng: np.random.Generator) -> float:
    if arm.family is ArmFamily.BERNOULLI:
        return 1.0 if rng.random() < arm.mean else 0.0
    return float(rng.normal(arm.mean, math.sqrt(arm.variance)))


def validate(instance: BanditInstance) -> None:
    """Raise InstanceError naming the first violated invariant."""
    arms = instance.arms
    if len(arms) < 2:
        raise InstanceError("size", f"an instance needs at least 2 arms, got {len(arms)}")
    fam = arms[0].family
    for i, a in enumerate(arms):
        if a.family is not fam:
            raise InstanceError("family", f"arm {i} is {a.family.value}, arm 0 is {fam.value}")
    for i, a in enumerate(arms):
        if fam is ArmFamily.BERNOULLI and not 0.0 < a.mean < 1.0:
            raise InstanceError("boundary", f"arm {i}: Bernoulli mean {a.mean!r} not in (0, 1)")
        if fam is ArmFamily.GAUSSIAN:
            if a.variance is None or not a.variance > 0 or not math.isfinite(a.variance):
                raise InstanceError("variance", f"arm {i}: variance {a.variance!r} is not positive")
            if not math.isfinite(a.mean):
                raise InstanceError("boundary", f"arm {i}: mean {a.mean!r} is not finite")
    best_arm(instance)


def check_weights(w: Sequence[float], k: Optional[int] = None) -> np.ndarray:
    """Return ``w`` as an array after checking it lies on the simplex."""
    w = np.asarray(w, dtype=float)
    if w.ndim != 1 or (k is not None and w.size != k):
        raise UsageError(f"weights must be a vector of length {k}, got shape {w.shape}")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise UsageError("weights must be finite and nonnegative")
    if abs(w.sum() - 1.0) > SIMPLEX_TOL:
        raise UsageError(f"weights sum to {w.sum()!r}, not 1")
    return w
