"""Exception hierarchy shared by every module."""


class BanditError(Exception):
    """Base class for all errors raised by bailab."""


class UsageError(BanditError, ValueError):
    """An operation was called with arguments outside its contract."""


class FamilyMismatchError(UsageError):
    pass


class DomainError(BanditError, ValueError):
    """A parameter lies outside the domain of its distribution family."""


class InstanceError(BanditError, ValueError):
    """A bandit instance violates a membership invariant.

    ``kind`` names the violated invariant: one of ``"family"``, ``"tie"``,
    ``"boundary"``, ``"variance"``, ``"size"``.
    """

    def __init__(self, kind, message):
        super().__init__(message)
        self.kind = kind


class NonUniqueBestArmError(InstanceError):
    def __init__(self, message):
        super().__init__("tie", message)


class ConvergenceError(BanditError, RuntimeError):
    """The solver missed its tolerance; ``best`` holds the best iterate."""

    def __init__(self, message, best=None):
        super().__init__(message)
        self.best = best


class InsufficientDataError(BanditError, ValueError):
    pass


class StoppingTimeout(BanditError, RuntimeError):
    """A fixed-confidence run reached ``t_max`` without stopping."""

    def __init__(self, t):
        super().__init__(f"no stopping decision after t={t} samples")
        self.t = t
