"""
Error hierarchy shared by every fiveprime module.

Library code raises these; only the CLI turns them into exit codes.
All of them are ValueErrors so callers that only care about bad input
can keep catching ValueError.
"""
from typing import Iterable, List


class FiveprimeError(ValueError):
    """Base class for all fiveprime errors."""


class InvalidParamsError(FiveprimeError):
    """One or more parameter invariants failed."""

    def __init__(self, failures: Iterable[str]):
        self.failures: List[str] = list(failures)
        super().__init__("invalid parameters: " + "; ".join(self.failures))


class RatioOutOfBandError(InvalidParamsError):
    """Target ratio N2/N1^(d/c) outside the open band (1, 5^(1-d/c))."""


class LimitExceededError(FiveprimeError):
    """A desk-scale resource limit would be exceeded."""


class RangeTooLargeError(LimitExceededError):
    pass


class GridTooLargeError(LimitExceededError):
    pass


class InstanceTooLargeError(LimitExceededError):
    pass


class MemoryLimitError(LimitExceededError):
    pass


class StepTooCoarseError(FiveprimeError):
    """Quadrature step does not resolve the integrand's oscillation."""


class DomainViolationError(FiveprimeError):
    """Argument outside the domain of a formula."""


class MalformedWordError(DomainViolationError):
    pass


class OutOfRangeError(DomainViolationError):
    pass


class InfeasibleProfileError(DomainViolationError):
    pass
