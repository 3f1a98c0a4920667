"""Failure taxonomy for the laboratory.

Every non-recoverable numerical condition maps to one subclass with a stable
``code`` string, so CLI reports and tests can match on the code rather than on
message text. Validation problems (bad parameters, malformed config) raise
plain ValueError and are reported separately from numerical failures.
"""


class NumericalError(Exception):
    """Base class for numerical failures that invalidate a result."""

    code = "NUMERICAL_ERROR"

    def __init__(self, message, **context):
        super().__init__(message)
        self.context = context

    def __str__(self):
        base = super().__str__()
        if self.context:
            extras = ", ".join(f"{k}={v!r}" for k, v in sorted(self.context.items()))
            return f"[{self.code}] {base} ({extras})"
        return f"[{self.code}] {base}"


class TailTooLarge(NumericalError):
    """Estimated truncation tail exceeds the relative tolerance."""

    code = "TAIL_TOO_LARGE"


class DivergentNearOrigin(NumericalError):
    """Weighted integrand fails the first-decade Cauchy test."""

    code = "DIVERGENT_NEAR_ORIGIN"


class SingularityUnresolved(NumericalError):
    """Assembled sector form entries diverge toward the origin."""

    code = "SINGULARITY_UNRESOLVED"


class NotConverged(NumericalError):
    """Iterative optimisation exhausted its evaluation budget."""

    code = "NOT_CONVERGED"


class NoNearbyBubble(NumericalError):
    """No projection candidate within the trust distance of the manifold."""

    code = "NO_NEARBY_BUBBLE"


class NegativeGap(NumericalError):
    """Computed spectral gap is not positive."""

    code = "NEGATIVE_GAP"


class SectorOrderingUnexpected(NumericalError):
    """Higher angular sector produced a lower bottom eigenvalue."""

    code = "SECTOR_ORDERING_UNEXPECTED"


class ConditionViolated(NumericalError):
    """A stated hypothesis of the inequality under test does not hold."""

    code = "CONDITION_VIOLATED"


__all__ = [
    "NumericalError",
    "TailTooLarge",
    "DivergentNearOrigin",
    "SingularityUnresolved",
    "NotConverged",
    "NoNearbyBubble",
    "NegativeGap",
    "SectorOrderingUnexpected",
    "ConditionViolated",
]
