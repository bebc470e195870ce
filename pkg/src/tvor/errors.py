"""Exception hierarchy.

Each class carries the process exit code the CLI maps it to.
"""


class TvorError(Exception):
    exit_code = 1


class ValidationError(TvorError, ValueError):
    """Input data or parameters are malformed."""

    exit_code = 3


class RankDeficientError(ValidationError):
    """The regression design has fewer than two distinct sample sizes."""


class NumericalGuardError(TvorError):
    """A computation was refused because it would explode or degenerate."""

    exit_code = 4


class OracleLimitError(NumericalGuardError):
    def __init__(self, outcomes, limit):
        super().__init__(
            f"enumeration would visit {outcomes} outcomes (limit {limit})"
        )
        self.outcomes = outcomes
        self.limit = limit


class DegenerateTableError(NumericalGuardError):
    """A Monte Carlo row has a (near) zero standard deviation."""


class NoConsensusError(NumericalGuardError):
    """RANSAC never reached the minimum consensus size."""
