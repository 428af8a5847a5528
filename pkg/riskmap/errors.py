"""
Exception hierarchy.

Everything raised on purpose by riskmap derives from RiskMapError. Problems
with the model (or with how it is queried) are ModelError; numerical
degeneracies that a small perturbation of the parameters would remove are
NumericalDegeneracyError. The CLI maps the two families to exit codes 1 and 2.
"""

from typing import List

PERTURB_HINT = "try perturbing the observation rates omega by about 1e-6"


class RiskMapError(Exception):
    """Base class for all riskmap errors."""

    exit_code = 1


# ---------------------------------------------------------------------------
# Model errors (exit code 1)
# ---------------------------------------------------------------------------

class UsageError(RiskMapError):
    """Bad command-line arguments, or an operation called with arguments it does not accept."""


class ModelError(RiskMapError):
    exit_code = 1


class ModelValidationError(ModelError):
    """Raised with every problem found in a model document at once."""

    def __init__(self, errors: List[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors) if self.errors else "invalid model")


class TransformPole(ModelError):
    """A phase-type transform was evaluated at one of its poles."""


class OrderingError(ModelError):
    """Levels passed in the wrong order (need 0 <= u <= x) or negative."""


class UnsupportedModel(ModelError):
    """The operation does not support this model class."""


class DefectiveDrift(ModelError):
    """Negative drift: the unkilled first-passage generator is defective."""


class ZeroDrift(ModelError):
    """Zero drift: the occupation matrix and survival at zero are undefined."""


class NotAllObserved(ModelError):
    """Some observation rate is zero where all of them must be positive."""


class DefectiveGenerator(ModelError):
    """Row sums of a generator are significantly negative."""


# ---------------------------------------------------------------------------
# Numerical degeneracies (exit code 2)
# ---------------------------------------------------------------------------

class NumericalDegeneracyError(RiskMapError):
    exit_code = 2


class RepeatedEigenvalue(NumericalDegeneracyError):
    pass


class RepeatedRoot(NumericalDegeneracyError):
    pass


class CommonEigenvalue(NumericalDegeneracyError):
    pass


class SingularBracket(NumericalDegeneracyError):
    pass


class NearSingularResolvent(NumericalDegeneracyError):
    pass


class WrongRootCount(NumericalDegeneracyError):
    pass


class NotSingular(NumericalDegeneracyError):
    pass


class IllConditioned(NumericalDegeneracyError):
    pass


class InvariantViolation(NumericalDegeneracyError):
    pass


class ProbabilityRangeError(NumericalDegeneracyError):
    """A probability left [0, 1] by more than round-off."""


def exit_code_for(exc: BaseException) -> int:
    """Exit code the CLI reports for an exception."""
    if isinstance(exc, RiskMapError):
        return exc.exit_code
    return 1
