"""Exception hierarchy for the toolkit.

Every error raised on purpose derives from :class:`AfRiskError`; most also
derive from :class:`ValueError` so callers that only care about "bad input"
can catch that instead.
"""


class AfRiskError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(AfRiskError, ValueError):
    """Input failed a precondition check."""


# cohort-data
class SchemaError(ValidationError):
    pass


class MissingColumnError(ValidationError):
    pass


class LabelParseError(ValidationError):
    pass


class CategoryUnknownError(ValidationError):
    pass


class UnknownVariableError(ValidationError, KeyError):
    def __str__(self):
        # KeyError repr-quotes its message otherwise
        return Exception.__str__(self)


class DegenerateGroupError(ValidationError):
    pass


# impute
class AllMissingVariableError(ValidationError):
    pass


class IsolatedRecordError(ValidationError):
    pass


# stats kernels
class TooFewSamplesError(ValidationError):
    pass


class ZeroVarianceError(ValidationError):
    pass


class LengthMismatchError(ValidationError):
    pass


class DegenerateTableError(ValidationError):
    pass


class NonFiniteError(AfRiskError, ArithmeticError):
    pass


# resample
class InsufficientMajorityError(ValidationError):
    pass


class TooFewMinorityError(ValidationError):
    pass


class MissingCellsError(ValidationError):
    pass


# classify
class NoSelectedFeaturesError(ValidationError):
    pass


class SingleClassError(ValidationError):
    pass


class DivergedError(AfRiskError, ArithmeticError):
    pass


# evaluate
class ClassTooSmallError(ValidationError):
    pass


# synthgen
class InvalidSpecError(ValidationError):
    pass
