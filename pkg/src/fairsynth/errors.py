"""Exception hierarchy shared by all fairsynth modules."""


class FairSynthError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(FairSynthError):
    """Bad user input: flags, schema, config or data file contents."""


class SchemaError(ValidationError):
    pass


class IngestError(ValidationError):
    """A data row could not be parsed. Carries the 1-based line number."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class CardinalityError(ValidationError):
    pass


class EmptyInputError(ValidationError):
    pass


class ConfigError(ValidationError):
    pass


class InsufficientSupportError(FairSynthError):
    """A cell has too few rows to act as a SMOTE donor."""


class UnreachableTargetError(FairSynthError):
    """Base-rate target cannot be met by adding rows to the donor cell."""


class TrainingDivergenceError(FairSynthError):
    def __init__(self, message, iteration=None):
        if iteration is not None:
            message = f"iteration {iteration}: {message}"
        super().__init__(message)
        self.iteration = iteration


class InsufficientSampleError(FairSynthError):
    pass


class UndefinedWeightError(FairSynthError):
    pass


class DegenerateVarianceError(FairSynthError):
    pass


class PairingError(FairSynthError):
    pass
