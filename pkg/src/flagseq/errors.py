"""Exception types shared across the package."""


class FlagSeqError(Exception):
    """Base class for all package errors."""


class ParameterError(FlagSeqError, ValueError):
    """An argument is outside its valid range or shapes do not line up."""


class DomainError(FlagSeqError, ValueError):
    """A quantity is undefined for the given input (e.g. zero energy)."""


class FeasibilityError(ParameterError):
    """A curtain construction violates one of its feasibility inequalities.

    ``rule`` is a short machine-readable tag ("parity", "zone", "extension",
    "coprime", "gap"); the message names the violated inequality.
    """

    def __init__(self, rule: str, message: str):
        super().__init__(message)
        self.rule = rule


class ClassificationError(FlagSeqError, ValueError):
    """Input is neither a delta nor a discrete chirp."""


class SolverError(FlagSeqError, RuntimeError):
    """The optimizer hit a non-finite objective; ``state`` holds a dump."""

    def __init__(self, message: str, state=None):
        super().__init__(message)
        self.state = state
