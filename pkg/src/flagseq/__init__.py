"""Flag sequence design, verification and low-complexity delay-Doppler estimation."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ClassificationError,
    DomainError,
    FeasibilityError,
    FlagSeqError,
    ParameterError,
    SolverError,
)
from .seqcore import Case, ChirpParams, ComplexSeq, Zone  # noqa: E402

__all__ = [
    "__version__",
    "Case",
    "ChirpParams",
    "ComplexSeq",
    "Zone",
    "FlagSeqError",
    "ParameterError",
    "DomainError",
    "FeasibilityError",
    "ClassificationError",
    "SolverError",
]
