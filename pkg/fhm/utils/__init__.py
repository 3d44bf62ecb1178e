from .config import Settings, settings
from .errors import (
    BranchAmbiguityError,
    FhmError,
    InputError,
    IntegrationError,
    LinearSolverError,
    MonodromyError,
    NonConvergenceError,
    StepFailure,
    VerificationError,
)

__all__ = [
    "Settings",
    "settings",
    "FhmError",
    "InputError",
    "NonConvergenceError",
    "LinearSolverError",
    "StepFailure",
    "IntegrationError",
    "BranchAmbiguityError",
    "VerificationError",
    "MonodromyError",
]
