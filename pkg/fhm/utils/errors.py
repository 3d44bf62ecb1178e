"""Error taxonomy shared by the services and the command line.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Any, List, Optional


class FhmError(Exception):
    exit_code = 1

    def __init__(self, message: str, **details: Any):
        super().__init__(message)
        self.message = message
        self.details = details


class InputError(FhmError):
    """Malformed or inadmissible input (bad grid, non-positive data, bad file).

    Not a ValueError: pydantic re-raises it unwrapped from validators."""

    exit_code = 2


class NonConvergenceError(FhmError):
    exit_code = 3

    def __init__(self, message: str, report: Optional[Any] = None, **details: Any):
        super().__init__(message, **details)
        self.report = report


class LinearSolverError(NonConvergenceError):
    def __init__(self, message: str, residual_history: List[float], **details: Any):
        super().__init__(message, **details)
        self.residual_history = residual_history


class StepFailure(FhmError):
    """No admissible damping factor; the continuation should shrink its step."""

    exit_code = 3


class IntegrationError(FhmError):
    exit_code = 3


class BranchAmbiguityError(FhmError):
    exit_code = 3

    def __init__(self, message: str, phases: List[float], **details: Any):
        super().__init__(message, **details)
        self.phases = phases


class VerificationError(FhmError):
    exit_code = 4


class MonodromyError(VerificationError):
    def __init__(self, message: str, defect: float, **details: Any):
        super().__init__(message, **details)
        self.defect = defect
