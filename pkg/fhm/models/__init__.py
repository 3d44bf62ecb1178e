from .domain import Chart, Circle, DomainKind, DomainSpec
from .options import SolveOptions, SyntheticSpec
from .reports import (
    CertificateReport,
    CommandReport,
    MaxPrincipleReport,
    SolveReport,
    StabilityReport,
    StageRecord,
    TrialSummary,
)

__all__ = [
    "Chart",
    "Circle",
    "DomainKind",
    "DomainSpec",
    "SolveOptions",
    "SyntheticSpec",
    "CertificateReport",
    "CommandReport",
    "MaxPrincipleReport",
    "SolveReport",
    "StabilityReport",
    "StageRecord",
    "TrialSummary",
]
