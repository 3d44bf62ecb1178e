from typing import Any, Dict, List, Optional

from pydantic import BaseModel, Field


class CertificateReport(BaseModel):
    passes: bool
    worst_margin: float
    lh_norm: float
    p_inv_norm: float
    worst_node: Optional[int] = None


class MaxPrincipleReport(BaseModel):
    applicable: bool
    passes: bool
    interior_max: float
    boundary_max: float
    gap: float
    lh_min_eigenvalue: float


class StageRecord(BaseModel):
    t: float
    converged: bool
    newton_residual_history: List[float] = Field(default_factory=list)
    damping_factors: List[float] = Field(default_factory=list)
    step_norms: List[float] = Field(default_factory=list)
    message: Optional[str] = None


class SolveReport(BaseModel):
    stages: List[StageRecord] = Field(default_factory=list)
    flatness_residual: Optional[float] = None
    boundary_mismatch: Optional[float] = None
    holomorphy_defect: Optional[float] = None
    min_eigenvalue: Optional[float] = None
    newton_iterations: int = 0
    wall_time: Optional[float] = None
    converged: bool = False

    @property
    def accepted_stages(self) -> List[StageRecord]:
        return [stage for stage in self.stages if stage.converged]


class StabilityReport(BaseModel):
    gap: float
    relative_size: float
    constant: float


class TrialSummary(BaseModel):
    trials: int
    applicable: int
    passed: int
    worst_interior_max: float
    worst_certificate_margin: float
    failures: List[int] = Field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return not self.failures


class CommandReport(BaseModel):
    """Machine-readable outcome of one CLI command"""

    command: str
    status: str = "ok"
    exit_code: int = 0
    message: Optional[str] = None
    results: Dict[str, Any] = Field(default_factory=dict)
    solve: Optional[SolveReport] = None
