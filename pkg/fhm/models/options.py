from typing import List, Optional

from pydantic import BaseModel, ConfigDict, model_validator

from ..utils.config import settings
from ..utils.errors import InputError


class SolveOptions(BaseModel):
    model_config = ConfigDict(frozen=True)

    t_step_init: float
    t_step_min: float
    tol_newton: float
    max_newton: int
    damping_min: float
    tol_lin: float
    max_lin_iters: Optional[int] = None
    fast_newton_iters: int = 4
    t_step_growth: float = 1.5

    @model_validator(mode="after")
    def check_ranges(self) -> "SolveOptions":
        if not 0 < self.t_step_min <= self.t_step_init <= 1:
            raise InputError(
                f"need 0 < t_step_min <= t_step_init <= 1, got {self.t_step_min} and {self.t_step_init}"
            )
        if min(self.tol_newton, self.tol_lin, self.damping_min) <= 0:
            raise InputError("tolerances and damping_min must be positive")
        if self.max_newton < 1:
            raise InputError(f"max_newton must be at least 1, got {self.max_newton}")
        if self.t_step_growth < 1:
            raise InputError(f"t_step_growth must be >= 1, got {self.t_step_growth}")
        return self

    @classmethod
    def from_settings(cls, **overrides) -> "SolveOptions":
        """Defaults from the global settings; None-valued overrides are ignored"""
        values = dict(
            t_step_init=settings.T_STEP_INIT,
            t_step_min=settings.T_STEP_MIN,
            tol_newton=settings.TOL_NEWTON,
            max_newton=settings.MAX_NEWTON,
            damping_min=settings.DAMPING_MIN,
            tol_lin=settings.TOL_LIN,
            max_lin_iters=settings.MAX_LIN_ITERS,
            fast_newton_iters=settings.FAST_NEWTON_ITERS,
            t_step_growth=settings.T_STEP_GROWTH,
        )
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)


class SyntheticSpec(BaseModel):
    """Laurent generator G(w) = sum_{|k| <= degree} C_k w^k with exponent a_true"""

    model_config = ConfigDict(frozen=True)

    dim: int
    degree: int = 1
    scale: float = 0.3
    exponents: List[float]
    seed: int = 0
    mixing: bool = True

    @model_validator(mode="after")
    def check_generator(self) -> "SyntheticSpec":
        if self.dim < 1:
            raise InputError(f"dim must be >= 1, got {self.dim}")
        if self.degree < 0:
            raise InputError(f"degree must be >= 0, got {self.degree}")
        if len(self.exponents) != self.dim:
            raise InputError(f"need {self.dim} exponents, got {len(self.exponents)}")
        if any(not -0.5 < e <= 0.5 for e in self.exponents):
            raise InputError(f"exponents must lie in (-1/2, 1/2], got {self.exponents}")
        if self.scale < 0:
            raise InputError(f"scale must be non-negative, got {self.scale}")
        return self
