from typing import Optional
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    # Hermitian bookkeeping
    TOL_HERM: float = 1e-10

    # Linear elliptic solves
    TOL_LIN: float = 1e-10
    MAX_LIN_ITERS: Optional[int] = None  # None: 10 * sqrt(unknowns) + 500
    GMRES_RESTART: int = 50
    TOL_CERT: float = 1e-8

    # Continuation / Newton
    TOL_NEWTON: float = 1e-8
    T_STEP_INIT: float = 0.25
    T_STEP_MIN: float = 1e-4
    MAX_NEWTON: int = 30
    DAMPING_MIN: float = 2.0 ** -20
    FAST_NEWTON_ITERS: int = 4
    T_STEP_GROWTH: float = 1.5

    # Frames and factorization
    TOL_FLAT_INPUT: float = 5e-2
    TOL_UNITARY: float = 1e-6
    TOL_FACT: float = 1e-5
    BRANCH_GUARD: float = 1e-6
    BRANCH_GUARD_SCALE: float = 10.0
    INTEGRATION_SUBSTEPS: int = 4

    # Verification
    TOL_MP: float = 1e-8
    MIN_SINGULAR_SYNTHETIC: float = 0.1
    MAX_SYNTHETIC_DRAWS: int = 100

    LOG_LEVEL: str = "WARNING"

    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="FHM_",
        case_sensitive=True,
        extra="ignore",
    )

    def max_lin_iters(self, unknowns: int) -> int:
        """Iteration cap for one Krylov solve with the given number of unknowns"""
        if self.MAX_LIN_ITERS is not None:
            return self.MAX_LIN_ITERS
        return int(10 * unknowns ** 0.5) + 500


# Global settings instance
settings = Settings()
