from .dirichlet_solver import boundary_sensitivity, curvature_map, newton_step, path_boundary, solve
from .fields import BoundaryData, HermitianField, MatrixField, MetricField, ScalarField, restrict_boundary, sup_norm
from .gauge_factorization import (
    FactorizationResult,
    factorize_annulus,
    integrate_frame,
    local_factorization,
    monodromy,
    reconstruct,
    unitary_log,
)
from .grid_domain import Grid, build_grid
from .linear_elliptic import LinearizedContext, apply_L, barrier, c0_certificate, solve_dirichlet_L
from .operator_calculus import connection, curvature_residual, d_mixed, d_zeta, d_zetabar
from .verification import max_principle_check, s_field, scalar_oracle, synthetic_flat

__all__ = [
    "BoundaryData",
    "HermitianField",
    "MatrixField",
    "MetricField",
    "ScalarField",
    "restrict_boundary",
    "sup_norm",
    "Grid",
    "build_grid",
    "d_zeta",
    "d_zetabar",
    "d_mixed",
    "connection",
    "curvature_residual",
    "LinearizedContext",
    "apply_L",
    "solve_dirichlet_L",
    "barrier",
    "c0_certificate",
    "path_boundary",
    "curvature_map",
    "newton_step",
    "solve",
    "boundary_sensitivity",
    "FactorizationResult",
    "integrate_frame",
    "monodromy",
    "unitary_log",
    "factorize_annulus",
    "reconstruct",
    "local_factorization",
    "s_field",
    "max_principle_check",
    "scalar_oracle",
    "synthetic_flat",
]
