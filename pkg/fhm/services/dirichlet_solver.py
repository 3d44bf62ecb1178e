"""Flat metrics with prescribed boundary values by continuation along t F + (1 - t) I.

Each continuation stage runs damped Newton correctors on the curvature
residual. The corrector solves the linearized Dirichlet problem with the
current residual as interior data and the boundary mismatch as boundary data.
"""

import logging
import time
from typing import Optional, Tuple

import numpy as np

from ..models.options import SolveOptions
from ..models.reports import SolveReport, StabilityReport, StageRecord
from ..utils.errors import InputError, LinearSolverError, NonConvergenceError, StepFailure
from ..utils.linalg import hermitize, min_eigenvalues, op_norm
from .fields import (
    BoundaryData,
    HermitianField,
    MatrixField,
    MetricField,
    boundary_array,
    boundary_values,
    min_eigenvalue,
    sup_norm,
)
from .grid_domain import Grid
from .linear_elliptic import LinearizedContext, solve_dirichlet_L
from .operator_calculus import connection, curvature_residual, holomorphy_defect

logger = logging.getLogger(__name__)

DEGENERATE_RATIO = 1e-12
BOUNDARY_EXACT = 1e-12


def path_boundary(F: BoundaryData, t: float) -> BoundaryData:
    """Samplewise t F + (1 - t) I"""
    if not 0.0 <= t <= 1.0:
        raise InputError(f"path parameter must lie in [0, 1], got {t}")
    if t == 1.0:
        return F
    eye = np.eye(F.dim)
    return F.map_samples(lambda samples: t * samples + (1.0 - t) * eye)


def curvature_map(P: MetricField) -> Tuple[HermitianField, np.ndarray]:
    """(curvature residual, boundary values): the map the Newton corrector linearizes"""
    return curvature_residual(P), boundary_values(P)


def _check_boundary(F: BoundaryData, grid: Grid) -> None:
    F.check_grid(grid)
    for circle, samples in F.circles.items():
        lam = min_eigenvalues(samples)
        scale = op_norm(samples)
        bad = lam <= DEGENERATE_RATIO * scale
        if np.any(bad):
            sample = int(np.flatnonzero(bad)[0])
            raise InputError(
                f"{circle.value} boundary sample {sample} is degenerate: lambda_min {lam[sample]:.3e}, norm {scale[sample]:.3e}"
            )


def _boundary_mismatch(P: MetricField, target: np.ndarray) -> float:
    return sup_norm(boundary_values(P) - target)


def _newton_update(
    P: MetricField, target: np.ndarray, opts: SolveOptions
) -> Tuple[MetricField, float, float]:
    residual, edge = curvature_map(P)
    ctx = LinearizedContext(P)
    h = solve_dirichlet_L(
        ctx,
        residual.with_values(-residual.values),
        target - edge,
        tol=opts.tol_lin,
        max_iters=opts.max_lin_iters,
    )
    floor = 0.5 * min_eigenvalues(P.values)
    s = 1.0
    while s >= opts.damping_min:
        candidate = hermitize(P.values + s * h.values)
        if np.all(min_eigenvalues(candidate) >= floor):
            return MetricField(grid=P.grid, values=candidate), s * sup_norm(h), s
        s *= 0.5
    raise StepFailure(f"no admissible damping factor down to {opts.damping_min:.3e}", correction=sup_norm(h))


def newton_step(P: MetricField, target: BoundaryData, opts: Optional[SolveOptions] = None) -> Tuple[MetricField, float]:
    """One damped Newton corrector toward a flat metric with boundary values `target`"""
    opts = SolveOptions.from_settings() if opts is None else opts
    P_next, step_norm, damping = _newton_update(P, boundary_array(P.grid, target), opts)
    logger.debug("Newton step: damping %.3g, step norm %.3e", damping, step_norm)
    return P_next, step_norm


def _run_stage(P: MetricField, target: np.ndarray, t: float, opts: SolveOptions) -> Tuple[MetricField, StageRecord]:
    record = StageRecord(t=t, converged=False)
    exact = BOUNDARY_EXACT * (1.0 + sup_norm(target))
    boundary = P.grid.boundary_index
    try:
        for _ in range(opts.max_newton + 1):
            residual = sup_norm(curvature_residual(P))
            record.newton_residual_history.append(residual)
            if not np.isfinite(residual):
                record.message = f"residual diverged to {residual:.3e}"
                return P, record
            if residual <= opts.tol_newton and _boundary_mismatch(P, target) <= exact:
                values = P.values.copy()
                values[boundary] = target
                record.converged = True
                return MetricField(grid=P.grid, values=values), record
            if len(record.step_norms) == opts.max_newton:
                break
            P, step_norm, damping = _newton_update(P, target, opts)
            record.step_norms.append(step_norm)
            record.damping_factors.append(damping)
        record.message = f"no convergence in {opts.max_newton} Newton iterations"
    except (StepFailure, LinearSolverError) as e:
        record.message = e.message
    return P, record


def solve(F: BoundaryData, grid: Grid, opts: Optional[SolveOptions] = None) -> Tuple[MetricField, SolveReport]:
    """Flat metric on the grid with boundary values F, with the continuation report"""
    opts = SolveOptions.from_settings() if opts is None else opts
    _check_boundary(F, grid)
    started = time.perf_counter()
    report = SolveReport()
    P = MetricField.identity(grid, F.dim)
    t, step = 0.0, opts.t_step_init

    final_target = boundary_array(grid, F)
    if _boundary_mismatch(P, final_target) == 0.0:
        t = 1.0
        report.stages.append(StageRecord(t=1.0, converged=True, newton_residual_history=[sup_norm(curvature_residual(P))]))

    while t < 1.0:
        t_next = min(1.0, t + step)
        target = final_target if t_next == 1.0 else boundary_array(grid, path_boundary(F, t_next))
        candidate, record = _run_stage(P, target, t_next, opts)
        report.stages.append(record)
        report.newton_iterations += len(record.step_norms)
        if not record.converged:
            step *= 0.5
            logger.info("Stage t=%.4f failed (%s); step -> %.3e", t_next, record.message, step)
            if step < opts.t_step_min:
                report.wall_time = time.perf_counter() - started
                raise NonConvergenceError(
                    f"continuation step fell below {opts.t_step_min:.3e} at t={t:.4f}", report=report
                )
            continue
        P, t = candidate, t_next
        logger.info(
            "Stage t=%.4f converged in %d Newton steps, residual %.3e",
            t, len(record.step_norms), record.newton_residual_history[-1],
        )
        if len(record.step_norms) <= opts.fast_newton_iters:
            step = min(1.0, step * opts.t_step_growth)
        step = max(step, opts.t_step_min)

    report.flatness_residual = sup_norm(curvature_residual(P))
    report.boundary_mismatch = _boundary_mismatch(P, final_target)
    report.holomorphy_defect = holomorphy_defect(connection(P))
    report.min_eigenvalue = min_eigenvalue(P)
    report.converged = True
    report.wall_time = time.perf_counter() - started
    logger.info(
        "Solved %s n=%d: %d stages, %d Newton steps, residual %.3e",
        grid.describe(), F.dim, len(report.stages), report.newton_iterations, report.flatness_residual,
    )
    return P, report


def stability_gap(P1: MatrixField, P2: MatrixField) -> float:
    P1.check_compatible(P2)
    return sup_norm(P1.values - P2.values)


def boundary_sensitivity(
    F: BoundaryData, grid: Grid, opts: Optional[SolveOptions] = None, rel: float = 1e-3
) -> StabilityReport:
    """Interior response to multiplying the boundary samples by 1 + rel cos(theta)"""
    if not 0 < rel < 1:
        raise InputError(f"relative perturbation must lie in (0, 1), got {rel}")
    bump = 1.0 + rel * np.cos(np.arange(F.n_ang) * (2.0 * np.pi / F.n_ang))
    P1, _ = solve(F, grid, opts)
    P2, _ = solve(F.map_samples(lambda samples: bump[:, None, None] * samples), grid, opts)
    gap = stability_gap(P1, P2)
    constant = gap / (rel * sup_norm(P1))
    logger.info("Boundary sensitivity: gap %.3e for relative size %.1e (constant %.3f)", gap, rel, constant)
    return StabilityReport(gap=gap, relative_size=rel, constant=constant)
